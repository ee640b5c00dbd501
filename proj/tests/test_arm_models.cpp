#include <gtest/gtest.h>

#include "isq/arm_model.hpp"
#include "isq/scenario_io.hpp"

using namespace isq;

namespace {

void expect_rows_stochastic(const Matrix& k) {
    for (std::size_t r = 0; r < k.rows(); ++r) {
        double sum = 0.0;
        for (const double p : k.row(r)) {
            EXPECT_GE(p, 0.0);
            EXPECT_LE(p, 1.0);
            sum += p;
        }
        EXPECT_NEAR(sum, 1.0, 1e-9) << "row " << r;
    }
}

}  // namespace

TEST(Circulant, KernelsMatchPublishedMatrices) {
    const ScenarioSpec s = make_circulant_scenario(5, 1);
    ASSERT_EQ(s.arm_count(), 5);
    const Matrix passive{{0.5, 0, 0, 0.5}, {0.5, 0.5, 0, 0}, {0, 0.5, 0.5, 0}, {0, 0, 0.5, 0.5}};
    const Matrix active{{0.5, 0.5, 0, 0}, {0, 0.5, 0.5, 0}, {0, 0, 0.5, 0.5}, {0.5, 0, 0, 0.5}};
    for (const ArmModel& arm : s.arms) {
        EXPECT_TRUE(arm.kernel_passive == passive);
        EXPECT_TRUE(arm.kernel_active == active);
        EXPECT_TRUE(arm == s.arms.front());
    }
    EXPECT_EQ(s.metric_kind, MetricKind::time_average);
    EXPECT_EQ(s.budget, 1);
}

TEST(Circulant, Rewards) {
    const ArmModel arm = circulant_arm();
    for (int a : {kPassive, kActive}) {
        EXPECT_EQ(arm.reward(0, a), -1.0);
        EXPECT_EQ(arm.reward(1, a), 0.0);
        EXPECT_EQ(arm.reward(2, a), 0.0);
        EXPECT_EQ(arm.reward(3, a), 1.0);
    }
}

TEST(Circulant, MinimalScenario) {
    const ScenarioSpec s = make_circulant_scenario(2, 1);
    EXPECT_EQ(s.arm_count(), 2);
    EXPECT_NO_THROW(check_scenario(s));
}

TEST(Circulant, RejectsBadBudget) {
    EXPECT_THROW(make_circulant_scenario(5, 5), std::invalid_argument);
    EXPECT_THROW(make_circulant_scenario(5, 0), std::invalid_argument);
    EXPECT_THROW(make_circulant_scenario(3, 7), std::invalid_argument);
}

TEST(HomogeneousTarget, KernelsAndRewardsExact) {
    const ScenarioSpec s = make_homogeneous_target_scenario(5, 1, 0.999);
    const Matrix passive{{0.8, 0.2, 0, 0}, {0.3, 0.7, 0, 0}, {0, 0.3, 0.7, 0}, {0.4, 0, 0, 0.6}};
    const Matrix active{{0.3, 0.7, 0, 0}, {0, 0.3, 0.7, 0}, {0, 0, 0.3, 0.7}, {0.3, 0, 0, 0.7}};
    const Matrix reward{{0.5, 2}, {0.3, 1.5}, {0.1, 1}, {0, -1}};
    for (const ArmModel& arm : s.arms) {
        EXPECT_TRUE(arm.kernel_passive == passive);
        EXPECT_TRUE(arm.kernel_active == active);
        EXPECT_TRUE(arm.reward == reward);
    }
    EXPECT_EQ(s.metric_kind, MetricKind::discounted_cumulative);
    EXPECT_EQ(s.discount, 0.999);
}

TEST(HomogeneousTarget, SpotEntries) {
    const ArmModel arm = homogeneous_target_arm();
    const auto row2 = arm.kernel_active.row(2);
    EXPECT_EQ(std::vector<double>(row2.begin(), row2.end()), (std::vector<double>{0, 0, 0.3, 0.7}));
    EXPECT_EQ(arm.reward(3, 1), -1.0);
    EXPECT_EQ(arm.reward(0, 0), 0.5);
}

TEST(HomogeneousTarget, RejectsBadArguments) {
    EXPECT_THROW(make_homogeneous_target_scenario(5, 5, 0.9), std::invalid_argument);
    EXPECT_THROW(make_homogeneous_target_scenario(5, 1, 1.0), std::invalid_argument);
    EXPECT_THROW(make_homogeneous_target_scenario(5, 1, 0.0), std::invalid_argument);
}

TEST(HeterogeneousTarget, DeterministicUnderSeed) {
    const ScenarioSpec a = make_heterogeneous_target_scenario(5, 1, 0.999, 7);
    const ScenarioSpec b = make_heterogeneous_target_scenario(5, 1, 0.999, 7);
    ASSERT_EQ(a.arm_count(), b.arm_count());
    for (int i = 0; i < a.arm_count(); ++i) {
        EXPECT_TRUE(a.arms[static_cast<std::size_t>(i)] == b.arms[static_cast<std::size_t>(i)]);
    }
    const ScenarioSpec c = make_heterogeneous_target_scenario(5, 1, 0.999, 8);
    EXPECT_FALSE(a.arms[0] == c.arms[0]);
}

TEST(HeterogeneousTarget, RowsNormalised) {
    const ScenarioSpec s = make_heterogeneous_target_scenario(5, 1, 0.999, 7);
    for (const ArmModel& arm : s.arms) {
        expect_rows_stochastic(arm.kernel_passive);
        expect_rows_stochastic(arm.kernel_active);
        EXPECT_FALSE(validate(arm).has_value());
    }
}

TEST(HeterogeneousTarget, DriftCriterion) {
    const ArmModel ref = homogeneous_target_arm();
    for (std::uint64_t seed : {1u, 7u, 42u, 1234u}) {
        const ScenarioSpec s = make_heterogeneous_target_scenario(20, 3, 0.999, seed);
        for (const ArmModel& arm : s.arms) {
            EXPECT_GE(arm.kernel_passive(0, 0), arm.kernel_active(0, 0));
            EXPECT_TRUE(arm.reward == ref.reward);
            for (std::size_t r = 0; r < 4; ++r) {
                for (std::size_t c = 0; c < 4; ++c) {
                    // Zero pattern of the reference kernels is preserved.
                    if (ref.kernel_active(r, c) == 0.0) {
                        EXPECT_EQ(arm.kernel_active(r, c), 0.0);
                    }
                    if (ref.kernel_passive(r, c) == 0.0) {
                        EXPECT_EQ(arm.kernel_passive(r, c), 0.0);
                    }
                }
            }
            for (std::size_t r = 0; r < 3; ++r) {
                EXPECT_GE(arm.kernel_active(r, r), 0.2);
                EXPECT_LE(arm.kernel_active(r, r), 0.5);
            }
            EXPECT_GE(arm.kernel_passive(0, 0), 0.6);
            EXPECT_LE(arm.kernel_passive(0, 0), 0.9);
            for (std::size_t r = 1; r < 3; ++r) {
                EXPECT_GE(arm.kernel_passive(r, r - 1), 0.2);
                EXPECT_LE(arm.kernel_passive(r, r - 1), 0.5);
            }
            EXPECT_GE(arm.kernel_active(3, 0), 0.2);
            EXPECT_LE(arm.kernel_active(3, 0), 0.5);
            EXPECT_GE(arm.kernel_passive(3, 0), 0.2);
            EXPECT_LE(arm.kernel_passive(3, 0), 0.5);
        }
    }
}

TEST(Validate, PresetsAreOk) {
    EXPECT_FALSE(validate(circulant_arm()).has_value());
    EXPECT_FALSE(validate(homogeneous_target_arm()).has_value());
}

TEST(Validate, RowSumViolationNamesRow) {
    ArmModel arm = circulant_arm();
    arm.kernel_active(2, 3) = 0.4;  // row 2 sums to 0.9
    const auto v = validate(arm);
    ASSERT_TRUE(v.has_value());
    EXPECT_EQ(v->kind, ViolationKind::row_sum);
    EXPECT_EQ(v->matrix, "kernel_active");
    EXPECT_EQ(v->row, 2);
}

TEST(Validate, NegativeProbabilityIsRangeViolation) {
    ArmModel arm = circulant_arm();
    arm.kernel_passive(1, 0) = -0.5;
    arm.kernel_passive(1, 1) = 1.5;
    const auto v = validate(arm);
    ASSERT_TRUE(v.has_value());
    EXPECT_EQ(v->kind, ViolationKind::range);
    EXPECT_EQ(v->row, 1);
}

TEST(Validate, ShapeAndRewardViolations) {
    ArmModel arm = circulant_arm();
    arm.state_count = 1;
    EXPECT_EQ(validate(arm)->kind, ViolationKind::shape);

    arm = circulant_arm();
    arm.reward = Matrix(4, 3);
    EXPECT_EQ(validate(arm)->kind, ViolationKind::shape);

    arm = circulant_arm();
    arm.reward(0, 1) = std::numeric_limits<double>::infinity();
    EXPECT_EQ(validate(arm)->kind, ViolationKind::reward);
}

TEST(ScenarioJson, RoundTrip) {
    const ScenarioSpec s = make_heterogeneous_target_scenario(4, 2, 0.95, 3);
    const ScenarioSpec back = scenario_from_json(Json::parse(scenario_to_json(s).dump()));
    ASSERT_EQ(back.arm_count(), 4);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_TRUE(back.arms[i] == s.arms[i]);
    }
    EXPECT_EQ(back.budget, 2);
    EXPECT_EQ(back.discount, 0.95);
    EXPECT_EQ(back.metric_kind, MetricKind::discounted_cumulative);
}

TEST(ScenarioJson, FieldNames) {
    const Json j = scenario_to_json(make_circulant_scenario(2, 1));
    for (const char* key : {"arms", "budget", "discount", "metric_kind"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    for (const char* key : {"state_count", "kernel_passive", "kernel_active", "reward"}) {
        EXPECT_TRUE(j["arms"][0].contains(key)) << key;
    }
    EXPECT_EQ(j["metric_kind"], "time_average");
}

TEST(ScenarioJson, ErrorsNameTheField) {
    Json j = scenario_to_json(make_homogeneous_target_scenario(3, 1, 0.9));
    j["arms"][2]["kernel_active"][1][1] = 0.9;
    try {
        scenario_from_json(j);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "arms[2].kernel_active");
    }

    j = scenario_to_json(make_homogeneous_target_scenario(3, 1, 0.9));
    j.erase("budget");
    try {
        scenario_from_json(j);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "budget");
    }

    j = scenario_to_json(make_homogeneous_target_scenario(3, 1, 0.9));
    j["metric_kind"] = "total";
    EXPECT_THROW(scenario_from_json(j), ConfigError);

    j = scenario_to_json(make_homogeneous_target_scenario(3, 1, 0.9));
    j["arms"][0]["reward"][0] = Json::array({1.0});
    try {
        scenario_from_json(j);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "arms[0].reward");
    }
}
