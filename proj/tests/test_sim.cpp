#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace vlp;
using namespace vlp::testing;

namespace {

ScenarioSpec bench(double jitter = 0.0, double noise = 0.0) {
    ScenarioSpec s;
    s.id = "bench";
    s.family = "pick_place";
    s.instruction = "put the cup on the table";
    s.objects = {
        {"cup", {0.40, 0.00, 0.30, 0, 0, 0}, true, false, false, false, std::nullopt},
        {"table", {1.50, 0.00, 0.40, 0, 0, 0}, false, false, false, false, std::nullopt},
        {"bin", {0.30, -0.40, 0.30, 0, 0, 0}, false, false, true, false, std::nullopt},
        {"operator", {0.20, 0.40, 0.40, 0, 0, 0}, false, false, false, false, std::nullopt},
        {"drawer", {0.40, 0.30, 0.35, 0, 0, 0}, false, false, false, false, Pose{0.30, 0.30, 0.35, 0, 0, 0}},
    };
    s.goal = {{GoalType::at_pose, "cup", std::nullopt, std::string("table"), 0.05}};
    s.jitter = jitter;
    s.observation_noise = noise;
    return s;
}

BehaviorStep act(const std::string& name, std::optional<Pose> pose = std::nullopt) {
    Params p;
    if (pose) p["pose"] = *pose;
    return step("x", StepKind::action, name, p);
}

BehaviorStep see(const std::string& name, const std::string& label) {
    return step("x", StepKind::perception, name, {{"label", label}});
}

const PrimitiveCatalog& cat() {
    static const auto c = builtin_catalog("quadruped_manipulator");
    return c;
}

} // namespace

TEST(Sim, ZeroJitterWorldIgnoresSeed) {
    EXPECT_EQ(to_json(new_world(bench(), 1)), to_json(new_world(bench(), 99)));
}

TEST(Sim, JitterIsSeededBoundedAndOnlyOnGraspables) {
    const auto a = new_world(bench(0.03), 7);
    EXPECT_EQ(to_json(a), to_json(new_world(bench(0.03), 7)));
    EXPECT_NE(to_json(a), to_json(new_world(bench(0.03), 8)));
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto w = new_world(bench(0.03), seed);
        const auto& cup = w.objects.at("cup").pose;
        EXPECT_LE(std::abs(cup.x - 0.40), 0.03);
        EXPECT_LE(std::abs(cup.y - 0.00), 0.03);
        EXPECT_EQ(cup.z, 0.30);
        EXPECT_EQ(w.objects.at("table").pose, (Pose{1.50, 0.00, 0.40, 0, 0, 0}));
    }
}

TEST(Sim, ObservationNoiseStatistics) {
    const double sigma = 0.1;
    Simulator sim(bench(0.0, sigma), 12345);
    const Pose truth = sim.state().objects.at("cup").pose;
    const int n = 100000;
    double sum[3] = {0, 0, 0};
    double sq[3] = {0, 0, 0};
    int outside = 0;
    for (int i = 0; i < n; ++i) {
        const auto obs = sim.observe();
        const auto& p = obs.find("cup")->pose;
        const double d[3] = {p.x - truth.x, p.y - truth.y, p.z - truth.z};
        for (int k = 0; k < 3; ++k) {
            sum[k] += d[k];
            sq[k] += d[k] * d[k];
            if (std::abs(d[k]) > 4 * sigma) ++outside;
        }
        EXPECT_EQ(p.yaw, truth.yaw);
    }
    for (int k = 0; k < 3; ++k) {
        const double mean = sum[k] / n;
        const double var = sq[k] / n - mean * mean;
        EXPECT_LT(std::abs(mean), 5 * sigma / std::sqrt(double(n)));
        EXPECT_NEAR(std::sqrt(var), sigma, 0.01 * sigma);
    }
    // P(|N(0,1)| > 4) ~ 6.3e-5 per coordinate.
    EXPECT_LE(double(outside) / (3.0 * n), 1e-4);
}

TEST(Sim, SnapshotIsNoiseFreeAndDoesNotConsumeRandomness) {
    Simulator a(bench(0.0, 0.1), 5);
    Simulator b(bench(0.0, 0.1), 5);
    (void)a.snapshot();
    EXPECT_EQ(a.snapshot().find("cup")->pose, a.state().objects.at("cup").pose);
    EXPECT_EQ(to_json(a.observe()), to_json(b.observe()));
}

TEST(Sim, GraspLiftPlaceSequence) {
    Simulator sim(bench(), 0);
    auto r = sim.execute(act("wake_up"), cat());
    ASSERT_TRUE(r.success);
    r = sim.execute(act("grasp", Pose{0.41, 0.0, 0.3, 0, 0, 0}), cat());
    ASSERT_TRUE(r.success) << r.reason;
    EXPECT_EQ(r.subject, "cup");
    EXPECT_EQ(sim.state().robot.gripper_holding, "cup");
    EXPECT_TRUE(sim.state().objects.at("cup").held);
    ASSERT_TRUE(sim.execute(act("lift"), cat()).success);
    const Pose spot{0.3, 0.2, 0.3, 0, 0, 0};
    ASSERT_TRUE(sim.execute(act("place", spot), cat()).success);
    EXPECT_FALSE(sim.state().robot.gripper_holding);
    EXPECT_EQ(sim.state().objects.at("cup").pose, spot);
    EXPECT_EQ(sim.state().tick, 4u);
    EXPECT_EQ(invariant_violation(sim.state()), "");
}

TEST(Sim, FailureLeavesWorldUnchangedButAdvancesTick) {
    Simulator sim(bench(), 0);
    const auto before = sim.state();
    const auto r = sim.execute(act("grasp", Pose{1.5, 0, 0.4, 0, 0, 0}), cat());
    EXPECT_FALSE(r.success);
    EXPECT_EQ(r.failure_class, FailureClass::execution);
    EXPECT_EQ(r.reason, "unreachable");
    auto after = sim.state();
    EXPECT_EQ(after.tick, before.tick + 1);
    after.tick = before.tick;
    EXPECT_EQ(to_json(after), to_json(before));

    const auto miss = sim.execute(act("grasp", Pose{0.3, 0.1, 0.3, 0, 0, 0}), cat());
    EXPECT_FALSE(miss.success);
    EXPECT_EQ(miss.reason, "no graspable object at target");
    const auto pre = sim.execute(act("place", Pose{0.3, 0.1, 0.3, 0, 0, 0}), cat());
    EXPECT_EQ(pre.reason, "precondition holding_object");
}

TEST(Sim, MoveBaseBringsTargetIntoReach) {
    Simulator sim(bench(), 0);
    const Pose table = sim.state().objects.at("table").pose;
    EXPECT_FALSE(within_reach(sim.state().robot.base_pose, table, 0.65));
    ASSERT_TRUE(sim.execute(act("move_base", table), cat()).success);
    EXPECT_TRUE(within_reach(sim.state().robot.base_pose, table, 0.65));
    EXPECT_NEAR(planar_distance(sim.state().robot.base_pose, table), 0.325, 1e-12);
}

TEST(Sim, PlaceIntoReceptacleDisposes) {
    Simulator sim(bench(), 0);
    ASSERT_TRUE(sim.execute(act("grasp", Pose{0.4, 0, 0.3, 0, 0, 0}), cat()).success);
    ASSERT_TRUE(sim.execute(act("place", Pose{0.30, -0.40, 0.30, 0, 0, 0}), cat()).success);
    EXPECT_EQ(sim.state().find("cup"), nullptr);
}

TEST(Sim, HandoverMovesObjectToOperator) {
    Simulator sim(bench(), 0);
    ASSERT_TRUE(sim.execute(act("grasp", Pose{0.4, 0, 0.3, 0, 0, 0}), cat()).success);
    ASSERT_TRUE(sim.execute(act("handover", Pose{0.20, 0.40, 0.40, 0, 0, 0}), cat()).success);
    EXPECT_TRUE(sim.state().objects.at("cup").at_operator);
    EXPECT_EQ(sim.snapshot().find("cup"), nullptr);
}

TEST(Sim, PushClosesArticulatedObject) {
    Simulator sim(bench(), 0);
    EXPECT_FALSE(sim.execute(act("push", Pose{0.4, 0.0, 0.3, 0, 0, 0}), cat()).success);
    ASSERT_TRUE(sim.execute(act("push", Pose{0.41, 0.30, 0.35, 0, 0, 0}), cat()).success);
    EXPECT_EQ(sim.state().objects.at("drawer").pose, (Pose{0.30, 0.30, 0.35, 0, 0, 0}));
}

TEST(Sim, PerceptionOutputsAndErrors) {
    Simulator sim(bench(), 0);
    auto r = sim.execute(see("locate_object", "table"), cat());
    ASSERT_TRUE(r.success);
    EXPECT_EQ(std::get<Pose>(r.outputs.at("pose")), sim.state().objects.at("table").pose);
    EXPECT_EQ(r.perception_error, 0.0);
    r = sim.execute(see("grasp_point", "unicorn"), cat());
    EXPECT_FALSE(r.success);
    EXPECT_EQ(r.failure_class, FailureClass::perception);
    r = sim.execute(step("x", StepKind::perception, "scene_objects"), cat());
    EXPECT_EQ(std::get<std::string>(r.outputs.at("labels")), "bin,cup,drawer,operator,table");
    EXPECT_EQ(std::get<double>(r.outputs.at("count")), 5.0);
    r = sim.execute(step("x", StepKind::perception, "robot_state"), cat());
    EXPECT_EQ(std::get<std::string>(r.outputs.at("holding")), "");
}

TEST(Sim, NoisyPerceptionReportsItsError) {
    Simulator sim(bench(0.0, 0.05), 3);
    const auto r = sim.execute(see("locate_object", "cup"), cat());
    const auto seen = std::get<Pose>(r.outputs.at("pose"));
    EXPECT_DOUBLE_EQ(*r.perception_error, distance(seen, sim.state().objects.at("cup").pose));
    EXPECT_GT(*r.perception_error, 0.0);
}

TEST(Sim, Perturbations) {
    Simulator sim(bench(), 0);
    ASSERT_TRUE(sim.execute(act("grasp", Pose{0.4, 0, 0.3, 0, 0, 0}), cat()).success);
    sim.apply({PerturbationKind::move_object, "cup", {0.2, 0.2, 0.2, 0, 0, 0}, std::nullopt, true});
    EXPECT_FALSE(sim.state().robot.gripper_holding);
    EXPECT_FALSE(sim.state().objects.at("cup").held);
    EXPECT_EQ(invariant_violation(sim.state()), "");
    sim.apply({PerturbationKind::add_object, "mug", {0.2, -0.2, 0.2, 0, 0, 0}, std::nullopt, true});
    EXPECT_NE(sim.state().find("mug"), nullptr);
    EXPECT_THROW(sim.apply({PerturbationKind::add_object, "mug", {}, std::nullopt, true}), DuplicateObject);
    sim.apply({PerturbationKind::remove_object, "mug", {}, std::nullopt, true});
    EXPECT_EQ(sim.state().find("mug"), nullptr);
    EXPECT_THROW(sim.apply({PerturbationKind::remove_object, "mug", {}, std::nullopt, true}), UnknownObject);
}

TEST(Sim, ExecutionIsDeterministicPerSeed) {
    auto run = [](std::uint64_t seed) {
        Simulator sim(bench(0.03, 0.02), seed);
        std::string out;
        for (int i = 0; i < 5; ++i) {
            auto r = sim.execute(see("locate_object", "cup"), cat());
            out += param_to_json(r.outputs.at("pose")).dump();
        }
        return out + to_json(sim.state()).dump();
    };
    EXPECT_EQ(run(11), run(11));
    EXPECT_NE(run(11), run(12));
}
