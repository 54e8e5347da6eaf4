#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"

using namespace vlp;
using namespace vlp::testing;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const ScenarioError& e) {
        return e.what();
    }
    return "";
}

const char* kMinimal = R"({
  "id": "t", "family": "pick_place", "instruction": "put the cup on the table",
  "objects": [{"label": "cup", "pose": [0.4, 0, 0.3, 0, 0, 0]},
              {"label": "table", "pose": [1, 0, 0.4, 0, 0, 0], "graspable": false}],
  "goal": [{"type": "at_pose", "label": "cup", "target_label": "table"}]
})";

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("vlp_corpus_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    void write(const std::string& name, const std::string& text) const { std::ofstream(path / name) << text; }
};

} // namespace

TEST(Scenario, BuiltinCorpusShape) {
    const auto all = corpus();
    std::map<std::string, int> static_per_family;
    std::set<std::string> dynamic_ids;
    for (const auto& s : all) {
        if (s.dynamic) {
            dynamic_ids.insert(s.id);
        } else {
            ++static_per_family[s.family];
        }
    }
    EXPECT_GE(all.size(), 12u);
    for (const auto& f : task_families()) EXPECT_GE(static_per_family[f], 3) << f;
    EXPECT_TRUE(dynamic_ids.contains("dynamic_object_handover"));
    EXPECT_TRUE(dynamic_ids.contains("goal_change_during_execution"));
    EXPECT_TRUE(dynamic_ids.contains("conditional_drawer_closing"));
    EXPECT_TRUE(std::is_sorted(all.begin(), all.end(), [](auto& a, auto& b) { return a.id < b.id; }));
}

TEST(Scenario, DefaultsAndFields) {
    const auto s = parse_scenario(kMinimal);
    EXPECT_EQ(s.embodiment, "quadruped_manipulator");
    EXPECT_FALSE(s.dynamic);
    EXPECT_EQ(s.objects.size(), 2u);
    EXPECT_TRUE(s.objects[0].graspable);
    EXPECT_FALSE(s.objects[1].graspable);
    EXPECT_EQ(s.goal[0].tolerance, 0.05);
}

TEST(Scenario, JsonRoundTrip) {
    for (const auto& s : corpus()) {
        EXPECT_EQ(scenario_from_json(scenario_to_json(s)), s) << s.id;
    }
}

TEST(Scenario, RejectsInvalidDocuments) {
    auto with = [](const std::string& from, const std::string& to) {
        std::string t = kMinimal;
        t.replace(t.find(from), from.size(), to);
        return t;
    };
    EXPECT_NE(error_of("{oops"), "");
    EXPECT_NE(error_of(with("pick_place", "juggling")).find("unknown family"), std::string::npos);
    EXPECT_NE(error_of(with(R"("id": "t",)", R"("id": "t", "embodiment": "hexapod",)")).find("unknown embodiment"),
              std::string::npos);
    EXPECT_NE(error_of(with(R"("target_label": "table")", R"("target_label": "sofa")")).find("unknown label"),
              std::string::npos);
    EXPECT_NE(error_of(with(R"("label": "table")", R"("label": "cup")")).find("duplicate object"), std::string::npos);
    EXPECT_NE(error_of(with(R"("graspable": false)", R"("graspable": false, "held": true)")).find("not graspable"),
              std::string::npos);
    EXPECT_NE(error_of(with(R"([0.4, 0, 0.3, 0, 0, 0])", "[0.4, 0]")).find("6 numbers"), std::string::npos);
    EXPECT_NE(error_of(with(R"("type": "at_pose")", R"("type": "levitating")")).find("goal type"), std::string::npos);
}

TEST(Scenario, GoalMayNameObjectAddedByScriptedEvent) {
    std::string t = kMinimal;
    t.insert(t.rfind('}'), R"(, "scripted_events": [{"after_step": 1, "perturbation":
        {"kind": "add_object", "target": "mug", "new_pose": [0.5, 0.2, 0.3, 0, 0, 0]}}])");
    auto s = parse_scenario(t);
    s.goal.push_back({GoalType::absent, "mug", std::nullopt, std::nullopt, 0.05});
    EXPECT_NO_THROW(validate_scenario(s));
    s.goal.push_back({GoalType::absent, "ghost", std::nullopt, std::nullopt, 0.05});
    EXPECT_THROW(validate_scenario(s), ScenarioError);
}

TEST(Scenario, GoalPredicates) {
    WorldState w;
    ObjectRecord cup{"cup", {0.40, 0, 0.3, 0, 0, 0}, true, false, false, false, std::nullopt};
    ObjectRecord table{"table", {0.42, 0, 0.3, 0, 0, 0}, false, false, false, false, std::nullopt};
    w.objects = {{"cup", cup}, {"table", table}};
    EXPECT_TRUE(goal_holds(GoalPredicate{GoalType::at_pose, "cup", std::nullopt, "table", 0.05}, w));
    EXPECT_FALSE(goal_holds(GoalPredicate{GoalType::at_pose, "cup", std::nullopt, "table", 0.01}, w));
    EXPECT_TRUE(goal_holds(GoalPredicate{GoalType::at_pose, "cup", Pose{0.4, 0.03, 0.3, 0, 0, 0}, std::nullopt, 0.05}, w));
    EXPECT_FALSE(goal_holds(GoalPredicate{GoalType::absent, "cup", std::nullopt, std::nullopt, 0.05}, w));
    EXPECT_TRUE(goal_holds(GoalPredicate{GoalType::absent, "plate", std::nullopt, std::nullopt, 0.05}, w));
    EXPECT_FALSE(goal_holds(GoalPredicate{GoalType::held_by_operator, "cup", std::nullopt, std::nullopt, 0.05}, w));
    w.objects["cup"].at_operator = true;
    EXPECT_TRUE(goal_holds(GoalPredicate{GoalType::held_by_operator, "cup", std::nullopt, std::nullopt, 0.05}, w));
    w.objects["cup"].held = true;
    EXPECT_FALSE(goal_holds(GoalPredicate{GoalType::at_pose, "cup", std::nullopt, "table", 0.05}, w));
}

TEST(Scenario, CorpusLoadingErrors) {
    EXPECT_THROW(load_corpus("/nonexistent/vlp/corpus"), CorpusError);
    {
        TempDir d;
        EXPECT_THROW(load_corpus(d.path), CorpusError);
        d.write("notes.txt", "ignored");
        EXPECT_THROW(load_corpus(d.path), CorpusError);
    }
    {
        TempDir d;
        d.write("a.json", kMinimal);
        d.write("b.json", kMinimal);
        EXPECT_THROW(load_corpus(d.path), CorpusError);
    }
    {
        TempDir d;
        d.write("a.json", kMinimal);
        EXPECT_EQ(load_corpus(d.path).size(), 1u);
    }
}
