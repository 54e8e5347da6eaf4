#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vlp/policy.hpp"
#include "vlp/primitives.hpp"
#include "vlp/world_state.hpp"

namespace vlp {

enum class Severity { error, warning };

struct ValidationIssue {
    Severity severity = Severity::error;
    std::optional<std::string> step_id;
    std::string code;
    std::string message;
};

struct ValidationReport {
    bool ok = true;
    std::vector<ValidationIssue> issues;

    bool has(std::string_view code) const {
        return std::any_of(issues.begin(), issues.end(), [&](const auto& i) { return i.code == code; });
    }
    std::size_t error_count() const {
        return static_cast<std::size_t>(
            std::count_if(issues.begin(), issues.end(), [](const auto& i) { return i.severity == Severity::error; }));
    }
};

/// Facts known to hold before the first step; geometric predicates
/// (within_reach, at_pose) are not tracked symbolically.
struct SymbolicState {
    std::set<std::string> facts;

    static SymbolicState empty_gripper() { return {{pred::gripper_empty, pred::gripper_open}}; }

    static SymbolicState from_robot(const RobotState& r) {
        SymbolicState s;
        s.facts.insert(r.gripper_holding ? pred::holding_object : pred::gripper_empty);
        s.facts.insert(r.gripper_open ? pred::gripper_open : pred::gripper_closed);
        return s;
    }

    static bool geometric(std::string_view p) { return p == pred::within_reach || p == pred::at_pose; }

    bool holds(const std::string& p) const {
        // Geometry and mobility are checked by the simulator; the catalog
        // already omits move_base for fixed bases.
        if (geometric(p) || p == pred::base_mobile) return true;
        return facts.contains(p);
    }

    void assert_fact(const std::string& p) {
        static const std::map<std::string, std::string> kExclusive = {
            {pred::gripper_empty, pred::holding_object},
            {pred::holding_object, pred::gripper_empty},
            {pred::gripper_open, pred::gripper_closed},
            {pred::gripper_closed, pred::gripper_open},
        };
        if (geometric(p)) return;
        if (auto it = kExclusive.find(p); it != kExclusive.end()) facts.erase(it->second);
        facts.insert(p);
    }
};

namespace detail {

inline std::optional<ParamType> value_type(const ParamValue& v) {
    if (std::holds_alternative<double>(v)) return ParamType::number;
    if (std::holds_alternative<std::string>(v)) return ParamType::text;
    if (std::holds_alternative<Pose>(v)) return ParamType::pose;
    return std::nullopt;
}

} // namespace detail

/// Checks a policy against a catalog. Errors make the policy unexecutable;
/// warnings flag suspicious sequencing found by symbolic forward simulation.
inline ValidationReport validate_policy(const Policy& policy, const PrimitiveCatalog& catalog,
                                        const SymbolicState& initial = SymbolicState::empty_gripper()) {
    ValidationReport report;
    auto add = [&](Severity sev, std::optional<std::string> id, std::string code, std::string msg) {
        report.issues.push_back({sev, std::move(id), std::move(code), std::move(msg)});
    };

    const auto steps = flatten(policy);
    if (steps.empty()) add(Severity::warning, std::nullopt, "NoOpPolicy", "policy has no steps");

    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (!position.emplace(steps[i].id, i).second) {
            add(Severity::error, steps[i].id, "DuplicateStepId", "step id '" + steps[i].id + "' is not unique");
        }
    }

    SymbolicState state = initial;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& step = steps[i];
        const auto* spec = catalog.find(step.name);
        if (!spec) {
            add(Severity::error, step.id, "UnknownPrimitive", "primitive '" + step.name + "' is not in the catalog");
            continue;
        }
        if (spec->kind != step.kind) {
            add(Severity::error, step.id, "KindMismatch",
                "'" + step.name + "' is a " + std::string(to_string(spec->kind)) + " primitive");
        }

        for (const auto& ps : spec->params) {
            auto it = step.params.find(ps.name);
            if (it == step.params.end()) {
                if (ps.required) add(Severity::error, step.id, "MissingParam", "missing parameter '" + ps.name + "'");
                continue;
            }
            std::optional<ParamType> actual = detail::value_type(it->second);
            if (const auto* ref = std::get_if<ParamRef>(&it->second)) {
                auto pos = position.find(ref->step_id);
                if (pos == position.end()) {
                    add(Severity::error, step.id, "UnknownReference", "$ref to unknown step '" + ref->step_id + "'");
                    continue;
                }
                if (pos->second >= i) {
                    add(Severity::error, step.id, "ForwardReference",
                        "$ref to step '" + ref->step_id + "' which does not precede '" + step.id + "'");
                    continue;
                }
                const auto* producer = catalog.find(steps[pos->second].name);
                const OutputSpec* out = producer ? producer->output(ref->field) : nullptr;
                if (!out) {
                    add(Severity::error, step.id, "BadReferenceField",
                        "step '" + ref->step_id + "' has no output '" + ref->field + "'");
                    continue;
                }
                actual = out->type;
            }
            if (actual != ps.type) {
                add(Severity::error, step.id, "ParamType",
                    "parameter '" + ps.name + "' must be " + std::string(to_string(ps.type)));
            }
        }
        for (const auto& [key, _] : step.params) {
            if (!spec->param(key)) add(Severity::warning, step.id, "UnknownParam", "unused parameter '" + key + "'");
        }

        for (const auto& pre : spec->preconditions) {
            if (!state.holds(pre)) {
                add(Severity::warning, step.id, "PreconditionChain",
                    "'" + step.name + "' requires " + pre + " which does not hold at this point");
            }
        }
        for (const auto& post : spec->postconditions) state.assert_fact(post);
    }

    report.ok = report.error_count() == 0;
    return report;
}

} // namespace vlp
