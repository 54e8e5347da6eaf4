#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlp/errors.hpp"
#include "vlp/pose.hpp"

namespace vlp {

inline constexpr std::string_view kPolicyVersion = "vlp-policy/1";

enum class StepKind { action, perception };
enum class OnFail { abort, replan };

inline std::string_view to_string(StepKind k) { return k == StepKind::action ? "action" : "perception"; }
inline std::string_view to_string(OnFail f) { return f == OnFail::abort ? "abort" : "replan"; }

/// Backward reference to an output field of an earlier step: `{"$ref": "s2.pose"}`.
struct ParamRef {
    std::string step_id;
    std::string field;

    bool operator==(const ParamRef&) const = default;
    std::string str() const { return step_id + "." + field; }
};

using ParamValue = std::variant<double, std::string, Pose, ParamRef>;
using Params = std::map<std::string, ParamValue, std::less<>>;

struct BehaviorStep {
    std::string id;
    StepKind kind = StepKind::action;
    std::string name;
    Params params;
    OnFail on_fail = OnFail::replan;

    bool operator==(const BehaviorStep&) const = default;
};

struct Phase {
    std::string name;
    std::vector<BehaviorStep> steps;

    bool operator==(const Phase&) const = default;
};

/// Hierarchical policy: named phases over strictly sequential steps.
struct Policy {
    std::string task_summary;
    std::vector<Phase> phases;
    std::string version{kPolicyVersion};

    bool operator==(const Policy&) const = default;
};

/// Depth-first step order, i.e. execution order.
inline std::vector<BehaviorStep> flatten(const Policy& p) {
    std::vector<BehaviorStep> out;
    for (const auto& ph : p.phases) out.insert(out.end(), ph.steps.begin(), ph.steps.end());
    return out;
}

inline std::size_t step_count(const Policy& p) {
    std::size_t n = 0;
    for (const auto& ph : p.phases) n += ph.steps.size();
    return n;
}

// --- JSON conversion -------------------------------------------------------

namespace detail {

inline ParamRef parse_ref_string(const std::string& s) {
    auto dot = s.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == s.size()) {
        throw SchemaError("malformed $ref '" + s + "', expected <step_id>.<field>", "BadReference");
    }
    return ParamRef{s.substr(0, dot), s.substr(dot + 1)};
}

inline ParamValue param_from_json(const std::string& key, const nlohmann::json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        if (v.size() != 6) throw SchemaError("param '" + key + "': pose must have 6 numbers", "WrongType");
        std::array<double, 6> a{};
        for (std::size_t i = 0; i < 6; ++i) {
            if (!v[i].is_number()) throw SchemaError("param '" + key + "': pose entries must be numbers", "WrongType");
            a[i] = v[i].get<double>();
        }
        return Pose::from_array(a);
    }
    if (v.is_object()) {
        if (v.size() != 1 || !v.contains("$ref") || !v["$ref"].is_string()) {
            throw SchemaError("param '" + key + "': object values must be {\"$ref\": string}", "WrongType");
        }
        return parse_ref_string(v["$ref"].get<std::string>());
    }
    throw SchemaError("param '" + key + "': unsupported value type", "WrongType");
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(where + ": missing required field '" + key + "'", "MissingField");
    return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key, const std::string& where) {
    const auto& v = require(obj, key, where);
    if (!v.is_string()) throw SchemaError(where + ": field '" + key + "' must be a string", "WrongType");
    return v.get<std::string>();
}

} // namespace detail

inline nlohmann::json param_to_json(const ParamValue& v) {
    return std::visit(
        [](const auto& x) -> nlohmann::json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, double>) {
                return x;
            } else if constexpr (std::is_same_v<T, std::string>) {
                return x;
            } else if constexpr (std::is_same_v<T, Pose>) {
                auto a = x.to_array();
                return nlohmann::json(std::vector<double>(a.begin(), a.end()));
            } else {
                return nlohmann::json{{"$ref", x.str()}};
            }
        },
        v);
}

inline nlohmann::json step_to_json(const BehaviorStep& s) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [k, v] : s.params) params[k] = param_to_json(v);
    return {{"id", s.id},
            {"kind", std::string(to_string(s.kind))},
            {"name", s.name},
            {"params", std::move(params)},
            {"on_fail", std::string(to_string(s.on_fail))}};
}

inline nlohmann::json policy_to_json(const Policy& p) {
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& ph : p.phases) {
        nlohmann::json steps = nlohmann::json::array();
        for (const auto& s : ph.steps) steps.push_back(step_to_json(s));
        phases.push_back({{"name", ph.name}, {"steps", std::move(steps)}});
    }
    return {{"task_summary", p.task_summary}, {"phases", std::move(phases)}, {"version", p.version}};
}

/// Builds a Policy from an already-parsed JSON tree. Unknown top-level keys
/// are reported through `warnings` and otherwise ignored.
inline Policy policy_from_json(const nlohmann::json& doc, std::vector<std::string>* warnings = nullptr) {
    using detail::require;
    using detail::require_string;
    if (!doc.is_object()) throw SchemaError("policy document must be a JSON object", "WrongType");

    Policy p;
    p.task_summary = require_string(doc, "task_summary", "policy");
    if (auto it = doc.find("version"); it != doc.end()) {
        if (!it->is_string()) throw SchemaError("policy: field 'version' must be a string", "WrongType");
        if (it->get<std::string>() != kPolicyVersion) {
            throw SchemaError("unsupported policy version '" + it->get<std::string>() + "'", "UnsupportedVersion");
        }
    } else if (warnings) {
        warnings->push_back("missing 'version', assuming " + std::string(kPolicyVersion));
    }
    if (warnings) {
        for (const auto& [key, _] : doc.items()) {
            if (key != "task_summary" && key != "phases" && key != "version") {
                warnings->push_back("ignored unknown top-level key '" + key + "'");
            }
        }
    }

    const auto& phases = require(doc, "phases", "policy");
    if (!phases.is_array()) throw SchemaError("policy: 'phases' must be an array", "WrongType");

    std::set<std::string> ids;
    for (std::size_t pi = 0; pi < phases.size(); ++pi) {
        const auto& ph = phases[pi];
        const std::string where = "phase[" + std::to_string(pi) + "]";
        if (!ph.is_object()) throw SchemaError(where + " must be an object", "WrongType");
        Phase phase;
        phase.name = require_string(ph, "name", where);
        const auto& steps = require(ph, "steps", where);
        if (!steps.is_array()) throw SchemaError(where + ": 'steps' must be an array", "WrongType");
        for (std::size_t si = 0; si < steps.size(); ++si) {
            const auto& st = steps[si];
            const std::string swhere = where + ".steps[" + std::to_string(si) + "]";
            if (!st.is_object()) throw SchemaError(swhere + " must be an object", "WrongType");
            BehaviorStep step;
            step.id = require_string(st, "id", swhere);
            if (step.id.empty()) throw SchemaError(swhere + ": empty step id", "WrongType");
            if (!ids.insert(step.id).second) {
                throw SchemaError("duplicate step id '" + step.id + "'", "DuplicateStepId");
            }
            const auto kind = require_string(st, "kind", swhere);
            if (kind == "action") {
                step.kind = StepKind::action;
            } else if (kind == "perception") {
                step.kind = StepKind::perception;
            } else {
                throw SchemaError(swhere + ": kind must be action|perception", "WrongType");
            }
            step.name = require_string(st, "name", swhere);
            if (auto it = st.find("params"); it != st.end()) {
                if (!it->is_object()) throw SchemaError(swhere + ": 'params' must be an object", "WrongType");
                for (const auto& [k, v] : it->items()) step.params.emplace(k, detail::param_from_json(k, v));
            }
            if (auto it = st.find("on_fail"); it != st.end()) {
                if (*it == "abort") {
                    step.on_fail = OnFail::abort;
                } else if (*it == "replan") {
                    step.on_fail = OnFail::replan;
                } else {
                    throw SchemaError(swhere + ": on_fail must be abort|replan", "WrongType");
                }
            }
            phase.steps.push_back(std::move(step));
        }
        p.phases.push_back(std::move(phase));
    }
    return p;
}

inline Policy parse_policy(std::string_view text, std::vector<std::string>* warnings = nullptr) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("malformed JSON: ") + e.what(), "MalformedJson");
    }
    return policy_from_json(doc, warnings);
}

/// Canonical form: keys sorted, no whitespace, on_fail always explicit.
inline std::string serialize_policy(const Policy& p) { return policy_to_json(p).dump(); }

inline std::string fnv1a64_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
        h >>= 4;
    }
    return out;
}

inline std::string policy_digest(const Policy& p) { return fnv1a64_hex(serialize_policy(p)); }

} // namespace vlp
