#pragma once

#include <chrono>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlp/policy.hpp"
#include "vlp/world_state.hpp"

namespace vlp {

/// Camera frame forwarded verbatim to a remote model.
struct ImagePayload {
    std::string mime_type = "image/png";
    std::string base64;

    bool operator==(const ImagePayload&) const = default;
};

/// The five planner inputs: instruction, observation, robot state, rendered
/// behavior library, and task-memory digest.
struct PlannerRequest {
    std::string instruction;
    std::variant<Observation, ImagePayload> observation;
    RobotState robot_state;
    std::string catalog_text;
    std::string memory_digest;
};

struct PlannerResponse {
    std::optional<Policy> policy; // empty when no policy could be extracted
    std::string raw_output;
    std::chrono::nanoseconds latency{0};
    std::string backend;
};

/// A policy generator. Implementations hold no per-call state and may be
/// called concurrently.
class Planner {
public:
    virtual ~Planner() = default;
    virtual PlannerResponse plan(const PlannerRequest& request) = 0;
    virtual std::string backend() const = 0;
};

// --- prompt assembly --------------------------------------------------------

enum class PromptMode { policy, grounding };

struct ChatMessage {
    std::string role;
    nlohmann::json content; // string, or an array of typed parts

    bool operator==(const ChatMessage&) const = default;
};

/// Target and upcoming action for a grounding query.
struct GroundingQuery {
    std::string target_object;
    std::string next_action;
};

inline constexpr std::string_view kPerceptorRole = "You are a robotic perceptor.";

inline constexpr std::string_view kPolicySchemaText =
    R"({ "task_summary": string,
  "phases": [ { "name": string,
                "steps": [ { "id": string,
                             "kind": "action"|"perception",
                             "name": string,
                             "params": { string: number|string|[x,y,z,roll,pitch,yaw]|{"$ref": "<step_id>.<field>"} },
                             "on_fail": "abort"|"replan" } ] } ],
  "version": "vlp-policy/1" })";

namespace detail {

inline std::string scene_text(const PlannerRequest& r) {
    if (const auto* obs = std::get_if<Observation>(&r.observation)) return render_observation(*obs);
    return "(camera image attached)\n";
}

inline nlohmann::json user_content(const std::string& text, const PlannerRequest& r) {
    nlohmann::json parts = nlohmann::json::array();
    parts.push_back({{"type", "text"}, {"text", text}});
    if (const auto* img = std::get_if<ImagePayload>(&r.observation)) {
        parts.push_back({{"type", "image_url"},
                         {"image_url", {{"url", "data:" + img->mime_type + ";base64," + img->base64}}}});
    }
    return parts;
}

} // namespace detail

inline std::vector<ChatMessage> assemble_prompt(const PlannerRequest& request, PromptMode mode,
                                                const GroundingQuery& grounding = {}) {
    std::vector<ChatMessage> messages;
    if (mode == PromptMode::grounding) {
        std::ostringstream sys;
        sys << kPerceptorRole << '\n'
            << "Find the target object named in the task instruction within the scene. "
               "For the next action of the running policy, return the point on that object "
               "where the robot should act.\n"
            << "Answer with one JSON object: {\"object\": string, \"point\": [x, y, z, roll, pitch, yaw]} "
               "in meters and radians, world frame.";
        messages.push_back({"system", sys.str()});

        std::ostringstream user;
        user << "Scene:\n" << detail::scene_text(request) << '\n'
             << "Instruction: " << request.instruction << '\n'
             << "Target object: " << grounding.target_object << '\n'
             << "Next action: " << grounding.next_action << '\n'
             << "Manipulation point:";
        messages.push_back({"user", detail::user_content(user.str(), request)});
        return messages;
    }

    std::ostringstream sys;
    sys << "You plan robot tasks as hierarchical policies over behavior primitives.\n"
        << "Reply with exactly one JSON object in this schema:\n"
        << kPolicySchemaText << '\n'
        << "Steps run top-down in order. A parameter may use the output of an earlier step "
           "via {\"$ref\": \"<step_id>.<field>\"}. Poses are [x, y, z, roll, pitch, yaw] in meters and "
           "radians, world frame.\n\n"
        << request.catalog_text;
    if (!request.catalog_text.empty() && request.catalog_text.back() != '\n') sys << '\n';
    sys << "\nTask memory:\n" << (request.memory_digest.empty() ? std::string("none") : request.memory_digest);
    messages.push_back({"system", sys.str()});

    std::ostringstream user;
    user << "Instruction: " << request.instruction << "\n\n"
         << "Observation:\n" << detail::scene_text(request) << '\n'
         << "Robot state:\n" << render_robot_state(request.robot_state);
    messages.push_back({"user", detail::user_content(user.str(), request)});
    return messages;
}

// --- policy extraction -------------------------------------------------------

namespace detail {

/// Text between the first pair of ``` fences, minus the info string; nullopt
/// when there is no complete fence pair.
inline std::optional<std::string> fenced_block(const std::string& raw) {
    auto open = raw.find("```");
    if (open == std::string::npos) return std::nullopt;
    auto body = raw.find('\n', open + 3);
    if (body == std::string::npos) return std::nullopt;
    auto close = raw.find("```", body + 1);
    if (close == std::string::npos) return std::nullopt;
    return raw.substr(body + 1, close - body - 1);
}

/// First balanced {...} span, honoring JSON string literals.
inline std::optional<std::string> first_balanced_object(const std::string& text) {
    auto start = text.find('{');
    if (start == std::string::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return text.substr(start, i - start + 1);
        }
    }
    return std::nullopt;
}

} // namespace detail

inline std::optional<Policy> extract_policy(const std::string& raw) {
    std::optional<std::string> candidate;
    if (auto block = detail::fenced_block(raw)) candidate = detail::first_balanced_object(*block);
    if (!candidate) candidate = detail::first_balanced_object(raw);
    if (!candidate) return std::nullopt;
    try {
        return parse_policy(*candidate);
    } catch (const SchemaError&) {
        return std::nullopt;
    }
}

} // namespace vlp
