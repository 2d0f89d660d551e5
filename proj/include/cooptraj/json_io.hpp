// JSON interchange for trajectories and small value types. Field order is
// fixed (ordered_json) so serialized documents are byte-stable.

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cooptraj/trajectory.hpp"

namespace cooptraj {

using Json = nlohmann::ordered_json;

/// Thrown when a document does not match the expected schema.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Json to_json(Vec2 v) { return Json::array({v.x, v.y}); }

inline Vec2 vec2_from_json(const Json& j, const char* field = "vec2") {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw SchemaError(std::string(field) + ": expected [x, y]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

inline Json to_json(const Trajectory& t) {
    Json samples = Json::array();
    for (const auto& s : t.samples()) {
        Json js;
        js["p"] = to_json(s.p);
        js["v"] = to_json(s.v);
        samples.push_back(std::move(js));
    }
    Json j;
    j["dt"] = t.dt();
    j["samples"] = std::move(samples);
    return j;
}

inline Trajectory trajectory_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("dt") || !j.contains("samples") || !j["samples"].is_array()) {
        throw SchemaError("trajectory: expected {dt, samples}");
    }
    std::vector<State> samples;
    samples.reserve(j["samples"].size());
    for (const auto& s : j["samples"]) {
        if (!s.is_object() || !s.contains("p") || !s.contains("v")) throw SchemaError("trajectory: sample needs p and v");
        samples.push_back({vec2_from_json(s["p"], "p"), vec2_from_json(s["v"], "v")});
    }
    return Trajectory(j["dt"].get<double>(), std::move(samples));
}

inline Json to_json(const BoundaryState& b) {
    Json j;
    j["p"] = to_json(b.p);
    j["v"] = to_json(b.v);
    j["a"] = to_json(b.a);
    return j;
}

inline BoundaryState boundary_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("p")) throw SchemaError("start: expected {p, v?, a?}");
    BoundaryState b;
    b.p = vec2_from_json(j["p"], "p");
    if (j.contains("v")) b.v = vec2_from_json(j["v"], "v");
    if (j.contains("a")) b.a = vec2_from_json(j["a"], "a");
    return b;
}

/// Compact single-line serialization.
inline std::string dump(const Json& j) { return j.dump(); }

/// Required field lookup with a schema error instead of a bare json exception.
template <typename T>
T require(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("field '") + key + "': " + e.what());
    }
}

template <typename T>
T optional_field(const Json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("field '") + key + "': " + e.what());
    }
}

}  // namespace cooptraj
