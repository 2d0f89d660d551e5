// Safety envelope geometry: a horizontal corridor band plus disc obstacles.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "cooptraj/trajectory.hpp"

namespace cooptraj {

/// Band |y − center_y| ≤ width / 2.
struct Corridor {
    double center_y{0};
    double width{1};

    friend bool operator==(const Corridor&, const Corridor&) = default;
};

struct Disc {
    Vec2 center;
    double radius{0};

    friend bool operator==(const Disc&, const Disc&) = default;
};

struct SafetyEnvelope {
    std::optional<Corridor> corridor;
    std::vector<Disc> obstacles;

    void validate() const {
        if (corridor && !(corridor->width > 0.0)) throw InvalidArgument("envelope: corridor width must be positive");
        for (const auto& d : obstacles) {
            if (!(d.radius > 0.0)) throw InvalidArgument("envelope: obstacle radius must be positive");
        }
    }

    /// Signed clearance of one point: negative inside an obstacle or outside the band.
    [[nodiscard]] double clearance(Vec2 p) const noexcept {
        double c = std::numeric_limits<double>::infinity();
        if (corridor) c = std::min(c, 0.5 * corridor->width - std::abs(p.y - corridor->center_y));
        for (const auto& d : obstacles) c = std::min(c, (p - d.center).norm() - d.radius);
        return c;
    }

    friend bool operator==(const SafetyEnvelope&, const SafetyEnvelope&) = default;
};

struct SafetyReport {
    bool safe;
    double min_clearance;  // +inf for an empty envelope
};

[[nodiscard]] inline SafetyReport check_safety(const Trajectory& t, const SafetyEnvelope& envelope) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& s : t.samples()) worst = std::min(worst, envelope.clearance(s.p));
    return {worst >= 0.0, worst};
}

/// Moves a point onto the envelope: out of every disc along the radial
/// direction, then into the corridor band.
[[nodiscard]] inline Vec2 project_to_envelope(Vec2 p, const SafetyEnvelope& envelope) noexcept {
    for (const auto& d : envelope.obstacles) {
        const Vec2 off = p - d.center;
        const double r = off.norm();
        if (r < d.radius) {
            const Vec2 dir = r > 0.0 ? off / r : Vec2{0.0, 1.0};
            p = d.center + d.radius * dir;
        }
    }
    if (envelope.corridor) {
        const double half = 0.5 * envelope.corridor->width;
        p.y = std::clamp(p.y, envelope.corridor->center_y - half, envelope.corridor->center_y + half);
    }
    return p;
}

}  // namespace cooptraj
