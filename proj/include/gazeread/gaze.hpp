#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gazeread/camera.hpp"
#include "gazeread/errors.hpp"
#include "gazeread/rng.hpp"

namespace gazeread {

// ------------------------------------------------------------- eye-ray pairs

struct EyeRayPair {
    double timestamp_s = 0.0;
    Vec3 left_origin{}, right_origin{};
    Vec3 left_dir{}, right_dir{}; // unit vectors
};

// yaw about the vertical (y) axis, pitch up; z is the viewing axis
inline Vec3 direction_from_angles(double yaw_rad, double pitch_rad) {
    double cp = std::cos(pitch_rad);
    return {cp * std::sin(yaw_rad), std::sin(pitch_rad), cp * std::cos(yaw_rad)};
}

inline EyeRayPair eye_rays_from_angles(double t, double ipd_m, double left_yaw, double left_pitch,
                                       double right_yaw, double right_pitch) {
    EyeRayPair p;
    p.timestamp_s = t;
    p.left_origin = {-ipd_m / 2.0, 0.0, 0.0};
    p.right_origin = {ipd_m / 2.0, 0.0, 0.0};
    p.left_dir = direction_from_angles(left_yaw, left_pitch);
    p.right_dir = direction_from_angles(right_yaw, right_pitch);
    return p;
}

struct GazePoint {
    Vec3 point{};
    bool degenerate = false;
};

// Midpoint of the shortest segment between the two eye rays. Near-parallel
// rays (sin of the angle below 1e-6) fall back to a point 1 m out along the
// mean direction and are flagged.
inline GazePoint intersect_rays(const EyeRayPair& rays, double fallback_depth_m = 1.0) {
    const Vec3& d1 = rays.left_dir;
    const Vec3& d2 = rays.right_dir;
    if (norm(cross(d1, d2)) < 1e-6) {
        Vec3 mean_o = 0.5 * (rays.left_origin + rays.right_origin);
        Vec3 mean_d = normalized(d1 + d2);
        return {mean_o + fallback_depth_m * mean_d, true};
    }
    Vec3 w0 = rays.left_origin - rays.right_origin;
    double a = dot(d1, d1), b = dot(d1, d2), c = dot(d2, d2);
    double d = dot(d1, w0), e = dot(d2, w0);
    // round each product separately; contracted FMA would make the result
    // depend on which eye comes first, breaking the swap-symmetry contract
    double denom = rounded(a * c) - rounded(b * b);
    double t1 = (rounded(b * e) - rounded(c * d)) / denom;
    double t2 = (rounded(a * e) - rounded(b * d)) / denom;
    Vec3 p1 = rays.left_origin + t1 * d1;
    Vec3 p2 = rays.right_origin + t2 * d2;
    return {0.5 * (p1 + p2), false};
}

// ------------------------------------------------------------- gaze windows

enum class GazeRepr { point3d, velocity3d, projection2d, velocity2d };

inline int repr_dim(GazeRepr r) {
    return (r == GazeRepr::point3d || r == GazeRepr::velocity3d) ? 3 : 2;
}

inline const char* repr_name(GazeRepr r) {
    switch (r) {
        case GazeRepr::point3d: return "point3d";
        case GazeRepr::velocity3d: return "velocity3d";
        case GazeRepr::projection2d: return "projection2d";
        case GazeRepr::velocity2d: return "velocity2d";
    }
    return "?";
}

inline GazeRepr repr_from_name(const std::string& s) {
    if (s == "point3d") return GazeRepr::point3d;
    if (s == "velocity3d") return GazeRepr::velocity3d;
    if (s == "projection2d") return GazeRepr::projection2d;
    if (s == "velocity2d") return GazeRepr::velocity2d;
    throw DataError("unknown gaze representation: " + s);
}

// Time-ordered block of gaze samples at a declared rate. samples is
// [count x dim] row-major; count must equal round(hz * duration).
struct GazeWindow {
    double hz = 60.0;
    double duration_s = 2.0;
    GazeRepr repr = GazeRepr::point3d;
    std::vector<double> samples;

    int dim() const { return repr_dim(repr); }
    std::int64_t count() const { return static_cast<std::int64_t>(samples.size()) / dim(); }

    double& at(std::int64_t i, int c) { return samples[static_cast<std::size_t>(i * dim() + c)]; }
    double at(std::int64_t i, int c) const { return samples[static_cast<std::size_t>(i * dim() + c)]; }

    void validate() const {
        if (count() != std::llround(hz * duration_s))
            throw DataError("gaze window: sample count " + std::to_string(count()) + " != round(hz*T) = " +
                            std::to_string(std::llround(hz * duration_s)));
        if (static_cast<std::int64_t>(samples.size()) != count() * dim())
            throw DataError("gaze window: sample buffer not a multiple of dim");
    }
};

// Forward differences scaled by the sample rate; the first velocity is
// repeated so the sample count is preserved.
inline GazeWindow differentiate(const GazeWindow& w) {
    if (w.repr == GazeRepr::velocity3d || w.repr == GazeRepr::velocity2d)
        throw ConfigError("differentiate: window is already a velocity representation");
    if (w.count() < 2) throw DataError("differentiate: need at least 2 samples");
    GazeWindow out = w;
    out.repr = (w.repr == GazeRepr::point3d) ? GazeRepr::velocity3d : GazeRepr::velocity2d;
    int d = w.dim();
    std::int64_t n = w.count();
    for (std::int64_t i = 0; i + 1 < n; ++i)
        for (int c = 0; c < d; ++c) out.at(i + 1, c) = (w.at(i + 1, c) - w.at(i, c)) * w.hz;
    for (int c = 0; c < d; ++c) out.at(0, c) = out.at(1, c);
    return out;
}

// Stride decimation keeping the most recent sample of each stride group.
inline GazeWindow resample(const GazeWindow& w, double target_hz) {
    if (target_hz <= 0.0) throw ConfigError("resample: target rate must be positive");
    double ratio = w.hz / target_hz;
    std::int64_t stride = std::llround(ratio);
    if (std::fabs(ratio - static_cast<double>(stride)) > 1e-9 || stride < 1)
        throw ConfigError("resample: target rate must divide the source rate");
    GazeWindow out;
    out.hz = target_hz;
    out.duration_s = w.duration_s;
    out.repr = w.repr;
    int d = w.dim();
    std::int64_t n = w.count();
    out.samples.reserve(static_cast<std::size_t>((n / stride) * d));
    for (std::int64_t i = stride - 1; i < n; i += stride)
        for (int c = 0; c < d; ++c) out.samples.push_back(w.at(i, c));
    return out;
}

// Rotate the (x,y) components about the viewing axis by 90 deg per quarter
// turn; z (when present) is untouched. Exact: only swaps and sign flips.
inline GazeWindow rotate_gaze(const GazeWindow& w, int quarter_turns) {
    int q = ((quarter_turns % 4) + 4) % 4;
    GazeWindow out = w;
    if (q == 0) return out;
    int d = w.dim();
    std::int64_t n = w.count();
    for (std::int64_t i = 0; i < n; ++i) {
        double x = w.at(i, 0), y = w.at(i, 1);
        switch (q) {
            case 1: out.at(i, 0) = -y; out.at(i, 1) = x; break;
            case 2: out.at(i, 0) = -x; out.at(i, 1) = -y; break;
            case 3: out.at(i, 0) = y; out.at(i, 1) = -x; break;
        }
        (void)d;
    }
    return out;
}

// Mirror across the vertical axis: negate x.
inline GazeWindow flip_gaze(const GazeWindow& w) {
    GazeWindow out = w;
    std::int64_t n = w.count();
    for (std::int64_t i = 0; i < n; ++i) out.at(i, 0) = -w.at(i, 0);
    return out;
}

// i.i.d. zero-mean Gaussian per coordinate; sigma == 0 is the identity.
inline GazeWindow add_gaze_noise(const GazeWindow& w, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw ConfigError("add_gaze_noise: sigma must be >= 0");
    if (sigma == 0.0) return w;
    GazeWindow out = w;
    CounterRng rng = make_rng(seed, RngStream::gaze_noise);
    for (auto& v : out.samples) v += rng.normal(0.0, sigma);
    return out;
}

// Per-sample Euclidean speed (or position magnitude). Squares are rounded
// individually so rotations and flips preserve the value bit-exactly.
inline double sample_speed(const GazeWindow& w, std::int64_t i) {
    double acc = 0.0;
    for (int c = 0; c < w.dim(); ++c) acc += rounded(w.at(i, c) * w.at(i, c));
    return std::sqrt(acc);
}

// Horizontal angular extent subtended by the window's min/max pixel x.
inline double gaze_span_deg(const GazeWindow& w, const CameraModel& cam) {
    if (w.repr != GazeRepr::projection2d) throw ConfigError("gaze_span: want a projection2d window");
    if (w.count() == 0) throw DataError("gaze_span: empty window");
    double lo = w.at(0, 0), hi = w.at(0, 0);
    for (std::int64_t i = 1; i < w.count(); ++i) {
        lo = std::min(lo, w.at(i, 0));
        hi = std::max(hi, w.at(i, 0));
    }
    double f = cam.focal_px();
    double cx = cam.width / 2.0;
    return rad_to_deg(std::atan((hi - cx) / f) - std::atan((lo - cx) / f));
}

// Project a 3D gaze window onto the image plane.
inline GazeWindow project_window(const GazeWindow& w, const CameraModel& cam) {
    if (w.repr != GazeRepr::point3d) throw ConfigError("project_window: want a point3d window");
    GazeWindow out;
    out.hz = w.hz;
    out.duration_s = w.duration_s;
    out.repr = GazeRepr::projection2d;
    out.samples.reserve(static_cast<std::size_t>(w.count()) * 2);
    for (std::int64_t i = 0; i < w.count(); ++i) {
        Vec2 px = project_to_image({w.at(i, 0), w.at(i, 1), w.at(i, 2)}, cam);
        out.samples.push_back(px[0]);
        out.samples.push_back(px[1]);
    }
    return out;
}

} // namespace gazeread
