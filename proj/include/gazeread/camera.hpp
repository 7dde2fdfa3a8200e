#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "gazeread/errors.hpp"

namespace gazeread {

using Vec3 = std::array<double, 3>;
using Vec2 = std::array<double, 2>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

// Rounding barrier: forces one IEEE rounding at this point. FMA contraction
// would otherwise make products round differently depending on operand order,
// breaking exact-symmetry contracts (cross(a,b) == -cross(b,a), eye-swap
// invariance of ray intersection).
inline double rounded(double x) {
    volatile double v = x;
    return v;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    double xy = rounded(a[1] * b[2]), yx = rounded(a[2] * b[1]);
    double zy = rounded(a[2] * b[0]), yz = rounded(a[0] * b[2]);
    double xz = rounded(a[0] * b[1]), zx = rounded(a[1] * b[0]);
    return {xy - yx, zy - yz, xz - zx};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double c, const Vec3& a) { return {c * a[0], c * a[1], c * a[2]}; }
inline Vec3 normalized(const Vec3& a) {
    double n = norm(a);
    return {a[0] / n, a[1] / n, a[2] / n};
}

inline double deg_to_rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / std::numbers::pi; }

// Pinhole camera; device frame is x right, y up, z forward (viewing axis),
// principal point at the image center.
struct CameraModel {
    int width = 1408;
    int height = 1408;
    double fov_deg = 110.0;

    CameraModel() = default;
    CameraModel(int w, int h, double fov) : width(w), height(h), fov_deg(fov) {
        if (fov_deg <= 0.0 || fov_deg >= 180.0) throw ConfigError("camera FoV must be in (0,180) degrees");
    }

    double focal_px() const { return (width / 2.0) / std::tan(deg_to_rad(fov_deg) / 2.0); }
};

// point (depth > 0) -> continuous pixel coordinates
inline Vec2 project_to_image(const Vec3& p, const CameraModel& cam) {
    if (p[2] <= 0.0) throw DataError("project_to_image: point at or behind the camera plane");
    double f = cam.focal_px();
    return {cam.width / 2.0 + f * p[0] / p[2], cam.height / 2.0 + f * p[1] / p[2]};
}

// pixel + depth -> 3D point on that viewing ray
inline Vec3 unproject(const Vec2& px, double depth, const CameraModel& cam) {
    if (depth <= 0.0) throw DataError("unproject: depth must be positive");
    double f = cam.focal_px();
    return {(px[0] - cam.width / 2.0) / f * depth, (px[1] - cam.height / 2.0) / f * depth, depth};
}

// Foveated crop side length in pixels for the given field of view:
// 2*round(fov/cam_fov * width / 2), i.e. nearest even integer.
inline int crop_geometry(double fov_deg, const CameraModel& cam) {
    if (fov_deg <= 0.0 || fov_deg > cam.fov_deg) throw ConfigError("crop fov must be in (0, camera fov]");
    double half = fov_deg / cam.fov_deg * cam.width / 2.0;
    return 2 * static_cast<int>(std::lround(half));
}

} // namespace gazeread
