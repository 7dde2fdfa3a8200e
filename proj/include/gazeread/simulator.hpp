#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gazeread/camera.hpp"
#include "gazeread/errors.hpp"
#include "gazeread/gaze.hpp"
#include "gazeread/jsonl.hpp"
#include "gazeread/rng.hpp"
#include "gazeread/scenario.hpp"

namespace gazeread {

// All behavioral knobs in one record. Values are oculomotor ballpark
// (fixations ~200 ms, reading saccades ~2 deg); the simulator exists to
// exercise the pipeline at desk scale, not to claim physiological fidelity.
struct SimParams {
    double ipd_m = 0.063;

    // text plane geometry per medium: viewing depth, forward saccade
    // amplitude, line span (width), line pitch (all angular, degrees)
    double depth_m[4] = {0.0, 0.35, 0.55, 0.90};      // indexed by Medium
    double saccade_deg[4] = {0.0, 1.7, 2.3, 3.0};
    double line_span_deg[4] = {0.0, 15.0, 10.0, 6.0};
    double line_pitch_deg[4] = {0.0, 1.9, 2.6, 3.4};
    int page_lines = 7;

    double fixation_tremor_sigma_m = 6e-4; // on-plane jitter during fixations
    double saccade_s = 0.035;
    double return_sweep_s = 0.06;

    // fixation duration ranges (ms)
    double fix_engaged_ms[2] = {190.0, 260.0};
    double fix_out_loud_ms[2] = {290.0, 380.0};  // saccade rate ~30% lower
    double fix_skim_ms[2] = {160.0, 215.0};
    double fix_scan_ms[2] = {150.0, 420.0};
    double write_dwell_ms[2] = {650.0, 950.0};

    double skim_amp_factor = 2.1;
    double skim_skip_prob = 0.45;
    double scan_back_prob = 0.25;
    double scan_vjump_prob = 0.20;

    double walk_bob_hz = 2.0;
    double walk_bob_gaze_deg = 0.12; // residual gaze oscillation while walking

    // negatives
    double daily_box_deg = 18.0;
    double pursuit_radius_deg[2] = {5.0, 10.0};
    double pursuit_omega[2] = {0.25, 0.7};
    double cluster_radius_deg = 1.3;

    // IMU
    double accel_noise_stationary = 0.035;
    double gyro_noise_stationary = 0.010;
    double accel_noise_walking = 0.10;
    double gyro_noise_walking = 0.040;
    double walk_accel_amp = 1.3;   // vertical, at walk_bob_hz
    double walk_accel_amp2 = 0.3;  // first harmonic
    double turn_pulse_amp[2] = {0.8, 1.8};
    double turn_pulse_sigma_s = 0.12;

    // RGB patch texture
    int line_pitch_px[4] = {0, 10, 16, 24}; // by Medium
    double patch_noise_sigma = 9.0;
};

namespace sim_detail {

inline void require_positive_duration(double duration_s) {
    if (duration_s <= 0.0) throw ConfigError("simulator: duration must be > 0");
}

inline double tan_deg(double deg) { return std::tan(deg_to_rad(deg)); }

// how the head moves during a clip
enum class MotionProfile { stationary, walking, head_turns };

inline MotionProfile motion_profile(const ScenarioSpec& spec, CounterRng& rng) {
    if (spec.label == Label::reading)
        return spec.mode == Mode::walk_read ? MotionProfile::walking : MotionProfile::stationary;
    if (spec.activity == Activity::hard_negative) return MotionProfile::stationary;
    double u = rng.next_double();
    if (u < 0.30) return MotionProfile::stationary;
    if (u < 0.65) return MotionProfile::walking;
    return MotionProfile::head_turns;
}

// shared low-level writer: appends a fixation (hold + tremor) and advances i
inline void emit_hold(std::vector<double>& xy, std::int64_t& i, std::int64_t n, std::int64_t len, double x,
                      double y, double tremor, CounterRng& rng) {
    for (std::int64_t k = 0; k < len && i < n; ++k, ++i) {
        xy.push_back(x + rng.normal(0.0, tremor));
        xy.push_back(y + rng.normal(0.0, tremor));
    }
}

// appends a linear transition from (x0,y0) to (x1,y1) over len samples
inline void emit_saccade(std::vector<double>& xy, std::int64_t& i, std::int64_t n, std::int64_t len, double x0,
                         double y0, double x1, double y1) {
    for (std::int64_t k = 0; k < len && i < n; ++k, ++i) {
        double a = static_cast<double>(k + 1) / static_cast<double>(len);
        xy.push_back(x0 + a * (x1 - x0));
        xy.push_back(y0 + a * (y1 - y0));
    }
}

} // namespace sim_detail

// Left-to-right fixation/saccade staircase with return sweeps; the declared
// direction is applied afterwards as an exact flip/rotation so e.g.
// gen(rtl, seed) == flip_gaze(gen(ltr, seed)) holds by construction.
inline GazeWindow gen_reading_scanpath(const ScenarioSpec& spec, double hz, double duration_s,
                                       const SimParams& P = {}) {
    using namespace sim_detail;
    require_positive_duration(duration_s);
    spec.validate();
    if (spec.label != Label::reading) throw ConfigError("gen_reading_scanpath: spec must be a reading scenario");

    CounterRng rng = make_rng(spec.seed, RngStream::sim_clip);
    const int med = static_cast<int>(spec.medium);
    const double depth = P.depth_m[med];
    const double amp0 = tan_deg(P.saccade_deg[med]) * depth;
    const double half_span = tan_deg(P.line_span_deg[med]) * depth / 2.0;
    const double pitch = tan_deg(P.line_pitch_deg[med]) * depth;
    const double tremor = P.fixation_tremor_sigma_m;

    const double* fix_ms = P.fix_engaged_ms;
    double amp_factor = 1.0;
    switch (spec.mode) {
        case Mode::out_loud: fix_ms = P.fix_out_loud_ms; break;
        case Mode::skim: fix_ms = P.fix_skim_ms; amp_factor = P.skim_amp_factor; break;
        case Mode::scan: fix_ms = P.fix_scan_ms; break;
        default: break;
    }

    const std::int64_t n = std::llround(hz * duration_s);
    const std::int64_t sac_len = std::max<std::int64_t>(1, std::llround(P.saccade_s * hz));
    const std::int64_t sweep_len = std::max<std::int64_t>(1, std::llround(P.return_sweep_s * hz));
    const double y_top = 0.5 * P.page_lines * pitch;

    std::vector<double> xy;
    xy.reserve(static_cast<std::size_t>(2 * n));
    double x = -half_span + rng.uniform(0.0, 0.3) * half_span;
    double y = y_top - rng.uniform(0.0, 2.0) * pitch;
    std::int64_t i = 0;
    int burst_left = 0; // write_read: fixations until the next writing dwell
    if (spec.mode == Mode::write_read) burst_left = 2 + static_cast<int>(rng.next_below(3));

    while (i < n) {
        std::int64_t fix_len = std::max<std::int64_t>(1, std::llround(rng.uniform(fix_ms[0], fix_ms[1]) / 1e3 * hz));
        emit_hold(xy, i, n, fix_len, x, y, tremor, rng);
        if (i >= n) break;

        if (spec.mode == Mode::write_read && --burst_left <= 0) {
            // glance down to the writing point, dwell, come back
            double wx = x + rng.uniform(-0.5, 0.5) * amp0;
            double wy = y - 1.6 * pitch;
            emit_saccade(xy, i, n, sac_len, x, y, wx, wy);
            std::int64_t dwell = std::llround(rng.uniform(P.write_dwell_ms[0], P.write_dwell_ms[1]) / 1e3 * hz);
            emit_hold(xy, i, n, dwell, wx, wy, tremor, rng);
            emit_saccade(xy, i, n, sac_len, wx, wy, x, y);
            burst_left = 2 + static_cast<int>(rng.next_below(3));
            continue;
        }

        double amp = amp0 * amp_factor * rng.uniform(0.8, 1.2);
        double nx = x + amp, ny = y;
        if (spec.mode == Mode::scan) {
            double u = rng.next_double();
            if (u < P.scan_back_prob) {
                nx = x - amp * rng.uniform(0.8, 1.6);
            } else if (u < P.scan_back_prob + P.scan_vjump_prob) {
                nx = rng.uniform(-half_span, half_span);
                ny = y - pitch * (rng.next_double() < 0.5 ? 1.0 : -1.0) * (1.0 + rng.next_below(2));
            } else {
                nx = x + amp * rng.uniform(0.6, 2.6);
            }
        }

        if (nx > half_span) {
            // return sweep to the next line
            double lines = 1.0;
            if (spec.mode == Mode::skim && rng.next_double() < P.skim_skip_prob) lines = 2.0;
            nx = -half_span + rng.uniform(0.0, 0.15) * half_span;
            ny = y - lines * pitch;
            if (ny < -y_top) ny = y_top - rng.uniform(0.0, 1.0) * pitch; // next page
            emit_saccade(xy, i, n, sweep_len, x, y, nx, ny);
        } else {
            if (ny > y_top) ny = y_top;
            if (ny < -y_top) ny = -y_top;
            nx = std::clamp(nx, -half_span - amp0, half_span + amp0);
            emit_saccade(xy, i, n, sac_len, x, y, nx, ny);
        }
        x = nx;
        y = ny;
    }

    // residual 2 Hz bob while walking (imperfect vestibulo-ocular cancel)
    if (spec.mode == Mode::walk_read) {
        double bob = tan_deg(P.walk_bob_gaze_deg) * depth;
        double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::int64_t k = 0; k < n; ++k)
            xy[static_cast<std::size_t>(2 * k + 1)] +=
                bob * std::sin(2.0 * std::numbers::pi * P.walk_bob_hz * (k / hz) + phase);
    }

    GazeWindow w;
    w.hz = hz;
    w.duration_s = duration_s;
    w.repr = GazeRepr::point3d;
    w.samples.reserve(static_cast<std::size_t>(3 * n));
    for (std::int64_t k = 0; k < n; ++k) {
        w.samples.push_back(xy[static_cast<std::size_t>(2 * k)]);
        w.samples.push_back(xy[static_cast<std::size_t>(2 * k + 1)]);
        w.samples.push_back(depth);
    }

    if (spec.direction == Direction::rtl) return flip_gaze(w);
    if (spec.direction == Direction::vertical) return rotate_gaze(w, 1);
    return w;
}

// Which texture a not_reading clip uses: 0 wide random saccades, 1 smooth
// pursuit, 2 long single fixation, 3 fixation cluster (hard negatives).
inline int nonreading_kind(const ScenarioSpec& spec) {
    if (spec.activity == Activity::hard_negative) return 3;
    CounterRng rng = make_rng(spec.seed, RngStream::sim_clip, 23);
    return static_cast<int>(rng.next_below(3));
}

// Everyday activity / hard-negative scanpaths: wide saccades, smooth
// pursuit, a long fixation, or (hard negatives) a fixation cluster on a
// static region with no reading staircase.
inline GazeWindow gen_nonreading_scanpath(const ScenarioSpec& spec, double hz, double duration_s,
                                          const SimParams& P = {}) {
    using namespace sim_detail;
    require_positive_duration(duration_s);
    spec.validate();
    if (spec.label != Label::not_reading)
        throw ConfigError("gen_nonreading_scanpath: spec must be a not_reading scenario");

    CounterRng rng = make_rng(spec.seed, RngStream::sim_clip);
    const std::int64_t n = std::llround(hz * duration_s);
    const std::int64_t sac_len = std::max<std::int64_t>(1, std::llround(P.saccade_s * hz));
    const double tremor = P.fixation_tremor_sigma_m;

    const int kind = nonreading_kind(spec);
    const double depth = spec.activity == Activity::hard_negative ? rng.uniform(0.4, 0.8) : rng.uniform(0.9, 2.5);

    std::vector<double> xy;
    xy.reserve(static_cast<std::size_t>(2 * n));
    std::int64_t i = 0;

    if (kind == 0) {
        // wide random saccades
        double box = tan_deg(P.daily_box_deg) * depth;
        double x = rng.uniform(-box, box), y = rng.uniform(-box, box);
        while (i < n) {
            std::int64_t fix_len = std::llround(rng.uniform(220.0, 550.0) / 1e3 * hz);
            emit_hold(xy, i, n, fix_len, x, y, tremor, rng);
            if (i >= n) break;
            double nx = rng.uniform(-box, box), ny = rng.uniform(-box, box);
            emit_saccade(xy, i, n, sac_len, x, y, nx, ny);
            x = nx;
            y = ny;
        }
    } else if (kind == 1) {
        // smooth pursuit arc
        double r = tan_deg(rng.uniform(P.pursuit_radius_deg[0], P.pursuit_radius_deg[1])) * depth;
        double omega = rng.uniform(P.pursuit_omega[0], P.pursuit_omega[1]) * (rng.next_double() < 0.5 ? -1.0 : 1.0);
        double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (; i < n; ++i) {
            double t = static_cast<double>(i) / hz;
            xy.push_back(r * std::cos(omega * t + phase) + rng.normal(0.0, tremor * 0.5));
            xy.push_back(r * std::sin(omega * t + phase) + rng.normal(0.0, tremor * 0.5));
        }
    } else if (kind == 2) {
        // one long fixation
        double x = rng.uniform(-0.05, 0.05) * depth, y = rng.uniform(-0.05, 0.05) * depth;
        emit_hold(xy, i, n, n, x, y, tremor, rng);
    } else {
        // hard negative: fixation cluster on a static region
        double r = tan_deg(P.cluster_radius_deg) * depth;
        double cx = rng.uniform(-0.03, 0.03) * depth, cy = rng.uniform(-0.03, 0.03) * depth;
        double x = cx, y = cy;
        while (i < n) {
            std::int64_t fix_len = std::llround(rng.uniform(250.0, 700.0) / 1e3 * hz);
            emit_hold(xy, i, n, fix_len, x, y, tremor, rng);
            if (i >= n) break;
            double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
            double rad = r * std::sqrt(rng.next_double());
            double nx = cx + rad * std::cos(ang), ny = cy + rad * std::sin(ang);
            emit_saccade(xy, i, n, sac_len, x, y, nx, ny);
            x = nx;
            y = ny;
        }
    }

    GazeWindow w;
    w.hz = hz;
    w.duration_s = duration_s;
    w.repr = GazeRepr::point3d;
    w.samples.reserve(static_cast<std::size_t>(3 * n));
    for (std::int64_t k = 0; k < n; ++k) {
        w.samples.push_back(xy[static_cast<std::size_t>(2 * k)]);
        w.samples.push_back(xy[static_cast<std::size_t>(2 * k + 1)]);
        w.samples.push_back(depth);
    }
    return w;
}

inline GazeWindow gen_scanpath(const ScenarioSpec& spec, double hz, double duration_s, const SimParams& P = {}) {
    return spec.label == Label::reading ? gen_reading_scanpath(spec, hz, duration_s, P)
                                        : gen_nonreading_scanpath(spec, hz, duration_s, P);
}

// 6-DoF motion window with an explicitly pinned motion profile (used by the
// alternating-sequence templates). Stationary is low-variance noise; walking
// puts a ~2 Hz oscillation on vertical acceleration; head turns are yaw-rate
// pulses.
inline ImuWindow gen_imu_profile(const ScenarioSpec& spec, double hz, double duration_s,
                                 sim_detail::MotionProfile profile, const SimParams& P = {}) {
    using namespace sim_detail;
    require_positive_duration(duration_s);
    CounterRng rng = make_rng(spec.seed, RngStream::sim_segment, 17);

    const std::int64_t n = std::llround(hz * duration_s);
    ImuWindow w;
    w.hz = hz;
    w.duration_s = duration_s;
    w.samples.assign(static_cast<std::size_t>(n) * ImuWindow::dim, 0.0);

    double an = P.accel_noise_stationary, gn = P.gyro_noise_stationary;
    if (profile == MotionProfile::walking) {
        an = P.accel_noise_walking;
        gn = P.gyro_noise_walking;
    }
    for (std::int64_t i = 0; i < n; ++i)
        for (int c = 0; c < 6; ++c) w.at(i, c) = rng.normal(0.0, c < 3 ? an : gn);

    if (profile == MotionProfile::walking) {
        double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        double phase2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::int64_t i = 0; i < n; ++i) {
            double t = static_cast<double>(i) / hz;
            w.at(i, 1) += P.walk_accel_amp * std::sin(2.0 * std::numbers::pi * P.walk_bob_hz * t + phase) +
                          P.walk_accel_amp2 * std::sin(4.0 * std::numbers::pi * P.walk_bob_hz * t + phase2);
            w.at(i, 0) += 0.25 * std::sin(std::numbers::pi * P.walk_bob_hz * t + phase2);
            w.at(i, 5) += 0.05 * std::sin(2.0 * std::numbers::pi * P.walk_bob_hz * t + phase);
        }
    } else if (profile == MotionProfile::head_turns) {
        double t_next = rng.uniform(0.2, 1.2);
        while (t_next < duration_s) {
            double amp = rng.uniform(P.turn_pulse_amp[0], P.turn_pulse_amp[1]) *
                         (rng.next_double() < 0.5 ? -1.0 : 1.0);
            for (std::int64_t i = 0; i < n; ++i) {
                double dt = static_cast<double>(i) / hz - t_next;
                w.at(i, 4) += amp * std::exp(-dt * dt / (2.0 * P.turn_pulse_sigma_s * P.turn_pulse_sigma_s));
            }
            t_next += rng.uniform(1.2, 3.0);
        }
    }
    return w;
}

// Motion profile drawn from the scenario: walk_read reads while walking,
// other reading modes are stationary; daily negatives mix stationary,
// walking, and head turns; hard negatives are stationary.
inline ImuWindow gen_imu(const ScenarioSpec& spec, double hz, double duration_s, const SimParams& P = {}) {
    using namespace sim_detail;
    require_positive_duration(duration_s);
    spec.validate();
    CounterRng rng = make_rng(spec.seed, RngStream::sim_segment);
    return gen_imu_profile(spec, hz, duration_s, motion_profile(spec, rng), P);
}

// Foveated crop content. Text media get a horizontal dark-line texture whose
// pitch depends on the medium; everyday negatives get gradients or blobs.
// Hard negatives keep the text texture: text is in view, just not read.
inline RgbPatch gen_patch(const ScenarioSpec& spec, int size, int channels = 3, const SimParams& P = {},
                          std::uint64_t salt = 0) {
    if (size <= 0) throw ConfigError("gen_patch: size must be positive");
    if (channels <= 0) throw ConfigError("gen_patch: channels must be positive");
    spec.validate();
    CounterRng rng = make_rng(spec.seed, RngStream::sim_patch, salt);

    RgbPatch p;
    p.h = p.w = size;
    p.c = channels;
    p.bytes.resize(static_cast<std::size_t>(size) * size * channels);

    const bool text = spec.label == Label::reading || spec.activity == Activity::hard_negative;
    std::vector<double> gray(static_cast<std::size_t>(size) * size);

    if (text) {
        int med = spec.medium == Medium::none ? static_cast<int>(Medium::print) : static_cast<int>(spec.medium);
        int pitch = P.line_pitch_px[med];
        int thick = std::max(2, pitch * 2 / 5);
        int phase = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(pitch)));
        int word_period = 7 + static_cast<int>(rng.next_below(4));
        int word_phase = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(word_period)));
        for (int y = 0; y < size; ++y) {
            bool in_line = ((y + phase) % pitch) < thick;
            for (int x = 0; x < size; ++x) {
                double v = 205.0;
                if (in_line) {
                    bool gap = ((x + word_phase) % word_period) < 2;
                    v = gap ? 185.0 : 70.0;
                }
                gray[static_cast<std::size_t>(y) * size + x] = v;
            }
        }
    } else {
        int kind = static_cast<int>(rng.next_below(2));
        if (kind == 0) {
            // gentle gradient
            double base = rng.uniform(90.0, 180.0);
            double gx = rng.uniform(-0.4, 0.4), gy = rng.uniform(-0.4, 0.4);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    gray[static_cast<std::size_t>(y) * size + x] = base + gx * x + gy * y;
        } else {
            // a few soft blobs
            double base = rng.uniform(120.0, 200.0);
            int nblobs = 2 + static_cast<int>(rng.next_below(3));
            std::vector<double> bx(static_cast<std::size_t>(nblobs)), by(bx), bs(bx), ba(bx);
            for (int b = 0; b < nblobs; ++b) {
                bx[static_cast<std::size_t>(b)] = rng.uniform(0.0, size);
                by[static_cast<std::size_t>(b)] = rng.uniform(0.0, size);
                bs[static_cast<std::size_t>(b)] = rng.uniform(size / 10.0, size / 3.0);
                ba[static_cast<std::size_t>(b)] = rng.uniform(-80.0, 80.0);
            }
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    double v = base;
                    for (int b = 0; b < nblobs; ++b) {
                        double dx = x - bx[static_cast<std::size_t>(b)], dy = y - by[static_cast<std::size_t>(b)];
                        double s2 = bs[static_cast<std::size_t>(b)] * bs[static_cast<std::size_t>(b)];
                        v += ba[static_cast<std::size_t>(b)] * std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
                    }
                    gray[static_cast<std::size_t>(y) * size + x] = v;
                }
        }
    }

    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double v = gray[static_cast<std::size_t>(y) * size + x] + rng.normal(0.0, P.patch_noise_sigma);
            auto byte = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            for (int ch = 0; ch < channels; ++ch)
                p.bytes[(static_cast<std::size_t>(y) * size + x) * channels + ch] = byte;
        }
    return p;
}

// ------------------------------------------------------ alternating streams

namespace sim_detail {

struct AltTemplate {
    bool start_reading;
    double read_lo, read_hi; // reading segment duration range (s)
    double nr_lo, nr_hi;     // non-reading segment duration range (s)
    Mode read_mode;
    Medium read_medium;
    Activity nr_activity;    // daily -> generator picks a kind; hard_negative -> cluster
    MotionProfile nr_motion;
};

// Appendix scenario list (1..10): reading interrupted by getting up, mind
// wandering, figures, posture changes, food; walking interrupted by signs or
// grabbing something to read; chores and assembly interleaved with reading.
inline AltTemplate alt_template(int scenario_id) {
    switch (scenario_id) {
        case 1: return {true, 8, 14, 5, 10, Mode::engaged, Medium::print, Activity::daily, MotionProfile::walking};
        case 2: return {true, 8, 14, 4, 8, Mode::engaged, Medium::print, Activity::daily, MotionProfile::stationary};
        case 3: return {true, 6, 12, 3, 6, Mode::engaged, Medium::print, Activity::hard_negative,
                        MotionProfile::stationary};
        case 4: return {true, 8, 14, 3, 6, Mode::engaged, Medium::digital, Activity::daily,
                        MotionProfile::head_turns};
        case 5: return {true, 5, 10, 2, 5, Mode::engaged, Medium::print, Activity::daily, MotionProfile::stationary};
        case 6: return {false, 4, 8, 6, 12, Mode::engaged, Medium::objects, Activity::daily, MotionProfile::walking};
        case 7: return {false, 10, 16, 5, 9, Mode::engaged, Medium::print, Activity::daily, MotionProfile::walking};
        case 8: return {false, 6, 12, 6, 12, Mode::engaged, Medium::print, Activity::daily,
                        MotionProfile::head_turns};
        case 9: return {true, 4, 8, 4, 8, Mode::engaged, Medium::digital, Activity::daily,
                        MotionProfile::head_turns};
        case 10: return {true, 3, 6, 8, 14, Mode::engaged, Medium::print, Activity::hard_negative,
                         MotionProfile::head_turns};
        default: throw ConfigError("alternating scenario id must be 1..10");
    }
}

} // namespace sim_detail

inline AlternatingSequence gen_alternating(int scenario_id, double total_s, std::uint64_t seed,
                                           double gaze_hz = 60.0, double imu_hz = 60.0, double rgb_hz = 30.0,
                                           int patch_px = 64, int channels = 3, const SimParams& P = {}) {
    using namespace sim_detail;
    require_positive_duration(total_s);
    AltTemplate tpl = alt_template(scenario_id);
    CounterRng rng = make_rng(seed, RngStream::sim_segment, static_cast<std::uint64_t>(scenario_id));

    AlternatingSequence seq;
    seq.scenario_id = scenario_id;
    seq.rgb_hz = rgb_hz;
    seq.patch_px = patch_px;
    seq.channels = channels;
    seq.initial_state = tpl.start_reading ? Label::reading : Label::not_reading;

    seq.gaze.hz = gaze_hz;
    seq.gaze.duration_s = total_s;
    seq.gaze.repr = GazeRepr::point3d;
    seq.imu.hz = imu_hz;
    seq.imu.duration_s = total_s;

    const std::int64_t n_gaze = std::llround(gaze_hz * total_s);
    const std::int64_t n_imu = std::llround(imu_hz * total_s);

    // cut the timeline into alternating segments measured in gaze samples
    bool reading = tpl.start_reading;
    std::int64_t used = 0;
    std::vector<std::pair<std::int64_t, bool>> segments; // (gaze sample count, reading?)
    while (used < n_gaze) {
        double lo = reading ? tpl.read_lo : tpl.nr_lo;
        double hi = reading ? tpl.read_hi : tpl.nr_hi;
        std::int64_t len = std::llround(rng.uniform(lo, hi) * gaze_hz);
        len = std::min(len, n_gaze - used);
        if (n_gaze - used - len < std::llround(1.0 * gaze_hz)) len = n_gaze - used; // absorb tiny tails
        segments.emplace_back(len, reading);
        used += len;
        reading = !reading;
    }

    std::int64_t start = 0;
    int seg_idx = 0;
    for (auto [len, is_reading] : segments) {
        double seg_T = static_cast<double>(len) / gaze_hz;
        ScenarioSpec spec;
        if (is_reading) {
            spec.label = Label::reading;
            spec.mode = tpl.read_mode;
            spec.medium = tpl.read_medium;
        } else {
            spec.label = Label::not_reading;
            spec.mode = Mode::none;
            spec.medium = Medium::none;
            spec.activity = tpl.nr_activity;
        }
        spec.seed = CounterRng::mix(seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(seg_idx + 1));

        GazeWindow g = gen_scanpath(spec, gaze_hz, seg_T, P);
        seq.gaze.samples.insert(seq.gaze.samples.end(), g.samples.begin(), g.samples.end());

        // IMU per segment at its own rate; profile pinned by the template
        std::int64_t imu_start = std::llround(static_cast<double>(start) / gaze_hz * imu_hz);
        std::int64_t imu_end = std::llround(static_cast<double>(start + len) / gaze_hz * imu_hz);
        imu_end = std::min(imu_end, n_imu);
        if (imu_end > imu_start) {
            MotionProfile prof = is_reading ? (tpl.read_mode == Mode::walk_read ? MotionProfile::walking
                                                                                : MotionProfile::stationary)
                                            : tpl.nr_motion;
            ImuWindow seg_imu = gen_imu_profile(spec, imu_hz,
                                                static_cast<double>(imu_end - imu_start) / imu_hz, prof, P);
            seq.imu.samples.insert(seq.imu.samples.end(), seg_imu.samples.begin(), seg_imu.samples.end());
        }

        if (start > 0)
            seq.change_points.push_back({static_cast<double>(start) / gaze_hz,
                                         is_reading ? Label::reading : Label::not_reading});
        start += len;
        ++seg_idx;
    }

    // RGB frames: whatever sits under the gaze at each frame time
    std::int64_t n_frames = std::llround(rgb_hz * total_s);
    for (std::int64_t j = 0; j < n_frames; ++j) {
        double t = static_cast<double>(j + 1) / rgb_hz;
        Label st = seq.state_at(t);
        ScenarioSpec fs;
        if (st == Label::reading) {
            fs.label = Label::reading;
            fs.mode = tpl.read_mode;
            fs.medium = tpl.read_medium;
        } else {
            fs.label = Label::not_reading;
            fs.mode = Mode::none;
            fs.medium = Medium::none;
            fs.activity = tpl.nr_activity;
        }
        fs.seed = seed;
        seq.frames.push_back(gen_patch(fs, patch_px, channels, P, static_cast<std::uint64_t>(j + 1)));
    }
    return seq;
}

// ---------------------------------------------------------------- datasets

struct ManifestEntry {
    int count = 0;
    ScenarioSpec spec; // per-clip seeds are derived from the manifest seed
};

struct Manifest {
    std::uint64_t seed = 42;
    double gaze_hz = 60.0;
    double imu_hz = 60.0;
    double duration_s = 2.0;
    double patch_fov_deg = 5.0;
    int channels = 3;
    Task task = Task::binary;
    std::vector<ManifestEntry> entries;

    int total_count() const {
        int n = 0;
        for (const auto& e : entries) n += e.count;
        return n;
    }

    void validate() const {
        for (const auto& e : entries) {
            if (e.count < 0) throw ConfigError("manifest: counts must be >= 0");
            e.spec.validate();
        }
        if (total_count() <= 0) throw ConfigError("manifest: no clips requested");
        bool class_seen[7] = {};
        for (const auto& e : entries)
            if (e.count > 0) class_seen[class_index(e.spec, task)] = true;
        int distinct = 0;
        for (bool b : class_seen) distinct += b;
        if (distinct < 2)
            throw ConfigError(std::string("manifest: task ") + to_string(task) +
                              " needs at least two distinct classes");
    }

    int patch_px() const { return crop_geometry(patch_fov_deg, CameraModel{}); }
};

inline Manifest manifest_from_json(const json& j) {
    Manifest m;
    m.seed = j.value("seed", m.seed);
    m.gaze_hz = j.value("gaze_hz", m.gaze_hz);
    m.imu_hz = j.value("imu_hz", m.imu_hz);
    m.duration_s = j.value("duration_s", m.duration_s);
    m.patch_fov_deg = j.value("patch_fov_deg", m.patch_fov_deg);
    m.channels = j.value("channels", m.channels);
    m.task = task_from_string(j.value("task", "binary"));
    if (!j.contains("entries")) throw ConfigError("manifest: missing entries");
    for (const auto& e : j.at("entries")) {
        ManifestEntry entry;
        entry.count = e.at("count").get<int>();
        entry.spec.label = label_from_string(e.value("label", "reading"));
        if (entry.spec.label == Label::reading) {
            entry.spec.mode = mode_from_string(e.value("mode", "engaged"));
            entry.spec.medium = medium_from_string(e.value("medium", "print"));
            entry.spec.direction = direction_from_string(e.value("direction", "ltr"));
        } else {
            entry.spec.mode = Mode::none;
            entry.spec.medium = Medium::none;
            entry.spec.activity = activity_from_string(e.value("activity", "daily"));
        }
        m.entries.push_back(std::move(entry));
    }
    return m;
}

inline json manifest_to_json(const Manifest& m) {
    json j;
    j["seed"] = m.seed;
    j["gaze_hz"] = m.gaze_hz;
    j["imu_hz"] = m.imu_hz;
    j["duration_s"] = m.duration_s;
    j["patch_fov_deg"] = m.patch_fov_deg;
    j["channels"] = m.channels;
    j["task"] = to_string(m.task);
    json entries = json::array();
    for (const auto& e : m.entries) {
        json je;
        je["count"] = e.count;
        je["label"] = to_string(e.spec.label);
        if (e.spec.label == Label::reading) {
            je["mode"] = to_string(e.spec.mode);
            je["medium"] = to_string(e.spec.medium);
            je["direction"] = to_string(e.spec.direction);
        } else {
            je["activity"] = to_string(e.spec.activity);
        }
        entries.push_back(std::move(je));
    }
    j["entries"] = std::move(entries);
    return j;
}

// Deterministic dataset: clip i depends only on (manifest seed, i). Values
// are decimal-quantized at generation time so in-memory clips and reloaded
// JSONL clips are bit-identical.
inline std::vector<LabeledClip> gen_dataset(const Manifest& m, const SimParams& P = {}) {
    m.validate();
    int px = m.patch_px();
    std::vector<LabeledClip> clips;
    clips.reserve(static_cast<std::size_t>(m.total_count()));
    int index = 0;
    for (const auto& entry : m.entries) {
        for (int k = 0; k < entry.count; ++k, ++index) {
            LabeledClip clip;
            char idbuf[32];
            std::snprintf(idbuf, sizeof idbuf, "clip-%06d", index);
            clip.id = idbuf;
            clip.meta = entry.spec;
            clip.meta.seed = make_rng(m.seed, RngStream::sim_clip, static_cast<std::uint64_t>(index)).next_u64();
            clip.label = static_cast<int>(clip.meta.label);

            GazeWindow g = gen_scanpath(clip.meta, m.gaze_hz, m.duration_s, P);
            for (auto& v : g.samples) v = quantize(v, kGazeQuantum);
            clip.gaze = std::move(g);

            ImuWindow imu = gen_imu(clip.meta, m.imu_hz, m.duration_s, P);
            for (auto& v : imu.samples) v = quantize(v, kImuQuantum);
            clip.imu = std::move(imu);

            clip.rgb = gen_patch(clip.meta, px, m.channels, P);
            clip.validate();
            clips.push_back(std::move(clip));
        }
    }
    return clips;
}

} // namespace gazeread
