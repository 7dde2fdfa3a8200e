#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gazeread/errors.hpp"
#include "gazeread/metrics.hpp"
#include "gazeread/model.hpp"
#include "gazeread/scenario.hpp"

namespace gazeread {

// -------------------------------------------------------------------- config

struct DetectorConfig {
    double stride_s = 0.1;
    double threshold = 0.5;
    int hysteresis = 3; // consecutive agreeing windows required to switch

    void validate(double window_s) const {
        if (stride_s <= 0.0) throw ConfigError("detector: stride must be > 0");
        if (stride_s > window_s) throw ConfigError("detector: stride must not exceed the window length");
        if (hysteresis < 1) throw ConfigError("detector: hysteresis must be >= 1");
    }
};

struct Emission {
    double t = 0.0;
    double score = 0.0;
    Label state = Label::not_reading; // state after hysteresis at this time
};

struct DetectionTrace {
    Label initial_state = Label::not_reading;
    std::vector<Emission> emissions;
    std::vector<ChangePoint> changes; // detected, alternating
};

// Streams are dense arrays at a declared rate; when explicit timestamps
// exist (hardware logs), any spacing beyond 1.5 sample periods is a gap.
inline void check_stream_gaps(const std::vector<double>& timestamps, double hz) {
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        double dt = timestamps[i] - timestamps[i - 1];
        if (dt > 1.5 / hz)
            throw DataError("stream gap of " + std::to_string(dt) + " s at t=" + std::to_string(timestamps[i - 1]));
        if (dt <= 0.0) throw DataError("stream timestamps must be strictly increasing");
    }
}

// -------------------------------------------------------- hysteresis machine

// Pure function of the score sequence: initial state is the first decision;
// a switch requires `hysteresis` consecutive opposing decisions and is
// stamped at the confirming emission.
inline DetectionTrace apply_hysteresis(const std::vector<double>& times, const std::vector<double>& scores,
                                       double threshold, int hysteresis) {
    if (times.size() != scores.size()) throw ShapeError("apply_hysteresis: times/scores length mismatch");
    DetectionTrace trace;
    if (times.empty()) return trace;
    auto decide = [&](double s) { return s >= threshold ? Label::reading : Label::not_reading; };
    Label state = decide(scores[0]);
    trace.initial_state = state;
    int pending = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        Label d = decide(scores[i]);
        if (i > 0 && d != state) {
            if (++pending >= hysteresis) {
                state = d;
                pending = 0;
                trace.changes.push_back({times[i], state});
            }
        } else {
            pending = 0;
        }
        trace.emissions.push_back({times[i], scores[i], state});
    }
    return trace;
}

// ------------------------------------------------------------------- detect

// Slides the model's T-second window along the streams at the configured
// stride. Window assembly is integer index arithmetic on each stream's
// native grid, so streaming scores are bit-identical to offline slicing.
template <class Real>
DetectionTrace detect(const AlternatingSequence& streams, const ModelParams<Real>& params, const ModelConfig& cfg,
                      const DetectorConfig& dcfg, const std::optional<std::vector<double>>& gaze_timestamps = {},
                      const CameraModel& cam = {}) {
    cfg.validate();
    dcfg.validate(cfg.duration_s);
    if (streams.gaze.repr != GazeRepr::point3d) throw DataError("detect: stream gaze must be point3d");
    if (streams.gaze.duration_s + 1e-9 < cfg.duration_s)
        throw DataError("detect: streams must cover at least one model window");
    if (gaze_timestamps) check_stream_gaps(*gaze_timestamps, streams.gaze.hz);

    const double gz = streams.gaze.hz, iz = streams.imu.hz, rz = streams.rgb_hz;
    auto stride_of = [&](double hz, const char* what) {
        double v = dcfg.stride_s * hz;
        std::int64_t s = std::llround(v);
        if (s < 1 || std::fabs(v - static_cast<double>(s)) > 1e-6)
            throw ConfigError(std::string("detector: stride does not align to the ") + what + " sample grid");
        return s;
    };
    const std::int64_t stride_g = stride_of(gz, "gaze");
    const std::int64_t stride_i = cfg.use_imu ? stride_of(iz, "imu") : 1;
    const std::int64_t win_g = std::llround(cfg.duration_s * gz);
    const std::int64_t win_i = std::llround(cfg.duration_s * iz);
    const std::int64_t n_g = streams.gaze.count();
    const std::int64_t n_i = streams.imu.count();

    std::vector<double> times, scores;
    // first emission index: smallest k with k*stride covering a full window
    std::int64_t k = (win_g + stride_g - 1) / stride_g;
    for (; k * stride_g <= n_g; ++k) {
        std::int64_t end_g = k * stride_g;
        double t = static_cast<double>(end_g) / gz;

        ClipInput<Real> in;
        if (cfg.use_gaze) {
            GazeWindow w;
            w.hz = gz;
            w.duration_s = cfg.duration_s;
            w.repr = GazeRepr::point3d;
            w.samples.assign(streams.gaze.samples.begin() + static_cast<std::ptrdiff_t>(3 * (end_g - win_g)),
                             streams.gaze.samples.begin() + static_cast<std::ptrdiff_t>(3 * end_g));
            in.gaze = gaze_to_tensor<Real>(w, cfg, cam);
        }
        if (cfg.use_imu) {
            std::int64_t end_i = k * stride_i;
            if (end_i > n_i || end_i - win_i < 0) break;
            ImuWindow w;
            w.hz = iz;
            w.duration_s = cfg.duration_s;
            w.samples.assign(streams.imu.samples.begin() + static_cast<std::ptrdiff_t>(6 * (end_i - win_i)),
                             streams.imu.samples.begin() + static_cast<std::ptrdiff_t>(6 * end_i));
            in.imu = imu_to_tensor<Real>(w, cfg);
        }
        if (cfg.use_rgb) {
            // latest frame at or before t
            std::int64_t j = static_cast<std::int64_t>(std::floor(t * rz + 1e-9)) - 1;
            if (j < 0) j = 0;
            if (j >= static_cast<std::int64_t>(streams.frames.size()))
                j = static_cast<std::int64_t>(streams.frames.size()) - 1;
            if (j < 0) throw DataError("detect: rgb stream has no frames");
            in.rgb = rgb_to_tensor<Real>(streams.frames[static_cast<std::size_t>(j)], cfg);
        }

        Prediction p = predict(params, cfg, in);
        times.push_back(t);
        scores.push_back(p.score());
    }
    if (times.empty()) throw DataError("detect: streams shorter than one window");
    return apply_hysteresis(times, scores, dcfg.threshold, dcfg.hysteresis);
}

// ------------------------------------------------------------------- latency

struct LatencyMatch {
    double gt_t = 0.0;
    double detected_t = 0.0;
    double latency_s = 0.0;
    Label state = Label::reading;
};

struct LatencyReport {
    std::vector<LatencyMatch> matches;
    std::vector<ChangePoint> misses;
    double mean_latency_s = 0.0; // over matches only

    json to_json() const {
        json j;
        json ms = json::array();
        for (const auto& m : matches)
            ms.push_back(json{{"gt_t", m.gt_t},
                              {"detected_t", m.detected_t},
                              {"latency_s", m.latency_s},
                              {"state", to_string(m.state)}});
        j["matches"] = std::move(ms);
        json misses_j = json::array();
        for (const auto& m : misses) misses_j.push_back(json{{"t", m.t}, {"state", to_string(m.state)}});
        j["misses"] = std::move(misses_j);
        j["n_matched"] = matches.size();
        j["n_missed"] = misses.size();
        j["mean_latency_s"] = matches.empty() ? json(nullptr) : json(mean_latency_s);

        return j;
    }
};

// Each ground-truth change matches the first detected change of the same
// polarity at or after it within max_match seconds; detected changes are
// consumed in order. Unmatched ground truth is a miss, reported separately
// and excluded from the mean.
inline LatencyReport latency(const DetectionTrace& trace, const std::vector<ChangePoint>& ground_truth,
                             double max_match_s = 5.0) {
    LatencyReport rep;
    std::size_t j = 0;
    for (const auto& gt : ground_truth) {
        std::size_t probe = j;
        bool matched = false;
        while (probe < trace.changes.size() && trace.changes[probe].t <= gt.t + max_match_s) {
            if (trace.changes[probe].state == gt.state && trace.changes[probe].t >= gt.t) {
                rep.matches.push_back({gt.t, trace.changes[probe].t, trace.changes[probe].t - gt.t, gt.state});
                j = probe + 1;
                matched = true;
                break;
            }
            ++probe;
        }
        if (!matched) rep.misses.push_back(gt);
    }
    double sum = 0.0;
    for (const auto& m : rep.matches) sum += m.latency_s;
    rep.mean_latency_s = rep.matches.empty() ? 0.0 : sum / static_cast<double>(rep.matches.size());
    return rep;
}

// -------------------------------------------------------- windowed accuracy

struct WindowedAccuracy {
    ConfusionCounts counts;
    std::int64_t included = 0;
    std::int64_t excluded = 0; // emissions whose window straddles a change
};

// Emissions are labeled by the ground-truth state in effect for their
// window's end (left-continuous: at exactly a change time the old state
// applies, matching the window content). Windows overlapping a change,
// i.e. emissions with a change strictly inside (t - T, t), are excluded.
inline WindowedAccuracy windowed_accuracy(const DetectionTrace& trace, Label initial_state,
                                          const std::vector<ChangePoint>& ground_truth, double window_s,
                                          double threshold = 0.5) {
    WindowedAccuracy wa;
    std::vector<ScoredExample> scored;
    for (const auto& em : trace.emissions) {
        bool straddles = false;
        for (const auto& cp : ground_truth)
            if (cp.t > em.t - window_s && cp.t < em.t) {
                straddles = true;
                break;
            }
        if (straddles) {
            ++wa.excluded;
            continue;
        }
        Label st = initial_state;
        for (const auto& cp : ground_truth) {
            if (cp.t < em.t)
                st = cp.state;
            else
                break;
        }
        ScoredExample e;
        e.score = em.score;
        e.label = st == Label::reading ? 1 : 0;
        scored.push_back(std::move(e));
        ++wa.included;
    }
    wa.counts = confusion(scored, threshold);
    return wa;
}

// ------------------------------------------------------------------- output

inline std::string trace_csv(const DetectionTrace& trace) {
    std::string out = "t,score,state\n";
    char buf[96];
    for (const auto& em : trace.emissions) {
        std::snprintf(buf, sizeof buf, "%.6f,%.9g,%d\n", em.t, em.score, em.state == Label::reading ? 1 : 0);
        out += buf;
    }
    return out;
}

} // namespace gazeread
