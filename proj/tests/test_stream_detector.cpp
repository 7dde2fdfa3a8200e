#include <catch2/catch_amalgamated.hpp>

#include "gazeread/detector.hpp"
#include "gazeread/simulator.hpp"
#include "gazeread/trainer.hpp"

using namespace gazeread;

namespace {

ModelConfig small_model() {
    ModelConfig cfg;
    cfg.latent_dim = 8;
    cfg.n_heads = 2;
    cfg.duration_s = 2.0;
    cfg.gaze_hz = 60.0;
    cfg.imu_hz = 60.0;
    cfg.patch_px = 64;
    cfg.channels = 3;
    return cfg;
}

// synthetic score trace stepping across the threshold at a known time
std::vector<double> step_scores(const std::vector<double>& times, double step_t, double lo, double hi) {
    std::vector<double> s;
    for (double t : times) s.push_back(t < step_t ? lo : hi);
    return s;
}

std::vector<double> grid(double t0, double t1, double stride) {
    std::vector<double> out;
    for (double t = t0; t <= t1 + 1e-9; t += stride) out.push_back(t);
    return out;
}

} // namespace

TEST_CASE("hysteresis: constant scores produce no changes") {
    auto times = grid(2.0, 30.0, 0.1);
    std::vector<double> scores(times.size(), 0.9);
    auto trace = apply_hysteresis(times, scores, 0.5, 3);
    CHECK(trace.initial_state == Label::reading);
    CHECK(trace.changes.empty());
    CHECK(trace.emissions.size() == times.size());
}

TEST_CASE("hysteresis: h=1 flags the first crossing emission") {
    auto times = grid(2.0, 10.0, 0.1);
    auto scores = step_scores(times, 5.0, 0.8, 0.2);
    auto trace = apply_hysteresis(times, scores, 0.5, 1);
    REQUIRE(trace.changes.size() == 1);
    CHECK(trace.changes[0].t == Catch::Approx(5.0));
    CHECK(trace.changes[0].state == Label::not_reading);
}

TEST_CASE("hysteresis: confirmation delay is exactly (h-1) strides on a step") {
    auto times = grid(2.0, 10.0, 0.1);
    auto scores = step_scores(times, 5.0, 0.8, 0.2);
    for (int h = 1; h <= 5; ++h) {
        auto trace = apply_hysteresis(times, scores, 0.5, h);
        REQUIRE(trace.changes.size() == 1);
        CHECK(trace.changes[0].t == Catch::Approx(5.0 + (h - 1) * 0.1));
    }
}

TEST_CASE("hysteresis monotonicity: larger h never detects earlier") {
    // jittery scores around a true change
    CounterRng rng(3, 500);
    auto times = grid(2.0, 20.0, 0.1);
    std::vector<double> scores;
    for (double t : times) {
        double base = t < 9.0 ? 0.75 : 0.25;
        scores.push_back(base + rng.uniform(-0.25, 0.25));
    }
    double prev_first = -1.0;
    for (int h = 1; h <= 5; ++h) {
        auto trace = apply_hysteresis(times, scores, 0.5, h);
        auto rep = latency(trace, {{9.0, Label::not_reading}}, 8.0);
        if (rep.matches.empty()) {
            // once h is too strict to confirm, it stays that way
            continue;
        }
        CHECK(rep.matches[0].latency_s >= prev_first);
        prev_first = rep.matches[0].latency_s;
        CHECK(rep.matches[0].latency_s >= (h - 1) * 0.1 - 1e-9);
    }
}

TEST_CASE("latency: exact offsets, misses reported separately") {
    DetectionTrace trace;
    trace.initial_state = Label::reading;
    trace.changes = {{10.5, Label::not_reading}, {20.25, Label::reading}, {31.0, Label::not_reading}};

    std::vector<ChangePoint> gt = {{10.0, Label::not_reading}, {20.0, Label::reading}, {30.0, Label::not_reading},
                                   {40.0, Label::reading}};
    auto rep = latency(trace, gt, 5.0);
    REQUIRE(rep.matches.size() == 3);
    CHECK(rep.matches[0].latency_s == Catch::Approx(0.5));
    CHECK(rep.matches[1].latency_s == Catch::Approx(0.25));
    CHECK(rep.matches[2].latency_s == Catch::Approx(1.0));
    REQUIRE(rep.misses.size() == 1);
    CHECK(rep.misses[0].t == 40.0);
    CHECK(rep.mean_latency_s == Catch::Approx((0.5 + 0.25 + 1.0) / 3.0));

    // detection outside the match window is a miss
    auto rep2 = latency(trace, {{1.0, Label::not_reading}}, 5.0);
    CHECK(rep2.matches.empty());
    CHECK(rep2.misses.size() == 1);
}

TEST_CASE("windowed accuracy: perfect and inverted traces, exclusion zone") {
    double T = 2.0, stride = 0.1;
    auto times = grid(T, 30.0, stride);
    std::vector<ChangePoint> gt = {{10.0, Label::not_reading}, {20.0, Label::reading}};

    // scores that follow ground truth with the left-continuous convention
    std::vector<double> perfect;
    for (double t : times) {
        Label st = Label::reading;
        for (const auto& cp : gt)
            if (cp.t < t) st = cp.state;
        perfect.push_back(st == Label::reading ? 0.9 : 0.1);
    }
    auto trace = apply_hysteresis(times, perfect, 0.5, 1);
    auto wa = windowed_accuracy(trace, Label::reading, gt, T, 0.5);
    CHECK(wa.counts.accuracy() == 1.0);

    // inverted scores -> zero accuracy on included emissions
    std::vector<double> inverted;
    for (double s : perfect) inverted.push_back(1.0 - s);
    auto bad = windowed_accuracy(apply_hysteresis(times, inverted, 0.5, 1), Label::reading, gt, T, 0.5);
    CHECK(bad.counts.accuracy() == 0.0);

    // exclusion zone: emissions with a change strictly inside (t-T, t)
    std::int64_t expect_excluded = 0;
    for (const auto& cp : gt)
        for (double t : times)
            if (cp.t > t - T && cp.t < t) ++expect_excluded;
    CHECK(wa.excluded == expect_excluded);
    CHECK(wa.included + wa.excluded == static_cast<std::int64_t>(times.size()));
    // each change excludes a zone of width T: T/stride windows (open interval)
    CHECK(expect_excluded == 2 * static_cast<std::int64_t>(std::llround(T / stride) - 1));
}

TEST_CASE("detect: constant streams give a single state and no changes") {
    ModelConfig cfg = small_model();
    auto params = ModelParams<float>::init(cfg, 3);

    AlternatingSequence seq;
    seq.scenario_id = 1;
    seq.initial_state = Label::reading;
    seq.gaze.hz = 60;
    seq.gaze.duration_s = 10.0;
    seq.gaze.repr = GazeRepr::point3d;
    for (int i = 0; i < 600; ++i) {
        seq.gaze.samples.insert(seq.gaze.samples.end(), {0.01, -0.02, 0.45});
    }
    seq.imu.hz = 60;
    seq.imu.duration_s = 10.0;
    seq.imu.samples.assign(600 * 6, 0.0);
    seq.rgb_hz = 30;
    seq.patch_px = 64;
    seq.channels = 3;
    RgbPatch frame;
    frame.h = frame.w = 64;
    frame.c = 3;
    frame.bytes.assign(64 * 64 * 3, 128);
    for (int j = 0; j < 300; ++j) seq.frames.push_back(frame);

    DetectorConfig dcfg;
    auto trace = detect(seq, params, cfg, dcfg);
    CHECK(trace.changes.empty());
    REQUIRE(!trace.emissions.empty());
    for (std::size_t i = 1; i < trace.emissions.size(); ++i) {
        CHECK(trace.emissions[i].score == trace.emissions[0].score);
        CHECK(trace.emissions[i].state == trace.emissions[0].state);
    }
    // emission times sit on the stride grid
    for (const auto& em : trace.emissions) {
        double k = em.t / dcfg.stride_s;
        CHECK(std::fabs(k - std::round(k)) < 1e-9);
    }
}

TEST_CASE("detect: streaming scores bit-equal offline slicing") {
    ModelConfig cfg = small_model();
    auto params = ModelParams<float>::init(cfg, 4);
    AlternatingSequence seq = gen_alternating(1, 12.0, 42);

    DetectorConfig dcfg;
    dcfg.stride_s = 0.5;
    auto trace = detect(seq, params, cfg, dcfg);
    REQUIRE(trace.emissions.size() >= 10);

    for (const auto& em : trace.emissions) {
        // offline: slice the same window by index arithmetic and run the
        // batch path
        std::int64_t end_g = std::llround(em.t * seq.gaze.hz);
        std::int64_t win_g = std::llround(cfg.duration_s * seq.gaze.hz);
        GazeWindow gw;
        gw.hz = seq.gaze.hz;
        gw.duration_s = cfg.duration_s;
        gw.repr = GazeRepr::point3d;
        gw.samples.assign(seq.gaze.samples.begin() + 3 * (end_g - win_g),
                          seq.gaze.samples.begin() + 3 * end_g);
        std::int64_t end_i = std::llround(em.t * seq.imu.hz);
        std::int64_t win_i = std::llround(cfg.duration_s * seq.imu.hz);
        ImuWindow iw;
        iw.hz = seq.imu.hz;
        iw.duration_s = cfg.duration_s;
        iw.samples.assign(seq.imu.samples.begin() + 6 * (end_i - win_i), seq.imu.samples.begin() + 6 * end_i);
        std::int64_t j = static_cast<std::int64_t>(std::floor(em.t * seq.rgb_hz + 1e-9)) - 1;

        ClipInput<float> in;
        in.gaze = gaze_to_tensor<float>(gw, cfg);
        in.imu = imu_to_tensor<float>(iw, cfg);
        in.rgb = rgb_to_tensor<float>(seq.frames[static_cast<std::size_t>(j)], cfg);
        Prediction p = predict(params, cfg, in);
        CHECK(p.score() == em.score); // bit-exact
    }
}

TEST_CASE("detect: validation errors") {
    ModelConfig cfg = small_model();
    auto params = ModelParams<float>::init(cfg, 5);
    AlternatingSequence seq = gen_alternating(2, 8.0, 1);

    DetectorConfig big_stride;
    big_stride.stride_s = 3.0; // > T
    CHECK_THROWS_AS(detect(seq, params, cfg, big_stride), ConfigError);

    DetectorConfig bad_h;
    bad_h.hysteresis = 0;
    CHECK_THROWS_AS(detect(seq, params, cfg, bad_h), ConfigError);

    AlternatingSequence tiny = gen_alternating(2, 8.0, 1);
    tiny.gaze.duration_s = 1.0; // shorter than the window
    CHECK_THROWS_AS(detect(tiny, params, cfg, DetectorConfig{}), DataError);

    // explicit timestamps with a gap
    std::vector<double> ts;
    for (int i = 0; i < 480; ++i) ts.push_back(i / 60.0 + (i > 300 ? 0.2 : 0.0));
    CHECK_THROWS_AS(detect(seq, params, cfg, DetectorConfig{}, ts), DataError);
    CHECK_THROWS_AS(check_stream_gaps({0.0, 0.1, 0.1}, 60.0), DataError);
}

TEST_CASE("trace csv shape") {
    auto times = grid(2.0, 4.0, 0.5);
    auto trace = apply_hysteresis(times, std::vector<double>(times.size(), 0.7), 0.5, 2);
    std::string csv = trace_csv(trace);
    CHECK(csv.rfind("t,score,state\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(times.size()) + 1);
}
