#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "gazeread/metrics.hpp"
#include "gazeread/rng.hpp"

using namespace gazeread;

namespace {

// brute-force recount oracle, written independently: loop and count
struct OracleCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

OracleCounts recount(const std::vector<ScoredExample>& v, double thr) {
    OracleCounts o;
    for (const auto& e : v) {
        bool predicted_reading = !(e.score < thr); // >= convention
        if (predicted_reading && e.label == 1) o.tp++;
        if (predicted_reading && e.label == 0) o.fp++;
        if (!predicted_reading && e.label == 0) o.tn++;
        if (!predicted_reading && e.label == 1) o.fn++;
    }
    return o;
}

std::vector<ScoredExample> random_scored(std::uint64_t seed, int n, double pos_rate = 0.5,
                                         bool quantized_scores = false) {
    CounterRng rng(seed, 400);
    std::vector<ScoredExample> v;
    for (int i = 0; i < n; ++i) {
        ScoredExample e;
        e.label = rng.next_double() < pos_rate ? 1 : 0;
        double raw = rng.next_double();
        // bias scores so positives tend higher, with heavy overlap
        e.score = 0.25 * e.label + 0.75 * raw;
        if (e.score > 1.0) e.score = 1.0;
        if (quantized_scores) e.score = std::round(e.score * 20.0) / 20.0; // force ties
        e.scenario = i % 3 == 0 ? "engaged/print" : (i % 3 == 1 ? "daily" : "skim/digital");
        e.medium = i % 2 ? "print" : "digital";
        e.mode = i % 2 ? "engaged" : "skim";
        e.gaze_span_deg = rng.uniform(0.0, 40.0);
        v.push_back(std::move(e));
    }
    return v;
}

} // namespace

TEST_CASE("confusion: trivial examples") {
    std::vector<ScoredExample> v;
    v.push_back({0.9, {}, 1});
    v.push_back({0.4, {}, 0});
    v.push_back({0.6, {}, 1});
    v.push_back({0.2, {}, 0});
    ConfusionCounts c = confusion(v, 0.5);
    CHECK(c.tp == 2);
    CHECK(c.tn == 2);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    CHECK(c.accuracy() == 1.0);
    CHECK(c.f1() == 1.0);

    // all wrong with confident scores
    std::vector<ScoredExample> w;
    w.push_back({0.1, {}, 1});
    w.push_back({0.95, {}, 0});
    ConfusionCounts cw = confusion(w, 0.5);
    CHECK(cw.accuracy() == 0.0);
    CHECK(cw.f1() == 0.0);
    CHECK(cw.degenerate_f1);
}

TEST_CASE("confusion matches the recount oracle on 1000 random examples") {
    auto v = random_scored(1, 1000, 0.4, true);
    for (double thr : {0.1, 0.3, 0.5, 0.75, 0.9}) {
        OracleCounts o = recount(v, thr);
        ConfusionCounts c = confusion(v, thr);
        CHECK(c.tp == o.tp);
        CHECK(c.fp == o.fp);
        CHECK(c.tn == o.tn);
        CHECK(c.fn == o.fn);
    }
}

TEST_CASE("pr curve: perfectly separated scores give AUC 1") {
    std::vector<ScoredExample> v;
    for (int i = 0; i < 20; ++i) v.push_back({0.8 + 0.01 * i, {}, 1});
    for (int i = 0; i < 30; ++i) v.push_back({0.1 + 0.01 * i, {}, 0});
    PrCurve c = pr_curve(v);
    CHECK(auc(c) == Catch::Approx(1.0));
    auto par = precision_at_recall(v, 0.9);
    CHECK(par.precision == 1.0);
}

TEST_CASE("pr curve: identical scores for both classes give base-rate precision") {
    std::vector<ScoredExample> v;
    for (int i = 0; i < 30; ++i) v.push_back({0.5, {}, i < 12 ? 1 : 0});
    PrCurve c = pr_curve(v);
    REQUIRE(c.points.size() == 1);
    CHECK(c.points[0].precision == Catch::Approx(0.4));
    CHECK(c.points[0].recall == 1.0);
    CHECK(auc(c) == Catch::Approx(0.4));
}

TEST_CASE("pr curve matches per-threshold brute force on 1000 random examples") {
    auto v = random_scored(2, 1000, 0.5, true);
    PrCurve c = pr_curve(v);
    // oracle: rebuild each point independently with the recount loop
    std::set<double> distinct;
    for (const auto& e : v) distinct.insert(e.score);
    REQUIRE(c.points.size() == distinct.size());
    long total_pos = 0;
    for (const auto& e : v) total_pos += e.label == 1;
    for (const auto& pt : c.points) {
        OracleCounts o = recount(v, pt.threshold);
        CHECK(pt.precision == static_cast<double>(o.tp) / static_cast<double>(o.tp + o.fp));
        CHECK(pt.recall == static_cast<double>(o.tp) / static_cast<double>(total_pos));
    }
    // recall grows as the threshold drops
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        CHECK(c.points[i].threshold < c.points[i - 1].threshold);
        CHECK(c.points[i].recall >= c.points[i - 1].recall);
    }
    CHECK(c.points.back().recall == 1.0);
}

TEST_CASE("auc matches trapezoid over brute-force points") {
    auto v = random_scored(3, 200, 0.5, true);
    PrCurve c = pr_curve(v);
    // independent accumulation in the reverse direction
    double area = 0.0;
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        double r0 = i == 0 ? 0.0 : c.points[i - 1].recall;
        double p0 = i == 0 ? c.points[0].precision : c.points[i - 1].precision;
        area += (c.points[i].recall - r0) * (c.points[i].precision + p0) * 0.5;
    }
    CHECK(auc(c) == Catch::Approx(area).margin(1e-12));
}

TEST_CASE("auc is invariant under strictly increasing score transforms") {
    auto v = random_scored(4, 400, 0.5, false);
    double a0 = auc(pr_curve(v));
    auto w = v;
    for (auto& e : w) e.score = std::tanh(3.0 * e.score) * 0.5 + 0.5; // monotone
    CHECK(auc(pr_curve(w)) == Catch::Approx(a0).margin(1e-12));
}

TEST_CASE("precision at recall: oracle scan, edge cases, monotonicity") {
    auto v = random_scored(5, 1000, 0.4, true);
    for (double r : {0.5, 0.75, 0.9, 0.99}) {
        auto got = precision_at_recall(v, r);
        // oracle: exhaustive scan over distinct thresholds, pick the
        // highest whose recall >= r
        std::set<double, std::greater<>> thresholds;
        for (const auto& e : v) thresholds.insert(e.score);
        long total_pos = 0;
        for (const auto& e : v) total_pos += e.label == 1;
        double best_thr = -1, best_prec = -1;
        for (double t : thresholds) {
            OracleCounts o = recount(v, t);
            double recall = static_cast<double>(o.tp) / static_cast<double>(total_pos);
            if (recall >= r) {
                best_thr = t;
                best_prec = static_cast<double>(o.tp) / static_cast<double>(o.tp + o.fp);
                break; // thresholds iterated descending
            }
        }
        CHECK(got.threshold == best_thr);
        CHECK(got.precision == best_prec);
    }

    // non-increasing in r
    double prev = 2.0;
    for (double r : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
        double p = precision_at_recall(v, r).precision;
        CHECK(p <= prev + 1e-12);
        prev = p;
    }

    // single positive scored lowest: threshold must drop to it
    std::vector<ScoredExample> w;
    w.push_back({0.01, {}, 1});
    for (int i = 0; i < 9; ++i) w.push_back({0.5 + i * 0.01, {}, 0});
    auto par = precision_at_recall(w, 0.9);
    CHECK(par.precision == Catch::Approx(0.1));

    // no positives -> undefined
    std::vector<ScoredExample> none;
    none.push_back({0.7, {}, 0});
    CHECK_THROWS_AS(precision_at_recall(none, 0.9), DataError);
}

TEST_CASE("threshold-sweep consistency: curve points equal confusion at t") {
    auto v = random_scored(6, 300, 0.5, true);
    PrCurve c = pr_curve(v);
    for (const auto& pt : c.points) {
        ConfusionCounts cc = confusion(v, pt.threshold);
        CHECK(pt.precision == cc.precision());
        CHECK(pt.recall == cc.recall());
    }
}

TEST_CASE("metrics are permutation invariant") {
    auto v = random_scored(7, 500, 0.5, true);
    auto w = v;
    CounterRng rng(8, 401);
    for (std::size_t i = w.size(); i > 1; --i)
        std::swap(w[i - 1], w[static_cast<std::size_t>(rng.next_below(i))]);
    CHECK(confusion(v).accuracy() == confusion(w).accuracy());
    CHECK(auc(pr_curve(v)) == Catch::Approx(auc(pr_curve(w))).margin(1e-12));
    CHECK(precision_at_recall(v).precision == precision_at_recall(w).precision);
}

TEST_CASE("multiclass confusion: identity, constant predictor, recount oracle") {
    // perfect predictor -> identity matrix
    std::vector<ScoredExample> perfect;
    for (int i = 0; i < 12; ++i) {
        ScoredExample e;
        e.label = i % 4;
        e.probs.assign(4, 0.0);
        e.probs[static_cast<std::size_t>(e.label)] = 1.0;
        perfect.push_back(std::move(e));
    }
    auto m = multiclass_confusion(perfect, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(m[i][j] == (i == j ? 1.0 : 0.0));
    CHECK(balanced_accuracy(perfect, 4) == 1.0);

    // constant predictor -> single nonzero column
    std::vector<ScoredExample> constant = perfect;
    for (auto& e : constant) e.probs = {0.0, 0.0, 1.0, 0.0};
    auto mc = multiclass_confusion(constant, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(mc[i][j] == (j == 2 ? 1.0 : 0.0));

    // random instance vs per-pair recount
    CounterRng rng(9, 402);
    std::vector<ScoredExample> v;
    for (int i = 0; i < 1000; ++i) {
        ScoredExample e;
        e.label = static_cast<int>(rng.next_below(5));
        e.probs.assign(5, 0.0);
        for (auto& p : e.probs) p = rng.next_double();
        v.push_back(std::move(e));
    }
    auto mm = multiclass_confusion(v, 5);
    for (int gt = 0; gt < 5; ++gt) {
        long row_total = 0;
        std::vector<long> cell(5, 0);
        for (const auto& e : v) {
            if (e.label != gt) continue;
            ++row_total;
            int pred = 0;
            for (int c = 1; c < 5; ++c)
                if (e.probs[static_cast<std::size_t>(c)] > e.probs[static_cast<std::size_t>(pred)]) pred = c;
            ++cell[static_cast<std::size_t>(pred)];
        }
        double row_sum = 0;
        for (int c = 0; c < 5; ++c) {
            CHECK(mm[gt][c] == Catch::Approx(static_cast<double>(cell[c]) / row_total).margin(1e-12));
            row_sum += mm[gt][c];
        }
        CHECK(row_sum == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("breakdown: single group equals overall, groups partition the data") {
    auto v = random_scored(10, 600, 0.5);
    for (auto& e : v) e.scenario = "only";
    auto groups = breakdown(v, "scenario");
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].counts.accuracy() == confusion(v).accuracy());

    auto v2 = random_scored(11, 600, 0.5);
    auto by_mode = breakdown(v2, "mode");
    std::int64_t total = 0;
    for (const auto& g : by_mode) {
        total += g.count;
        // oracle: filter then confusion
        std::vector<ScoredExample> filtered;
        for (const auto& e : v2)
            if (e.mode == g.key) filtered.push_back(e);
        CHECK(g.counts.accuracy() == confusion(filtered).accuracy());
    }
    CHECK(total == 600);

    auto spans = breakdown(v2, "gaze_span_bucket");
    std::int64_t span_total = 0;
    for (const auto& g : spans) span_total += g.count;
    CHECK(span_total == 600);

    CHECK_THROWS_AS(breakdown(v2, "nope"), ConfigError);
}

TEST_CASE("gaze span buckets follow the published edges") {
    CHECK(gaze_span_bucket(0.0) == "span[0,5)");
    CHECK(gaze_span_bucket(4.999) == "span[0,5)");
    CHECK(gaze_span_bucket(5.0) == "span[5,20)");
    CHECK(gaze_span_bucket(19.999) == "span[5,20)");
    CHECK(gaze_span_bucket(20.0) == "span[20,inf)");
    CHECK(gaze_span_bucket(-1.0) == "span_unknown");
}

TEST_CASE("pr curve csv is well formed") {
    auto v = random_scored(12, 50, 0.5, true);
    std::string csv = pr_curve_csv(pr_curve(v));
    CHECK(csv.rfind("threshold,precision,recall\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') >= 2);
}
