#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gazeread/errors.hpp"
#include "gazeread/jsonl.hpp"

namespace gazeread {

// One evaluated example. score is the binary confidence (P of class 1);
// probs carries the full distribution for multiclass tasks.
struct ScoredExample {
    double score = 0.0;
    std::vector<double> probs;
    int label = 0;
    std::string scenario, medium, mode;
    double gaze_span_deg = -1.0; // negative: unknown

    int predicted_class() const {
        if (probs.empty()) return score >= 0.5 ? 1 : 0;
        return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
};

// ----------------------------------------------------------------- confusion

// Scores equal to the threshold count as positive (>= convention, shared
// with every threshold sweep below).
struct ConfusionCounts {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    bool degenerate_f1 = false; // precision+recall was 0

    std::int64_t total() const { return tp + fp + tn + fn; }
    double accuracy() const { return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0; }
    double precision() const { return (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0; }
    double recall() const { return (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
    double f1() const {
        double p = precision(), r = recall();
        return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
};

inline ConfusionCounts confusion(const std::vector<ScoredExample>& scored, double threshold = 0.5) {
    ConfusionCounts c;
    for (const auto& e : scored) {
        bool pos = e.score >= threshold;
        if (e.label == 1)
            pos ? ++c.tp : ++c.fn;
        else
            pos ? ++c.fp : ++c.tn;
    }
    c.degenerate_f1 = (c.precision() + c.recall()) == 0.0;
    return c;
}

// ----------------------------------------------------------------- PR curve

struct PrPoint {
    double threshold = 0.0, precision = 0.0, recall = 0.0;
};

// One point per distinct score, thresholds descending; the lowest threshold
// point has recall 1 by construction.
struct PrCurve {
    std::vector<PrPoint> points;
};

inline PrCurve pr_curve(const std::vector<ScoredExample>& scored) {
    std::int64_t total_pos = 0;
    for (const auto& e : scored) total_pos += e.label == 1;
    if (total_pos == 0) throw DataError("pr_curve: no positive examples, metric undefined");

    std::vector<std::pair<double, int>> by_score; // (score, label)
    by_score.reserve(scored.size());
    for (const auto& e : scored) by_score.emplace_back(e.score, e.label);
    std::sort(by_score.begin(), by_score.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    PrCurve curve;
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < by_score.size(); ++i) {
        tp += by_score[i].second == 1;
        fp += by_score[i].second != 1;
        bool last_of_threshold = (i + 1 == by_score.size()) || (by_score[i + 1].first != by_score[i].first);
        if (last_of_threshold) {
            PrPoint p;
            p.threshold = by_score[i].first;
            p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
            p.recall = static_cast<double>(tp) / static_cast<double>(total_pos);
            curve.points.push_back(p);
        }
    }
    return curve;
}

// Trapezoid over recall, anchored at (recall 0, precision of the highest
// threshold point).
inline double auc(const PrCurve& curve) {
    if (curve.points.empty()) throw DataError("auc: empty curve");
    double area = 0.0, prev_r = 0.0, prev_p = curve.points.front().precision;
    for (const auto& pt : curve.points) {
        area += (pt.recall - prev_r) * (pt.precision + prev_p) / 2.0;
        prev_r = pt.recall;
        prev_p = pt.precision;
    }
    return area;
}

struct PrecisionAtRecall {
    double precision = 0.0;
    double threshold = 0.0;
    double recall = 0.0;
};

// Highest threshold whose recall reaches r; points are descending in
// threshold so the first hit wins.
inline PrecisionAtRecall precision_at_recall(const std::vector<ScoredExample>& scored, double r = 0.9) {
    PrCurve curve = pr_curve(scored);
    for (const auto& pt : curve.points)
        if (pt.recall >= r) return {pt.precision, pt.threshold, pt.recall};
    // recall 1 is always reached at the lowest threshold
    const auto& last = curve.points.back();
    return {last.precision, last.threshold, last.recall};
}

// ---------------------------------------------------------------- multiclass

// Row-normalized confusion: rows are ground truth, columns argmax
// predictions; rows of empty classes stay all-zero.
inline std::vector<std::vector<double>> multiclass_confusion(const std::vector<ScoredExample>& scored, int k) {
    std::vector<std::vector<double>> m(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(k), 0.0));
    std::vector<std::int64_t> row_n(static_cast<std::size_t>(k), 0);
    for (const auto& e : scored) {
        if (e.label < 0 || e.label >= k) throw DataError("multiclass_confusion: label out of range");
        int pred = e.predicted_class();
        if (pred < 0 || pred >= k) throw DataError("multiclass_confusion: prediction out of range");
        m[static_cast<std::size_t>(e.label)][static_cast<std::size_t>(pred)] += 1.0;
        row_n[static_cast<std::size_t>(e.label)] += 1;
    }
    for (int i = 0; i < k; ++i)
        if (row_n[static_cast<std::size_t>(i)])
            for (int j = 0; j < k; ++j)
                m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] /=
                    static_cast<double>(row_n[static_cast<std::size_t>(i)]);
    return m;
}

// mean of per-class recalls over non-empty classes
inline double balanced_accuracy(const std::vector<ScoredExample>& scored, int k) {
    auto m = multiclass_confusion(scored, k);
    std::vector<bool> nonempty(static_cast<std::size_t>(k), false);
    for (const auto& e : scored) nonempty[static_cast<std::size_t>(e.label)] = true;
    double sum = 0.0;
    int classes = 0;
    for (int i = 0; i < k; ++i)
        if (nonempty[static_cast<std::size_t>(i)]) {
            sum += m[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
            ++classes;
        }
    return classes ? sum / classes : 0.0;
}

// ----------------------------------------------------------------- breakdown

inline std::string gaze_span_bucket(double span_deg) {
    if (span_deg < 0.0) return "span_unknown";
    if (span_deg < 5.0) return "span[0,5)";
    if (span_deg < 20.0) return "span[5,20)";
    return "span[20,inf)";
}

struct GroupMetrics {
    std::string key;
    std::int64_t count = 0;
    ConfusionCounts counts;
};

// key is one of scenario | medium | mode | gaze_span_bucket
inline std::vector<GroupMetrics> breakdown(const std::vector<ScoredExample>& scored, const std::string& key,
                                           double threshold = 0.5) {
    auto key_of = [&](const ScoredExample& e) -> std::string {
        if (key == "scenario") return e.scenario;
        if (key == "medium") return e.medium;
        if (key == "mode") return e.mode;
        if (key == "gaze_span_bucket") return gaze_span_bucket(e.gaze_span_deg);
        throw ConfigError("unknown breakdown key: " + key + " (want scenario|medium|mode|gaze_span_bucket)");
    };
    std::map<std::string, std::vector<ScoredExample>> groups;
    for (const auto& e : scored) groups[key_of(e)].push_back(e);
    std::vector<GroupMetrics> out;
    for (auto& [k, v] : groups) {
        GroupMetrics g;
        g.key = k;
        g.count = static_cast<std::int64_t>(v.size());
        g.counts = confusion(v, threshold);
        out.push_back(std::move(g));
    }
    return out;
}

// ------------------------------------------------------------------ reports

inline json confusion_to_json(const ConfusionCounts& c) {
    return json{{"tp", c.tp},
                {"fp", c.fp},
                {"tn", c.tn},
                {"fn", c.fn},
                {"accuracy", c.accuracy()},
                {"precision", c.precision()},
                {"recall", c.recall()},
                {"f1", c.f1()},
                {"degenerate_f1", c.degenerate_f1}};
}

inline std::string pr_curve_csv(const PrCurve& curve) {
    std::string out = "threshold,precision,recall\n";
    char buf[96];
    for (const auto& p : curve.points) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", p.threshold, p.precision, p.recall);
        out += buf;
    }
    return out;
}

} // namespace gazeread
