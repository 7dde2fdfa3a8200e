#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "gazeread/adam.hpp"
#include "gazeread/checkpoint.hpp"
#include "gazeread/errors.hpp"
#include "gazeread/metrics.hpp"
#include "gazeread/model.hpp"
#include "gazeread/scenario.hpp"
#include "gazeread/simulator.hpp"

namespace gazeread {

// ------------------------------------------------------------------- config

struct TrainConfig {
    double lr = 1e-3;
    int epochs = 10;
    int batch_size = 32;
    std::uint64_t seed = 42;
    Task task = Task::binary;
    bool dropout = true;        // modality dropout
    bool rotate_augment = true; // uniform quarter turns on gaze
    bool flip_augment = false;  // flip is an inference-time rtl tool by default
    double gaze_noise_sigma = 0.0;
    int threads = 0; // 0 -> hardware concurrency

    void validate() const {
        if (lr <= 0.0) throw ConfigError("train: lr must be > 0");
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
        if (gaze_noise_sigma < 0.0) throw ConfigError("train: noise sigma must be >= 0");
    }
};

inline json train_config_to_json(const TrainConfig& c) {
    json j;
    j["lr"] = c.lr;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["task"] = to_string(c.task);
    j["dropout"] = c.dropout;
    j["rotate_augment"] = c.rotate_augment;
    j["flip_augment"] = c.flip_augment;
    j["gaze_noise_sigma"] = c.gaze_noise_sigma;
    return j;
}

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val_acc = 0.0;
    std::string checkpoint_path;
    json config_echo;
    double wall_time_s = 0.0; // console-only; kept out of the report file so
                              // identical seeds produce identical bytes

    json to_json() const {
        json j;
        j["config"] = config_echo;
        json es = json::array();
        for (const auto& e : epochs)
            es.push_back(json{{"epoch", e.epoch},
                              {"train_loss", e.train_loss},
                              {"train_acc", e.train_acc},
                              {"val_acc", e.val_acc}});
        j["epochs"] = std::move(es);
        j["best_epoch"] = best_epoch;
        j["best_val_acc"] = best_val_acc;
        j["checkpoint"] = checkpoint_path;
        return j;
    }
};

// ------------------------------------------------------------ augmentation

// Training-time view of one clip: modality subset plus gaze-only transforms.
// Keyed by (seed, epoch, dataset index) so any prefetch or thread schedule
// sees the same choices.
template <class Real>
ClipInput<Real> training_input(const LabeledClip& clip, const ModelConfig& mcfg, const TrainConfig& tcfg,
                               int epoch, std::int64_t dataset_index, const CameraModel& cam = {}) {
    std::uint64_t salt = static_cast<std::uint64_t>(epoch) * 0x10001ULL + static_cast<std::uint64_t>(dataset_index);

    LabeledClip work = clip;
    if (work.gaze) {
        if (tcfg.rotate_augment) {
            CounterRng rng = make_rng(tcfg.seed, RngStream::rotate_augment, salt);
            work.gaze = rotate_gaze(*work.gaze, static_cast<int>(rng.next_below(4)));
        }
        if (tcfg.flip_augment) {
            CounterRng rng = make_rng(tcfg.seed, RngStream::flip_augment, salt);
            if (rng.next_double() < 0.5) work.gaze = flip_gaze(*work.gaze);
        }
        if (tcfg.gaze_noise_sigma > 0.0) {
            std::uint64_t noise_seed = make_rng(tcfg.seed, RngStream::gaze_noise, salt).next_u64();
            work.gaze = add_gaze_noise(*work.gaze, tcfg.gaze_noise_sigma, noise_seed);
        }
    }

    ClipInput<Real> in = assemble_input<Real>(work, mcfg, cam);
    if (tcfg.dropout) {
        std::vector<Modality> present;
        for (Modality m : {Modality::gaze, Modality::rgb, Modality::imu})
            if (in.has(m)) present.push_back(m);
        if (!present.empty()) {
            CounterRng rng = make_rng(tcfg.seed, RngStream::modality_dropout, salt);
            std::vector<Modality> kept = modality_dropout(rng, present);
            for (Modality m : present)
                if (std::find(kept.begin(), kept.end(), m) == kept.end()) in.drop(m);
        }
    }
    return in;
}

// ---------------------------------------------------------------- batching

// Per-epoch Fisher-Yates reshuffle; batches are contiguous chunks, the last
// one possibly short. Union of batches is the dataset exactly once.
inline std::vector<std::vector<std::int64_t>> make_batches(std::int64_t n, int batch_size, std::uint64_t seed,
                                                           int epoch) {
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    CounterRng rng = make_rng(seed, RngStream::shuffle, static_cast<std::uint64_t>(epoch));
    for (std::int64_t i = n; i > 1; --i)
        std::swap(order[static_cast<std::size_t>(i - 1)], order[static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(i)))]);
    std::vector<std::vector<std::int64_t>> batches;
    for (std::int64_t at = 0; at < n; at += batch_size) {
        std::int64_t hi = std::min<std::int64_t>(at + batch_size, n);
        batches.emplace_back(order.begin() + at, order.begin() + hi);
    }
    return batches;
}

namespace train_detail {

// index-parallel map with a deterministic result layout
template <class Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
    int hw = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (hw == 1 || n <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::int64_t> next{0};
    for (int w = 0; w < hw; ++w)
        pool.emplace_back([&] {
            for (;;) {
                std::int64_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    for (auto& th : pool) th.join();
}

} // namespace train_detail

// ------------------------------------------------------------------- scoring

// Deterministic evaluation pass: no dropout, no augmentation.
template <class Real>
std::vector<ScoredExample> score_dataset(const ModelParams<Real>& params, const ModelConfig& cfg,
                                         const std::vector<LabeledClip>& clips, Task task,
                                         const CameraModel& cam = {}, int threads = 0) {
    std::vector<ScoredExample> out(clips.size());
    train_detail::parallel_for(static_cast<std::int64_t>(clips.size()), threads, [&](std::int64_t i) {
        const auto& clip = clips[static_cast<std::size_t>(i)];
        ClipInput<Real> in = assemble_input<Real>(clip, cfg, cam);
        Prediction p = predict(params, cfg, in);
        ScoredExample& e = out[static_cast<std::size_t>(i)];
        e.probs = p.probs;
        e.score = p.score();
        e.label = class_index(clip.meta, task);
        e.scenario = clip.meta.scenario_tag();
        e.medium = to_string(clip.meta.medium);
        e.mode = to_string(clip.meta.mode);
        if (clip.gaze && clip.gaze->repr == GazeRepr::point3d)
            e.gaze_span_deg = gaze_span_deg(project_window(*clip.gaze, cam), cam);
    });
    return out;
}

// ------------------------------------------------------------------ training

template <class Real>
struct TrainResult {
    ModelParams<Real> params;      // best-val parameters
    ModelParams<Real> last_params; // after the final epoch
    TrainReport report;
};

// Adam over shuffled minibatches with modality dropout and gaze
// augmentation. Per-example gradients are computed in parallel but reduced
// in example order, so the checkpoint is a pure function of (data, configs).
template <class Real>
TrainResult<Real> train(const std::vector<LabeledClip>& train_clips, const std::vector<LabeledClip>& val_clips,
                        const ModelConfig& mcfg, const TrainConfig& tcfg, const std::string& checkpoint_path = "",
                        const CameraModel& cam = {}) {
    tcfg.validate();
    mcfg.validate();
    if (train_clips.empty() || val_clips.empty()) throw DataError("train: datasets must be non-empty");
    const int k = class_count(tcfg.task);
    if (k != mcfg.n_classes) throw ConfigError("train: model class count does not match the task");
    for (const auto& c : train_clips)
        if (class_index(c.meta, tcfg.task) >= k) throw DataError("train: label out of range in " + c.id);

    auto t0 = std::chrono::steady_clock::now();
    TrainResult<Real> result;
    result.params = ModelParams<Real>::init(mcfg, tcfg.seed);
    ModelParams<Real>& params = result.params;

    AdamState<Real> opt;
    opt.lr = static_cast<Real>(tcfg.lr);
    opt.init(params.tensors);

    result.report.config_echo = json{{"model", config_to_json(mcfg)}, {"train", train_config_to_json(tcfg)}};

    ModelParams<Real> best = params;
    double best_val = -1.0;
    int best_epoch = -1;

    const std::int64_t n = static_cast<std::int64_t>(train_clips.size());
    std::vector<Tensor<Real>> grad_sum;
    for (const auto& t : params.tensors) grad_sum.push_back(Tensor<Real>::zeros(t.shape));

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::int64_t correct = 0;
        auto batches = make_batches(n, tcfg.batch_size, tcfg.seed, epoch);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto& batch = batches[b];
            const auto bsz = static_cast<std::int64_t>(batch.size());

            struct PerExample {
                std::vector<Tensor<Real>> grads;
                double loss = 0.0;
                bool correct = false;
            };
            std::vector<PerExample> results(static_cast<std::size_t>(bsz));
            train_detail::parallel_for(bsz, tcfg.threads, [&](std::int64_t bi) {
                std::int64_t idx = batch[static_cast<std::size_t>(bi)];
                const LabeledClip& clip = train_clips[static_cast<std::size_t>(idx)];
                int label = class_index(clip.meta, tcfg.task);
                ClipInput<Real> in = training_input<Real>(clip, mcfg, tcfg, epoch, idx, cam);
                auto h = forward(params, mcfg, in, label);
                h.tape.backward(h.loss);
                PerExample& r = results[static_cast<std::size_t>(bi)];
                r.loss = static_cast<double>(h.tape.value(h.loss).data[0]);
                Prediction p = h.prediction();
                r.correct = p.argmax() == label;
                r.grads.reserve(h.param_vars.size());
                for (Var v : h.param_vars) r.grads.push_back(h.tape.grad(v));
            });

            // reduce in example order: result independent of thread count
            for (auto& g : grad_sum) std::fill(g.data.begin(), g.data.end(), Real(0));
            for (const auto& r : results) {
                loss_sum += r.loss;
                correct += r.correct;
                for (std::size_t t = 0; t < grad_sum.size(); ++t)
                    for (std::size_t j = 0; j < grad_sum[t].data.size(); ++j)
                        grad_sum[t].data[j] += r.grads[t].data[j];
            }
            Real inv = Real(1) / static_cast<Real>(bsz);
            for (auto& g : grad_sum)
                for (auto& v : g.data) v *= inv;

            double batch_loss = 0.0;
            for (const auto& r : results) batch_loss += r.loss;
            if (!std::isfinite(batch_loss))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1) + " batch " +
                                   std::to_string(b + 1) + " (lr too high or bad data)");

            adam_step(params.tensors, grad_sum, opt);
        }

        EpochStats es;
        es.epoch = epoch + 1;
        es.train_loss = loss_sum / static_cast<double>(n);
        es.train_acc = static_cast<double>(correct) / static_cast<double>(n);

        auto val_scored = score_dataset(params, mcfg, val_clips, tcfg.task, cam, tcfg.threads);
        std::int64_t val_correct = 0;
        for (const auto& e : val_scored) val_correct += e.predicted_class() == e.label;
        es.val_acc = static_cast<double>(val_correct) / static_cast<double>(val_scored.size());
        result.report.epochs.push_back(es);

        if (es.val_acc > best_val) {
            best_val = es.val_acc;
            best_epoch = epoch + 1;
            best = params;
        }
        if (!checkpoint_path.empty()) save_checkpoint(params, mcfg, checkpoint_path + ".last", tcfg.seed);
    }

    result.report.best_epoch = best_epoch;
    result.report.best_val_acc = best_val;
    result.last_params = params;
    result.params = best;
    if (!checkpoint_path.empty()) {
        save_checkpoint(result.params, mcfg, checkpoint_path, tcfg.seed);
        result.report.checkpoint_path = checkpoint_path;
    }
    result.report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

} // namespace gazeread
