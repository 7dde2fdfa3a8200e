#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gazeread/adam.hpp"
#include "gazeread/camera.hpp"
#include "gazeread/errors.hpp"
#include "gazeread/gaze.hpp"
#include "gazeread/jsonl.hpp"
#include "gazeread/ops.hpp"
#include "gazeread/rng.hpp"
#include "gazeread/scenario.hpp"
#include "gazeread/tape.hpp"

namespace gazeread {

enum class Modality : int { gaze = 0, rgb = 1, imu = 2 };

inline const char* to_string(Modality m) {
    switch (m) {
        case Modality::gaze: return "gaze";
        case Modality::rgb: return "rgb";
        case Modality::imu: return "imu";
    }
    return "?";
}

// ------------------------------------------------------------------- config

// Architecture + input contract. Every tensor shape is derivable from this
// record alone.
struct ModelConfig {
    int latent_dim = 32; // XS=8 S=16 M=32 L=64
    int n_transformer_layers = 3;
    int n_heads = 2;
    int conv_layers = 3;
    int gaze_kernel = 9; // shared with IMU
    int rgb_kernel = 5;
    int conv_stride = 2;
    int n_classes = 2;

    bool use_gaze = true, use_rgb = true, use_imu = true;
    GazeRepr gaze_repr = GazeRepr::velocity3d;
    double gaze_hz = 60.0;
    double imu_hz = 60.0;
    double duration_s = 2.0;
    int imu_dim = 6;
    int patch_px = 64;
    int channels = 3;

    int mlp_hidden() const { return 4 * latent_dim; }
    int gaze_dim() const { return repr_dim(gaze_repr); }
    std::int64_t gaze_samples() const { return std::llround(gaze_hz * duration_s); }
    std::int64_t imu_samples() const { return std::llround(imu_hz * duration_s); }

    std::int64_t conv_chain_len(std::int64_t len, int kernel) const {
        for (int i = 0; i < conv_layers; ++i) len = ops::conv_out_len(len, kernel, conv_stride, kernel / 2);
        return len;
    }
    std::int64_t gaze_tokens() const { return conv_chain_len(gaze_samples(), gaze_kernel); }
    std::int64_t imu_tokens() const { return conv_chain_len(imu_samples(), gaze_kernel); }
    std::int64_t rgb_side() const { return conv_chain_len(patch_px, rgb_kernel); }
    std::int64_t rgb_tokens() const { return rgb_side() * rgb_side(); }

    std::vector<Modality> enabled() const {
        std::vector<Modality> out;
        if (use_gaze) out.push_back(Modality::gaze);
        if (use_rgb) out.push_back(Modality::rgb);
        if (use_imu) out.push_back(Modality::imu);
        return out;
    }

    void validate() const {
        if (latent_dim < 1 || n_heads < 1 || latent_dim % n_heads != 0)
            throw ConfigError("model: latent dim must be divisible by head count");
        if (n_classes < 2) throw ConfigError("model: need at least 2 classes");
        if (!use_gaze && !use_rgb && !use_imu) throw ConfigError("model: no modality enabled");
        if (conv_layers < 1) throw ConfigError("model: conv layers must be >= 1");
        if (use_gaze && gaze_tokens() < 1) throw ConfigError("model: gaze window too short for the conv chain");
        if (use_imu && imu_tokens() < 1) throw ConfigError("model: imu window too short for the conv chain");
        if (use_rgb && rgb_side() < 1) throw ConfigError("model: patch too small for the conv chain");
    }

    // XS/S/M/L presets: 8/16/32/64 latent dims
    static ModelConfig preset(const std::string& size) {
        ModelConfig cfg;
        if (size == "xs") cfg.latent_dim = 8;
        else if (size == "s") cfg.latent_dim = 16;
        else if (size == "m") cfg.latent_dim = 32;
        else if (size == "l") cfg.latent_dim = 64;
        else throw ConfigError("unknown model size: " + size + " (want xs|s|m|l)");
        return cfg;
    }
};

inline json config_to_json(const ModelConfig& c) {
    json j;
    j["latent_dim"] = c.latent_dim;
    j["n_transformer_layers"] = c.n_transformer_layers;
    j["n_heads"] = c.n_heads;
    j["conv_layers"] = c.conv_layers;
    j["gaze_kernel"] = c.gaze_kernel;
    j["rgb_kernel"] = c.rgb_kernel;
    j["conv_stride"] = c.conv_stride;
    j["n_classes"] = c.n_classes;
    j["use_gaze"] = c.use_gaze;
    j["use_rgb"] = c.use_rgb;
    j["use_imu"] = c.use_imu;
    j["gaze_repr"] = repr_name(c.gaze_repr);
    j["gaze_hz"] = c.gaze_hz;
    j["imu_hz"] = c.imu_hz;
    j["duration_s"] = c.duration_s;
    j["imu_dim"] = c.imu_dim;
    j["patch_px"] = c.patch_px;
    j["channels"] = c.channels;
    return j;
}

inline ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.latent_dim = j.at("latent_dim").get<int>();
    c.n_transformer_layers = j.at("n_transformer_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.conv_layers = j.at("conv_layers").get<int>();
    c.gaze_kernel = j.at("gaze_kernel").get<int>();
    c.rgb_kernel = j.at("rgb_kernel").get<int>();
    c.conv_stride = j.at("conv_stride").get<int>();
    c.n_classes = j.at("n_classes").get<int>();
    c.use_gaze = j.at("use_gaze").get<bool>();
    c.use_rgb = j.at("use_rgb").get<bool>();
    c.use_imu = j.at("use_imu").get<bool>();
    c.gaze_repr = repr_from_name(j.at("gaze_repr").get<std::string>());
    c.gaze_hz = j.at("gaze_hz").get<double>();
    c.imu_hz = j.at("imu_hz").get<double>();
    c.duration_s = j.at("duration_s").get<double>();
    c.imu_dim = j.at("imu_dim").get<int>();
    c.patch_px = j.at("patch_px").get<int>();
    c.channels = j.at("channels").get<int>();
    c.validate();
    return c;
}

// -------------------------------------------------------------- shape plan

struct TensorSpec {
    std::string name;
    std::vector<std::int64_t> shape;
    enum class Init { he_uniform, zeros, ones, embedding } init;
};

// Single source of truth for parameter names, shapes, and init; param_count,
// init, and checkpoint validation all derive from it.
inline std::vector<TensorSpec> shape_plan(const ModelConfig& cfg) {
    cfg.validate();
    using Init = TensorSpec::Init;
    std::vector<TensorSpec> plan;
    const std::int64_t d = cfg.latent_dim;

    auto conv1d_stack = [&](const std::string& prefix, std::int64_t in_ch) {
        for (int i = 0; i < cfg.conv_layers; ++i) {
            std::int64_t ci = i == 0 ? in_ch : d;
            plan.push_back({prefix + ".conv" + std::to_string(i) + ".w", {d, ci, cfg.gaze_kernel}, Init::he_uniform});
            plan.push_back({prefix + ".conv" + std::to_string(i) + ".b", {d}, Init::zeros});
        }
    };
    if (cfg.use_gaze) conv1d_stack("enc.gaze", cfg.gaze_dim());
    if (cfg.use_rgb) {
        for (int i = 0; i < cfg.conv_layers; ++i) {
            std::int64_t ci = i == 0 ? cfg.channels : d;
            plan.push_back({"enc.rgb.conv" + std::to_string(i) + ".w", {d, ci, cfg.rgb_kernel, cfg.rgb_kernel},
                            Init::he_uniform});
            plan.push_back({"enc.rgb.conv" + std::to_string(i) + ".b", {d}, Init::zeros});
        }
    }
    if (cfg.use_imu) conv1d_stack("enc.imu", cfg.imu_dim);

    plan.push_back({"embed.cls", {d}, Init::embedding});
    if (cfg.use_gaze) {
        plan.push_back({"embed.type.gaze", {d}, Init::embedding});
        plan.push_back({"embed.pos.gaze", {cfg.gaze_tokens(), d}, Init::embedding});
    }
    if (cfg.use_rgb) {
        plan.push_back({"embed.type.rgb", {d}, Init::embedding});
        plan.push_back({"embed.pos.rgb", {cfg.rgb_tokens(), d}, Init::embedding});
    }
    if (cfg.use_imu) {
        plan.push_back({"embed.type.imu", {d}, Init::embedding});
        plan.push_back({"embed.pos.imu", {cfg.imu_tokens(), d}, Init::embedding});
    }

    for (int l = 0; l < cfg.n_transformer_layers; ++l) {
        std::string p = "tf" + std::to_string(l);
        plan.push_back({p + ".ln1.gamma", {d}, Init::ones});
        plan.push_back({p + ".ln1.beta", {d}, Init::zeros});
        for (const char* n : {"wq", "wk", "wv", "wo"}) plan.push_back({p + ".attn." + n, {d, d}, Init::he_uniform});
        for (const char* n : {"bq", "bk", "bv", "bo"}) plan.push_back({p + ".attn." + n, {d}, Init::zeros});
        plan.push_back({p + ".ln2.gamma", {d}, Init::ones});
        plan.push_back({p + ".ln2.beta", {d}, Init::zeros});
        plan.push_back({p + ".mlp.w1", {d, cfg.mlp_hidden()}, Init::he_uniform});
        plan.push_back({p + ".mlp.b1", {cfg.mlp_hidden()}, Init::zeros});
        plan.push_back({p + ".mlp.w2", {cfg.mlp_hidden(), d}, Init::he_uniform});
        plan.push_back({p + ".mlp.b2", {d}, Init::zeros});
    }

    plan.push_back({"head.ln.gamma", {d}, Init::ones});
    plan.push_back({"head.ln.beta", {d}, Init::zeros});
    plan.push_back({"head.w", {d, cfg.n_classes}, Init::he_uniform});
    plan.push_back({"head.b", {cfg.n_classes}, Init::zeros});
    return plan;
}

inline std::int64_t param_count(const ModelConfig& cfg) {
    std::int64_t n = 0;
    for (const auto& spec : shape_plan(cfg)) n += Tensor<float>::numel_of(spec.shape);
    return n;
}

// -------------------------------------------------------------- parameters

template <class Real>
struct ModelParams {
    std::vector<std::string> names;
    std::vector<Tensor<Real>> tensors;
    std::map<std::string, std::size_t> index;

    const Tensor<Real>& get(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw ConfigError("unknown parameter: " + name);
        return tensors[it->second];
    }

    std::int64_t total_params() const {
        std::int64_t n = 0;
        for (const auto& t : tensors) n += t.numel();
        return n;
    }

    template <class Other>
    ModelParams<Other> cast() const {
        ModelParams<Other> out;
        out.names = names;
        out.index = index;
        for (const auto& t : tensors) out.tensors.push_back(t.template cast<Other>());
        return out;
    }

    // Kaiming-uniform for convs/linears, ones/zeros for norm affine, small
    // normal for embeddings; one rng consumed in plan order
    static ModelParams init(const ModelConfig& cfg, std::uint64_t seed) {
        ModelParams p;
        CounterRng rng = make_rng(seed, RngStream::init);
        for (const auto& spec : shape_plan(cfg)) {
            Tensor<Real> t(spec.shape);
            switch (spec.init) {
                case TensorSpec::Init::zeros: break;
                case TensorSpec::Init::ones: std::fill(t.data.begin(), t.data.end(), Real(1)); break;
                case TensorSpec::Init::he_uniform: {
                    std::int64_t fan_in = 1;
                    for (std::size_t i = 1; i < spec.shape.size(); ++i) fan_in *= spec.shape[i];
                    if (spec.shape.size() == 2) fan_in = spec.shape[0]; // [in,out] linear
                    double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
                    for (auto& v : t.data) v = static_cast<Real>(rng.uniform(-bound, bound));
                    break;
                }
                case TensorSpec::Init::embedding:
                    for (auto& v : t.data) v = static_cast<Real>(rng.normal(0.0, 0.02));
                    break;
            }
            p.index[spec.name] = p.tensors.size();
            p.names.push_back(spec.name);
            p.tensors.push_back(std::move(t));
        }
        return p;
    }
};

// -------------------------------------------------------------- model input

// Model-ready tensors: gaze/imu are channel-major [d, L], rgb is [C, H, W]
// scaled to [-0.5, 0.5].
template <class Real>
struct ClipInput {
    std::optional<Tensor<Real>> gaze;
    std::optional<Tensor<Real>> rgb;
    std::optional<Tensor<Real>> imu;

    bool has(Modality m) const {
        switch (m) {
            case Modality::gaze: return gaze.has_value();
            case Modality::rgb: return rgb.has_value();
            case Modality::imu: return imu.has_value();
        }
        return false;
    }
    void drop(Modality m) {
        switch (m) {
            case Modality::gaze: gaze.reset(); break;
            case Modality::rgb: rgb.reset(); break;
            case Modality::imu: imu.reset(); break;
        }
    }
};

// Convert a stored gaze window (point3d at its native rate) into the
// representation and rate the model expects. 2D representations are
// normalized to half-image units.
template <class Real>
Tensor<Real> gaze_to_tensor(const GazeWindow& raw, const ModelConfig& cfg, const CameraModel& cam = {}) {
    GazeWindow w = raw;
    if (std::fabs(w.hz - cfg.gaze_hz) > 1e-9) w = resample(w, cfg.gaze_hz);
    bool want_2d = cfg.gaze_repr == GazeRepr::projection2d || cfg.gaze_repr == GazeRepr::velocity2d;
    if (want_2d && w.repr == GazeRepr::point3d) {
        w = project_window(w, cam);
        double half_w = cam.width / 2.0, half_h = cam.height / 2.0;
        for (std::int64_t i = 0; i < w.count(); ++i) {
            w.at(i, 0) = (w.at(i, 0) - half_w) / half_w;
            w.at(i, 1) = (w.at(i, 1) - half_h) / half_h;
        }
    }
    bool want_velocity = cfg.gaze_repr == GazeRepr::velocity3d || cfg.gaze_repr == GazeRepr::velocity2d;
    if (want_velocity && (w.repr == GazeRepr::point3d || w.repr == GazeRepr::projection2d)) w = differentiate(w);
    if (w.repr != cfg.gaze_repr)
        throw DataError(std::string("gaze window representation ") + repr_name(w.repr) +
                        " cannot provide model input " + repr_name(cfg.gaze_repr));
    std::int64_t n = w.count();
    if (n != cfg.gaze_samples()) throw ShapeError("gaze window sample count does not match model config");
    Tensor<Real> t({cfg.gaze_dim(), n});
    for (std::int64_t i = 0; i < n; ++i)
        for (int c = 0; c < w.dim(); ++c) t.at(c, i) = static_cast<Real>(w.at(i, c));
    return t;
}

template <class Real>
Tensor<Real> imu_to_tensor(const ImuWindow& raw, const ModelConfig& cfg) {
    const ImuWindow* src = &raw;
    ImuWindow resampled;
    if (std::fabs(raw.hz - cfg.imu_hz) > 1e-9) {
        double ratio = raw.hz / cfg.imu_hz;
        std::int64_t stride = std::llround(ratio);
        if (std::fabs(ratio - static_cast<double>(stride)) > 1e-9 || stride < 1)
            throw ConfigError("imu resample: target rate must divide the source rate");
        resampled.hz = cfg.imu_hz;
        resampled.duration_s = raw.duration_s;
        for (std::int64_t i = stride - 1; i < raw.count(); i += stride)
            for (int c = 0; c < ImuWindow::dim; ++c) resampled.samples.push_back(raw.at(i, c));
        src = &resampled;
    }
    std::int64_t n = src->count();
    if (n != cfg.imu_samples()) throw ShapeError("imu window sample count does not match model config");
    Tensor<Real> t({ImuWindow::dim, n});
    for (std::int64_t i = 0; i < n; ++i)
        for (int c = 0; c < ImuWindow::dim; ++c) t.at(c, i) = static_cast<Real>(src->at(i, c));
    return t;
}

template <class Real>
Tensor<Real> rgb_to_tensor(const RgbPatch& p, const ModelConfig& cfg) {
    if (p.h != cfg.patch_px || p.w != cfg.patch_px || p.c != cfg.channels)
        throw ShapeError("rgb patch does not match model config (no resizing)");
    Tensor<Real> t({cfg.channels, cfg.patch_px, cfg.patch_px});
    for (int ch = 0; ch < p.c; ++ch)
        for (int y = 0; y < p.h; ++y)
            for (int x = 0; x < p.w; ++x)
                t.at(ch, y, x) = static_cast<Real>(p.at(y, x, ch) / 255.0 - 0.5);
    return t;
}

template <class Real>
ClipInput<Real> assemble_input(const LabeledClip& clip, const ModelConfig& cfg, const CameraModel& cam = {}) {
    ClipInput<Real> in;
    if (cfg.use_gaze && clip.gaze) in.gaze = gaze_to_tensor<Real>(*clip.gaze, cfg, cam);
    if (cfg.use_rgb && clip.rgb) in.rgb = rgb_to_tensor<Real>(*clip.rgb, cfg);
    if (cfg.use_imu && clip.imu) in.imu = imu_to_tensor<Real>(*clip.imu, cfg);
    return in;
}

// ---------------------------------------------------------------- dropout

// Keep 1, 2, or 3 modalities with equal probability (clamped to what is
// available), then a uniform subset of that size. Never empty.
inline std::vector<Modality> modality_dropout(CounterRng& rng, std::vector<Modality> present) {
    if (present.empty()) throw ConfigError("modality_dropout: nothing available");
    int target = 1 + static_cast<int>(rng.next_below(3));
    target = std::min<int>(target, static_cast<int>(present.size()));
    // Fisher-Yates prefix
    for (int i = 0; i < target; ++i) {
        auto j = i + static_cast<int>(rng.next_below(present.size() - static_cast<std::size_t>(i)));
        std::swap(present[static_cast<std::size_t>(i)], present[static_cast<std::size_t>(j)]);
    }
    present.resize(static_cast<std::size_t>(target));
    std::sort(present.begin(), present.end());
    return present;
}

// ------------------------------------------------------------ forward pass

struct Prediction {
    std::vector<double> logits;
    std::vector<double> probs;

    int argmax() const {
        return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
    // binary confidence score: P(class 1) = P(reading)
    double score() const { return probs.size() == 2 ? probs[1] : probs[static_cast<std::size_t>(argmax())]; }
};

template <class Real>
struct ForwardHandle {
    Tape<Real> tape;
    std::vector<Var> param_vars; // parallel to ModelParams.tensors
    Var logits;                  // [1, k]
    Var loss;                    // valid when a label was supplied

    Prediction prediction() const {
        const auto& lv = tape.value(logits);
        Prediction p;
        p.logits.assign(lv.data.begin(), lv.data.end());
        double m = *std::max_element(p.logits.begin(), p.logits.end());
        double z = 0;
        for (double v : p.logits) z += std::exp(v - m);
        for (double v : p.logits) p.probs.push_back(std::exp(v - m) / z);
        return p;
    }
};

namespace model_detail {

template <class Real>
Var conv_encoder_1d(Tape<Real>& t, const ModelConfig& cfg, const std::map<std::string, Var>& pv,
                    const std::string& prefix, Var x) {
    Var h = x;
    for (int i = 0; i < cfg.conv_layers; ++i) {
        h = ops::conv1d(t, h, pv.at(prefix + ".conv" + std::to_string(i) + ".w"),
                        pv.at(prefix + ".conv" + std::to_string(i) + ".b"), cfg.conv_stride, cfg.gaze_kernel / 2);
        if (i + 1 < cfg.conv_layers) h = ops::gelu(t, h);
    }
    return ops::transpose2d(t, h); // [L', D] -> tokens
}

template <class Real>
Var conv_encoder_2d(Tape<Real>& t, const ModelConfig& cfg, const std::map<std::string, Var>& pv, Var x) {
    Var h = x;
    for (int i = 0; i < cfg.conv_layers; ++i) {
        h = ops::conv2d(t, h, pv.at("enc.rgb.conv" + std::to_string(i) + ".w"),
                        pv.at("enc.rgb.conv" + std::to_string(i) + ".b"), cfg.conv_stride, cfg.rgb_kernel / 2);
        if (i + 1 < cfg.conv_layers) h = ops::gelu(t, h);
    }
    // [D, s, s] -> [D, s*s] -> [s*s, D]
    const auto& hv = t.value(h);
    Var flat = ops::reshape(t, h, {hv.dim(0), hv.dim(1) * hv.dim(2)});
    return ops::transpose2d(t, flat);
}

template <class Real>
Var tag_tokens(Tape<Real>& t, const std::map<std::string, Var>& pv, Var tokens, const std::string& mod) {
    Var typed = ops::add_row(t, tokens, pv.at("embed.type." + mod));
    return ops::add(t, typed, pv.at("embed.pos." + mod));
}

} // namespace model_detail

// Standalone tokenizers (before type/positional embeddings).
template <class Real>
Tensor<Real> encode_gaze(const ModelParams<Real>& params, const ModelConfig& cfg, const Tensor<Real>& x) {
    require_shape(x, {cfg.gaze_dim(), cfg.gaze_samples()}, "encode_gaze");
    Tape<Real> t;
    std::map<std::string, Var> pv;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) pv[params.names[i]] = t.input(params.tensors[i]);
    return t.value(model_detail::conv_encoder_1d(t, cfg, pv, "enc.gaze", t.input(x)));
}

template <class Real>
Tensor<Real> encode_imu(const ModelParams<Real>& params, const ModelConfig& cfg, const Tensor<Real>& x) {
    require_shape(x, {cfg.imu_dim, cfg.imu_samples()}, "encode_imu");
    Tape<Real> t;
    std::map<std::string, Var> pv;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) pv[params.names[i]] = t.input(params.tensors[i]);
    return t.value(model_detail::conv_encoder_1d(t, cfg, pv, "enc.imu", t.input(x)));
}

template <class Real>
Tensor<Real> encode_rgb(const ModelParams<Real>& params, const ModelConfig& cfg, const Tensor<Real>& x) {
    require_shape(x, {cfg.channels, cfg.patch_px, cfg.patch_px}, "encode_rgb");
    Tape<Real> t;
    std::map<std::string, Var> pv;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) pv[params.names[i]] = t.input(params.tensors[i]);
    return t.value(model_detail::conv_encoder_2d(t, cfg, pv, t.input(x)));
}

// Encoders tokenize each present modality; absent modalities contribute no
// tokens at all (so outputs cannot depend on them), then a pre-norm
// transformer fuses [CLS; tokens...] and a linear head reads CLS.
template <class Real>
ForwardHandle<Real> forward(const ModelParams<Real>& params, const ModelConfig& cfg, const ClipInput<Real>& input,
                            int label = -1) {
    using namespace model_detail;
    cfg.validate();
    ForwardHandle<Real> h;
    Tape<Real>& t = h.tape;
    t.reserve(64 + params.tensors.size());

    std::map<std::string, Var> pv;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        Var v = t.input(params.tensors[i]);
        h.param_vars.push_back(v);
        pv[params.names[i]] = v;
    }

    std::vector<Var> blocks;
    Var cls = ops::reshape(t, pv.at("embed.cls"), {1, cfg.latent_dim});
    blocks.push_back(cls);
    if (input.gaze && cfg.use_gaze) {
        require_shape(*input.gaze, {cfg.gaze_dim(), cfg.gaze_samples()}, "gaze input");
        Var tok = conv_encoder_1d(t, cfg, pv, "enc.gaze", t.input(*input.gaze));
        blocks.push_back(tag_tokens(t, pv, tok, "gaze"));
    }
    if (input.rgb && cfg.use_rgb) {
        require_shape(*input.rgb, {cfg.channels, cfg.patch_px, cfg.patch_px}, "rgb input");
        Var tok = conv_encoder_2d(t, cfg, pv, t.input(*input.rgb));
        blocks.push_back(tag_tokens(t, pv, tok, "rgb"));
    }
    if (input.imu && cfg.use_imu) {
        require_shape(*input.imu, {cfg.imu_dim, cfg.imu_samples()}, "imu input");
        Var tok = conv_encoder_1d(t, cfg, pv, "enc.imu", t.input(*input.imu));
        blocks.push_back(tag_tokens(t, pv, tok, "imu"));
    }
    if (blocks.size() == 1) throw DataError("forward: no modality present in the input");

    Var x = ops::concat_rows(t, blocks);
    const Real eps = Real(1e-5);
    for (int l = 0; l < cfg.n_transformer_layers; ++l) {
        std::string p = "tf" + std::to_string(l);
        Var n1 = ops::layer_norm(t, x, pv.at(p + ".ln1.gamma"), pv.at(p + ".ln1.beta"), eps);
        ops::AttentionParams<Real> ap{pv.at(p + ".attn.wq"), pv.at(p + ".attn.bq"), pv.at(p + ".attn.wk"),
                                      pv.at(p + ".attn.bk"), pv.at(p + ".attn.wv"), pv.at(p + ".attn.bv"),
                                      pv.at(p + ".attn.wo"), pv.at(p + ".attn.bo")};
        x = ops::add(t, x, ops::multi_head_attention(t, n1, cfg.n_heads, ap));
        Var n2 = ops::layer_norm(t, x, pv.at(p + ".ln2.gamma"), pv.at(p + ".ln2.beta"), eps);
        Var m1 = ops::gelu(t, ops::linear(t, n2, pv.at(p + ".mlp.w1"), pv.at(p + ".mlp.b1")));
        x = ops::add(t, x, ops::linear(t, m1, pv.at(p + ".mlp.w2"), pv.at(p + ".mlp.b2")));
    }
    Var cls_out = ops::slice_rows(t, x, 0, 1);
    cls_out = ops::layer_norm(t, cls_out, pv.at("head.ln.gamma"), pv.at("head.ln.beta"), eps);
    h.logits = ops::linear(t, cls_out, pv.at("head.w"), pv.at("head.b"));
    if (label >= 0) h.loss = ops::softmax_cross_entropy(t, h.logits, label);
    return h;
}

template <class Real>
Prediction predict(const ModelParams<Real>& params, const ModelConfig& cfg, const ClipInput<Real>& input) {
    return forward(params, cfg, input).prediction();
}

} // namespace gazeread
