#include <catch2/catch_amalgamated.hpp>

#include "gazeread/adam.hpp"
#include "gazeread/ops.hpp"
#include "gazeread/rng.hpp"
#include "gazeread/tape.hpp"

#include "test_util.hpp"

using namespace gazeread;
using testutil::BuildFn;
using testutil::random_tensor;
using testutil::TapeEval;

namespace {

// reduce an op output to a scalar with fixed random weights so finite
// differences see every output coordinate
Var weighted_sum(Tape<double>& t, Var y, std::uint64_t seed) {
    const auto& yv = t.value(y);
    CounterRng rng(seed, 999);
    Tensor<double> w({yv.numel(), 1});
    for (auto& v : w.data) v = rng.uniform(-1.0, 1.0);
    Var flat = ops::reshape(t, y, {1, yv.numel()});
    return ops::matmul(t, flat, t.input(std::move(w)));
}

} // namespace

TEST_CASE("linear forward examples") {
    Tape<double> t;
    // identity
    Var x = t.input(Tensor<double>({1, 2}, {1, 0}));
    Var w = t.input(Tensor<double>({2, 2}, {1, 0, 0, 1}));
    Var b = t.input(Tensor<double>({2}, {0, 0}));
    Var y = ops::linear(t, x, w, b);
    CHECK(t.value(y).data == std::vector<double>{1, 0});

    // hand-computed
    Var x2 = t.input(Tensor<double>({1, 2}, {1, 2}));
    Var w2 = t.input(Tensor<double>({2, 1}, {1, 1}));
    Var b2 = t.input(Tensor<double>({1}, {1}));
    Var y2 = ops::linear(t, x2, w2, b2);
    CHECK(t.value(y2).data[0] == Catch::Approx(4.0));

    // inner dimension mismatch
    Var w3 = t.input(Tensor<double>({3, 1}, {1, 1, 1}));
    CHECK_THROWS_AS(ops::linear(t, x, w3, b2), ShapeError);
    // bias length mismatch
    CHECK_THROWS_AS(ops::linear(t, x2, w, b2), ShapeError);
}

TEST_CASE("linear gradients vs finite differences") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        CounterRng rng(seed, 1);
        auto build = [seed](const std::vector<Tensor<double>>& xs, bool want) {
            Tape<double> t;
            Var x = t.input(xs[0]), w = t.input(xs[1]), b = t.input(xs[2]);
            Var loss = weighted_sum(t, ops::linear(t, x, w, b), seed);
            TapeEval out;
            out.loss = t.value(loss).data[0];
            if (want) {
                t.backward(loss);
                out.grads = {t.grad(x), t.grad(w), t.grad(b)};
            }
            return out;
        };
        double err = testutil::gradcheck_max_err(
            build, {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng), random_tensor({2}, rng)});
        INFO("seed " << seed);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("conv1d forward examples") {
    Tape<double> t;
    // identity kernel
    Var x = t.input(Tensor<double>({1, 3}, {1, 2, 3}));
    Var k = t.input(Tensor<double>({1, 1, 1}, {1}));
    Var b = t.input(Tensor<double>({1}, {0}));
    Var y = ops::conv1d(t, x, k, b, 1, 0);
    CHECK(t.value(y).data == std::vector<double>{1, 2, 3});

    // box kernel
    Var x2 = t.input(Tensor<double>({1, 4}, {1, 1, 1, 1}));
    Var k2 = t.input(Tensor<double>({1, 1, 2}, {1, 1}));
    Var y2 = ops::conv1d(t, x2, k2, b, 1, 0);
    CHECK(t.value(y2).shape == std::vector<std::int64_t>{1, 3});
    CHECK(t.value(y2).data == std::vector<double>{2, 2, 2});

    // kernel larger than padded input
    Var k3 = t.input(Tensor<double>({1, 1, 6}, {1, 1, 1, 1, 1, 1}));
    CHECK_THROWS_AS(ops::conv1d(t, x2, k3, b, 1, 0), ShapeError);
}

TEST_CASE("conv1d output length formula") {
    // 120 samples, kernel 9, stride 2, pad 4 -> 60 -> 30 -> 15
    CHECK(ops::conv_out_len(120, 9, 2, 4) == 60);
    CHECK(ops::conv_out_len(60, 9, 2, 4) == 30);
    CHECK(ops::conv_out_len(30, 9, 2, 4) == 15);
    CHECK(ops::conv_out_len(64, 5, 2, 2) == 32);
    CHECK(ops::conv_out_len(32, 5, 2, 2) == 16);
    CHECK(ops::conv_out_len(16, 5, 2, 2) == 8);
}

TEST_CASE("conv1d gradients vs finite differences") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        CounterRng rng(seed, 2);
        auto build = [seed](const std::vector<Tensor<double>>& xs, bool want) {
            Tape<double> t;
            Var x = t.input(xs[0]), k = t.input(xs[1]), b = t.input(xs[2]);
            Var loss = weighted_sum(t, ops::conv1d(t, x, k, b, 2, 3), seed);
            TapeEval out;
            out.loss = t.value(loss).data[0];
            if (want) {
                t.backward(loss);
                out.grads = {t.grad(x), t.grad(k), t.grad(b)};
            }
            return out;
        };
        double err = testutil::gradcheck_max_err(
            build, {random_tensor({2, 11}, rng), random_tensor({3, 2, 5}, rng), random_tensor({3}, rng)});
        INFO("seed " << seed);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("conv2d forward examples") {
    Tape<double> t;
    // 1x1 identity kernel
    Var x = t.input(Tensor<double>({1, 2, 2}, {1, 2, 3, 4}));
    Var k = t.input(Tensor<double>({1, 1, 1, 1}, {1}));
    Var b = t.input(Tensor<double>({1}, {0}));
    Var y = ops::conv2d(t, x, k, b, 1, 0);
    CHECK(t.value(y).data == std::vector<double>{1, 2, 3, 4});

    // all-ones 2x2 kernel over all-ones 3x3 -> 2x2 of 4s
    Var x2 = t.input(Tensor<double>::full({1, 3, 3}, 1.0));
    Var k2 = t.input(Tensor<double>::full({1, 1, 2, 2}, 1.0));
    Var y2 = ops::conv2d(t, x2, k2, b, 1, 0);
    CHECK(t.value(y2).shape == std::vector<std::int64_t>{1, 2, 2});
    CHECK(t.value(y2).data == std::vector<double>{4, 4, 4, 4});
}

TEST_CASE("conv2d gradients vs finite differences") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        CounterRng rng(seed, 3);
        auto build = [seed](const std::vector<Tensor<double>>& xs, bool want) {
            Tape<double> t;
            Var x = t.input(xs[0]), k = t.input(xs[1]), b = t.input(xs[2]);
            Var loss = weighted_sum(t, ops::conv2d(t, x, k, b, 2, 1), seed);
            TapeEval out;
            out.loss = t.value(loss).data[0];
            if (want) {
                t.backward(loss);
                out.grads = {t.grad(x), t.grad(k), t.grad(b)};
            }
            return out;
        };
        double err = testutil::gradcheck_max_err(
            build, {random_tensor({2, 6, 7}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)});
        INFO("seed " << seed);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("layer_norm forward examples") {
    Tape<double> t;
    Var g = t.input(Tensor<double>({4}, {1, 1, 1, 1}));
    Var b = t.input(Tensor<double>({4}, {0, 0, 0, 0}));
    // constant row -> zeros
    Var x = t.input(Tensor<double>::full({1, 4}, 3.7));
    Var y = ops::layer_norm(t, x, g, b, 1e-5);
    for (double v : t.value(y).data) CHECK(std::fabs(v) < 1e-9);

    // already normalized stays put as eps -> 0
    Var g2 = t.input(Tensor<double>({2}, {1, 1}));
    Var b2 = t.input(Tensor<double>({2}, {0, 0}));
    Var x2 = t.input(Tensor<double>({1, 2}, {1, -1}));
    Var y2 = ops::layer_norm(t, x2, g2, b2, 1e-12);
    CHECK(t.value(y2).data[0] == Catch::Approx(1.0).epsilon(1e-6));
    CHECK(t.value(y2).data[1] == Catch::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("layer_norm gradients vs finite differences") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        CounterRng rng(seed, 4);
        auto build = [seed](const std::vector<Tensor<double>>& xs, bool want) {
            Tape<double> t;
            Var x = t.input(xs[0]), g = t.input(xs[1]), b = t.input(xs[2]);
            Var loss = weighted_sum(t, ops::layer_norm(t, x, g, b, 1e-5), seed);
            TapeEval out;
            out.loss = t.value(loss).data[0];
            if (want) {
                t.backward(loss);
                out.grads = {t.grad(x), t.grad(g), t.grad(b)};
            }
            return out;
        };
        double err = testutil::gradcheck_max_err(
            build, {random_tensor({3, 6}, rng), random_tensor({6}, rng, 0.5, 1.5), random_tensor({6}, rng)});
        INFO("seed " << seed);
        CHECK(err < 1e-4);
    }
}

namespace {

ops::AttentionParams<double> random_attention(Tape<double>& t, std::int64_t d, CounterRng& rng) {
    auto mk = [&](std::vector<std::int64_t> s) { return t.input(random_tensor(std::move(s), rng, -0.5, 0.5)); };
    return {mk({d, d}), mk({d}), mk({d, d}), mk({d}), mk({d, d}), mk({d}), mk({d, d}), mk({d})};
}

} // namespace

TEST_CASE("attention single token: weight is exactly one") {
    CounterRng rng(11, 5);
    Tape<double> t;
    auto p = random_attention(t, 4, rng);
    Var x = t.input(random_tensor({1, 4}, rng));
    Var y = ops::multi_head_attention(t, x, 2, p);
    // with one token, softmax weight is 1 and output = Wo . (Wv x + bv) + bo
    Var v = ops::linear(t, x, p.wv, p.bv);
    Var want = ops::linear(t, v, p.wo, p.bo);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(t.value(y).data[i] == Catch::Approx(t.value(want).data[i]).margin(1e-12));
}

TEST_CASE("attention identical tokens: uniform weights") {
    CounterRng rng(12, 5);
    Tape<double> t;
    auto p = random_attention(t, 6, rng);
    Tensor<double> row = random_tensor({1, 6}, rng);
    Tensor<double> x({5, 6});
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 6; ++j) x.at(i, j) = row.at(0, j);
    Var xv = t.input(x);
    Var y = ops::multi_head_attention(t, xv, 3, p);
    // uniform weights over identical value rows reproduce the single-token case
    Var one = t.input(row);
    Var want = ops::multi_head_attention(t, one, 3, p);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 6; ++j)
            CHECK(t.value(y).at(i, j) == Catch::Approx(t.value(want).at(0, j)).margin(1e-10));
}

TEST_CASE("attention rejects indivisible head count") {
    CounterRng rng(13, 5);
    Tape<double> t;
    auto p = random_attention(t, 6, rng);
    Var x = t.input(random_tensor({3, 6}, rng));
    CHECK_THROWS_AS(ops::multi_head_attention(t, x, 4, p), ConfigError);
}

TEST_CASE("attention gradients vs finite differences") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        CounterRng rng(seed, 6);
        std::vector<Tensor<double>> xs;
        xs.push_back(random_tensor({4, 6}, rng));                       // x
        for (int i = 0; i < 4; ++i) {                                   // wq..wo with biases
            xs.push_back(random_tensor({6, 6}, rng, -0.5, 0.5));
            xs.push_back(random_tensor({6}, rng, -0.1, 0.1));
        }
        auto build = [seed](const std::vector<Tensor<double>>& in, bool want) {
            Tape<double> t;
            std::vector<Var> vars;
            for (const auto& x : in) vars.push_back(t.input(x));
            ops::AttentionParams<double> p{vars[1], vars[2], vars[3], vars[4],
                                           vars[5], vars[6], vars[7], vars[8]};
            Var loss = weighted_sum(t, ops::multi_head_attention(t, vars[0], 2, p), seed);
            TapeEval out;
            out.loss = t.value(loss).data[0];
            if (want) {
                t.backward(loss);
                for (Var v : vars) out.grads.push_back(t.grad(v));
            }
            return out;
        };
        double err = testutil::gradcheck_max_err(build, xs);
        INFO("seed " << seed);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("softmax cross entropy examples") {
    Tape<double> t;
    Var l1 = t.input(Tensor<double>({2}, {0, 0}));
    Var loss1 = ops::softmax_cross_entropy(t, l1, 0);
    CHECK(t.value(loss1).data[0] == Catch::Approx(std::log(2.0)));

    // large logit gap must not overflow
    Var l2 = t.input(Tensor<double>({2}, {1000, 0}));
    Var loss2 = ops::softmax_cross_entropy(t, l2, 0);
    CHECK(t.value(loss2).data[0] == Catch::Approx(0.0).margin(1e-9));
    CHECK(std::isfinite(t.value(loss2).data[0]));

    CHECK_THROWS_AS(ops::softmax_cross_entropy(t, l1, 5), DataError);
}

TEST_CASE("softmax cross entropy gradient is softmax minus one-hot") {
    CounterRng rng(21, 7);
    Tensor<double> logits = random_tensor({5}, rng, -2.0, 2.0);
    Tape<double> t;
    Var l = t.input(logits);
    Var loss = ops::softmax_cross_entropy(t, l, 2);
    t.backward(loss);
    const auto& g = t.grad(l);
    // analytic softmax
    double m = *std::max_element(logits.data.begin(), logits.data.end());
    double z = 0;
    for (double v : logits.data) z += std::exp(v - m);
    for (int j = 0; j < 5; ++j) {
        double p = std::exp(logits.data[static_cast<std::size_t>(j)] - m) / z;
        double want = p - (j == 2 ? 1.0 : 0.0);
        CHECK(g.data[static_cast<std::size_t>(j)] == Catch::Approx(want).margin(1e-12));
    }

    // and against finite differences
    auto build = [](const std::vector<Tensor<double>>& xs, bool want) {
        Tape<double> tp;
        Var lv = tp.input(xs[0]);
        Var lo = ops::softmax_cross_entropy(tp, lv, 2);
        TapeEval out;
        out.loss = tp.value(lo).data[0];
        if (want) {
            tp.backward(lo);
            out.grads = {tp.grad(lv)};
        }
        return out;
    };
    CHECK(testutil::gradcheck_max_err(build, {logits}) < 1e-4);
}

TEST_CASE("softmax rows live on the simplex") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CounterRng rng(seed, 8);
        Tape<double> t;
        Var x = t.input(random_tensor({4, 7}, rng, -30.0, 30.0));
        Var y = ops::softmax_rows(t, x);
        const auto& yv = t.value(y);
        for (int i = 0; i < 4; ++i) {
            double sum = 0;
            for (int j = 0; j < 7; ++j) {
                CHECK(yv.at(i, j) >= 0.0);
                sum += yv.at(i, j);
            }
            CHECK(std::fabs(sum - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("forward determinism: identical inputs give identical bits") {
    CounterRng rng(31, 9);
    Tensor<double> x = random_tensor({2, 9}, rng);
    Tensor<double> k = random_tensor({4, 2, 3}, rng);
    Tensor<double> b = random_tensor({4}, rng);
    auto run = [&] {
        Tape<double> t;
        Var y = ops::conv1d(t, t.input(x), t.input(k), t.input(b), 2, 1);
        Var z = ops::gelu(t, y);
        return t.value(z).data;
    };
    CHECK(run() == run());
}

TEST_CASE("gelu and elementwise gradients") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        CounterRng rng(seed, 10);
        auto build = [seed](const std::vector<Tensor<double>>& xs, bool want) {
            Tape<double> t;
            Var a = t.input(xs[0]), b = t.input(xs[1]);
            Var y = ops::gelu(t, ops::add(t, a, b));
            Var loss = weighted_sum(t, ops::scale(t, y, 1.7), seed);
            TapeEval out;
            out.loss = t.value(loss).data[0];
            if (want) {
                t.backward(loss);
                out.grads = {t.grad(a), t.grad(b)};
            }
            return out;
        };
        CounterRng rng_a(seed, 11), rng_b(seed + 50, 11);
        double err = testutil::gradcheck_max_err(
            build, {random_tensor({3, 5}, rng_a), random_tensor({3, 5}, rng_b)});
        INFO("seed " << seed);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("shape plumbing gradients (reshape/transpose/slice/concat)") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        CounterRng rng(seed, 12);
        auto build = [seed](const std::vector<Tensor<double>>& xs, bool want) {
            Tape<double> t;
            Var a = t.input(xs[0]); // [4,6]
            Var b = t.input(xs[1]); // [2,6]
            Var cat = ops::concat_rows(t, {a, b});                   // [6,6]
            Var tr = ops::transpose2d(t, cat);                       // [6,6]
            Var sl = ops::slice_cols(t, tr, 1, 5);                   // [6,4]
            Var sr = ops::slice_rows(t, sl, 0, 3);                   // [3,4]
            Var rs = ops::reshape(t, sr, {4, 3});
            Var loss = weighted_sum(t, rs, seed);
            TapeEval out;
            out.loss = t.value(loss).data[0];
            if (want) {
                t.backward(loss);
                out.grads = {t.grad(a), t.grad(b)};
            }
            return out;
        };
        double err = testutil::gradcheck_max_err(
            build, {random_tensor({4, 6}, rng), random_tensor({2, 6}, rng)});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("adam: zero gradient leaves parameters and moments untouched") {
    std::vector<Tensor<float>> params = {Tensor<float>({3}, {1.f, -2.f, 0.5f})};
    std::vector<Tensor<float>> grads = {Tensor<float>::zeros({3})};
    AdamState<float> st;
    st.init(params);
    adam_step(params, grads, st);
    CHECK(params[0].data == std::vector<float>{1.f, -2.f, 0.5f});
    CHECK(st.m[0].data == std::vector<float>{0.f, 0.f, 0.f});
    CHECK(st.v[0].data == std::vector<float>{0.f, 0.f, 0.f});
    CHECK(st.step == 1);
}

TEST_CASE("adam: first step with unit gradient moves by -lr") {
    std::vector<Tensor<double>> params = {Tensor<double>({1}, {0.0})};
    std::vector<Tensor<double>> grads = {Tensor<double>({1}, {1.0})};
    AdamState<double> st;
    st.lr = 1e-3;
    st.init(params);
    adam_step(params, grads, st);
    // mhat = 1, vhat = 1 after bias correction, so the step is -lr/(1+eps)
    CHECK(params[0].data[0] == Catch::Approx(-1e-3).epsilon(1e-6));
    CHECK(params[0].data[0] < 0.0);
}

TEST_CASE("adam matches a hand-rolled recurrence") {
    // oracle: scalar Adam recurrence written out longhand
    double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double p_ref = 0.7, m = 0, v = 0;
    std::vector<double> gs = {0.3, -1.2, 0.05, 0.9, -0.4};
    std::vector<Tensor<double>> params = {Tensor<double>({1}, {0.7})};
    AdamState<double> st;
    st.lr = lr;
    st.init(params);
    for (std::size_t i = 0; i < gs.size(); ++i) {
        double g = gs[i];
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        double t = static_cast<double>(i + 1);
        double mhat = m / (1 - std::pow(b1, t));
        double vhat = v / (1 - std::pow(b2, t));
        p_ref -= lr * mhat / (std::sqrt(vhat) + eps);

        std::vector<Tensor<double>> grads = {Tensor<double>({1}, {g})};
        adam_step(params, grads, st);
        CHECK(params[0].data[0] == Catch::Approx(p_ref).margin(1e-15));
    }
}

TEST_CASE("adam descends a convex quadratic") {
    // oracle: loss(p) = (p-3)^2, gradient 2(p-3)
    std::vector<Tensor<double>> params = {Tensor<double>({1}, {0.0})};
    AdamState<double> st;
    st.lr = 0.1;
    st.init(params);
    auto loss = [&] { return (params[0].data[0] - 3.0) * (params[0].data[0] - 3.0); };
    double l0 = loss();
    for (int i = 0; i < 2; ++i) {
        std::vector<Tensor<double>> grads = {Tensor<double>({1}, {2.0 * (params[0].data[0] - 3.0)})};
        adam_step(params, grads, st);
        double l1 = loss();
        CHECK(l1 < l0);
        l0 = l1;
    }
}

TEST_CASE("gradients of dead branches are exact zeros") {
    CounterRng rng(41, 13);
    Tape<double> t;
    Var used = t.input(random_tensor({2, 2}, rng));
    Var unused = t.input(random_tensor({2, 2}, rng));
    Var loss = weighted_sum(t, ops::gelu(t, used), 41);
    t.backward(loss);
    for (double v : t.grad(unused).data) CHECK(v == 0.0);
}
