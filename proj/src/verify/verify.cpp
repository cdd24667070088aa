#include "etlnet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "etlnet/layers.hpp"
#include "etlnet/model.hpp"
#include "etlnet/ops.hpp"
#include "etlnet/train.hpp"

namespace etlnet::verify {

namespace {

using TensorD = Tensor<double>;

TensorD random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    return rng_uniform<double>(rng, std::move(shape), lo, hi);
}

double dot(const TensorD& a, const TensorD& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Accumulates analytic-vs-numeric comparisons for one named check.
class Comparison {
public:
    Comparison(std::string name, double tol) { r_.name = std::move(name), r_.tolerance = tol; }

    // Scalar loss L(); `t` is perturbed in place and restored.
    void tensor(const std::string& what, TensorD& t, const TensorD& analytic, const std::function<double()>& loss) {
        if (analytic.shape() != t.shape()) {
            fail(what + ": gradient shape " + shape_str(analytic.shape()) + " vs " + shape_str(t.shape()));
            return;
        }
        for (std::size_t i = 0; i < t.size(); ++i) entry(what, t, i, analytic[i], loss);
    }

    void entry(const std::string& what, TensorD& t, std::size_t i, double analytic, const std::function<double()>& loss) {
        const double keep = t[i];
        t[i] = keep + kFdStep;
        const double up = loss();
        t[i] = keep - kFdStep;
        const double down = loss();
        t[i] = keep;
        const double numeric = (up - down) / (2.0 * kFdStep);
        const double err = relative_error(analytic, numeric);
        ++r_.checked;
        if (!(err <= r_.max_error)) {
            r_.max_error = std::isnan(err) ? INFINITY : err;
            std::ostringstream os;
            os << "worst at " << what << "[" << i << "]: analytic " << analytic << " numeric " << numeric;
            r_.detail = os.str();
        }
    }

    void fail(const std::string& why) {
        r_.max_error = INFINITY;
        r_.detail = why;
    }

    CheckResult finish() {
        r_.passed = r_.checked > 0 && r_.max_error < r_.tolerance;
        return r_;
    }

private:
    CheckResult r_;
};

std::string shape_label(const std::string& layer, const Shape& s) { return layer + " " + shape_str(s); }

// -- per-layer checks --------------------------------------------------------

CheckResult conv_check(Rng& rng, std::size_t b, std::size_t t, std::size_t cin, std::size_t cout, std::size_t k,
                       std::size_t d) {
    auto x = random_tensor(rng, {b, t, cin});
    ConvParams<double> p{random_tensor(rng, {cout, cin, k}), random_tensor(rng, {cout}), d};
    const auto r = random_tensor(rng, {b, t, cout});
    auto loss = [&] { return dot(causal_conv1d_forward(x, p).first, r); };
    auto [y, cache] = causal_conv1d_forward(x, p);
    auto g = causal_conv1d_backward(r, cache, p);
    Comparison c(shape_label("conv k=" + std::to_string(k) + " d=" + std::to_string(d), x.shape()), kLayerTolerance);
    c.tensor("dx", x, g.dx, loss);
    c.tensor("dweight", p.weight, g.dweight, loss);
    c.tensor("dbias", p.bias, g.dbias, loss);
    return c.finish();
}

CheckResult batchnorm_check(Rng& rng, Shape shape) {
    auto x = random_tensor(rng, shape, -2.0, 2.0);
    const std::size_t ch = shape.back();
    auto s = BatchNormState<double>::identity(ch);
    s.gamma = random_tensor(rng, {ch}, 0.5, 1.5);
    s.beta = random_tensor(rng, {ch});
    const auto r = random_tensor(rng, shape);
    auto loss = [&] {
        auto scratch = s;
        return dot(batchnorm_forward(x, scratch, Mode::train).first, r);
    };
    auto scratch = s;
    auto [y, cache] = batchnorm_forward(x, scratch, Mode::train);
    auto g = batchnorm_backward(r, cache, s);
    Comparison c(shape_label("batchnorm", shape), kLayerTolerance);
    c.tensor("dx", x, g.dx, loss);
    c.tensor("dgamma", s.gamma, g.dgamma, loss);
    c.tensor("dbeta", s.beta, g.dbeta, loss);
    return c.finish();
}

CheckResult dropout_check(Rng& rng, Shape shape, double rate) {
    auto x = random_tensor(rng, shape);
    const auto r = random_tensor(rng, shape);
    const std::uint64_t mask_seed = rng.next_u64();
    auto loss = [&] {
        Rng m(mask_seed);
        return dot(dropout_forward(x, rate, m, Mode::train).first, r);
    };
    Rng m(mask_seed);
    auto [y, cache] = dropout_forward(x, rate, m, Mode::train);
    Comparison c(shape_label("dropout", shape), kLayerTolerance);
    c.tensor("dx", x, dropout_backward(r, cache), loss);
    return c.finish();
}

LstmParams<double> random_lstm(Rng& rng, std::size_t in, std::size_t h) {
    return {random_tensor(rng, {4 * h, in}), random_tensor(rng, {4 * h, h}), random_tensor(rng, {4 * h})};
}

CheckResult lstm_check(Rng& rng, std::size_t b, std::size_t t, std::size_t in, std::size_t h, bool reverse) {
    auto x = random_tensor(rng, {b, t, in});
    auto p = random_lstm(rng, in, h);
    const auto r_seq = random_tensor(rng, {b, t, h});
    const auto r_last = random_tensor(rng, {b, h});
    auto loss = [&] {
        auto o = lstm_forward(x, p, reverse);
        return dot(o.h_seq, r_seq) + dot(o.h_last, r_last);
    };
    auto o = lstm_forward(x, p, reverse);
    auto g = lstm_backward(r_seq, r_last, o.cache, p);
    Comparison c(shape_label(reverse ? "lstm reverse" : "lstm", x.shape()), kLayerTolerance);
    c.tensor("dx", x, g.dx, loss);
    c.tensor("dw_input", p.w_input, g.dw_input, loss);
    c.tensor("dw_recurrent", p.w_recurrent, g.dw_recurrent, loss);
    c.tensor("dbias", p.bias, g.dbias, loss);
    return c.finish();
}

CheckResult bilstm_check(Rng& rng, std::size_t b, std::size_t t, std::size_t in, std::size_t h, bool sequences) {
    auto x = random_tensor(rng, {b, t, in});
    auto pf = random_lstm(rng, in, h);
    auto pb = random_lstm(rng, in, h);
    const auto r = sequences ? random_tensor(rng, {b, t, 2 * h}) : random_tensor(rng, {b, 2 * h});
    auto loss = [&] { return dot(bilstm_forward(x, pf, pb, sequences).first, r); };
    auto [y, cache] = bilstm_forward(x, pf, pb, sequences);
    auto g = bilstm_backward(r, cache, pf, pb);
    Comparison c(shape_label(sequences ? "bilstm sequences" : "bilstm", x.shape()), kLayerTolerance);
    c.tensor("dx", x, g.dx, loss);
    c.tensor("fwd.dw_input", pf.w_input, g.forward_dir.dw_input, loss);
    c.tensor("fwd.dw_recurrent", pf.w_recurrent, g.forward_dir.dw_recurrent, loss);
    c.tensor("fwd.dbias", pf.bias, g.forward_dir.dbias, loss);
    c.tensor("bwd.dw_input", pb.w_input, g.backward_dir.dw_input, loss);
    c.tensor("bwd.dw_recurrent", pb.w_recurrent, g.backward_dir.dw_recurrent, loss);
    c.tensor("bwd.dbias", pb.bias, g.backward_dir.dbias, loss);
    return c.finish();
}

// Inputs are kept away from the ReLU kink so the finite difference never
// straddles it.
TensorD away_from_zero(Rng& rng, Shape shape) {
    auto x = random_tensor(rng, std::move(shape));
    for (auto& v : x.data())
        if (std::abs(v) < 0.05) v += v < 0 ? -0.05 : 0.05;
    return x;
}

const char* act_name(Activation a) {
    return a == Activation::relu ? "relu" : a == Activation::sigmoid ? "sigmoid" : "none";
}

CheckResult dense_check(Rng& rng, std::size_t b, std::size_t in, std::size_t out, Activation act) {
    auto x = random_tensor(rng, {b, in});
    DenseParams<double> p{random_tensor(rng, {out, in}), random_tensor(rng, {out})};
    const auto r = random_tensor(rng, {b, out});
    auto loss = [&] { return dot(dense_forward(x, p, act).first, r); };
    auto [y, cache] = dense_forward(x, p, act);
    auto g = dense_backward(r, cache, p);
    Comparison c(shape_label(std::string("dense ") + act_name(act), x.shape()), kLayerTolerance);
    c.tensor("dx", x, g.dx, loss);
    c.tensor("dweight", p.weight, g.dweight, loss);
    c.tensor("dbias", p.bias, g.dbias, loss);
    return c.finish();
}

CheckResult activation_check(Rng& rng, Shape shape, Activation act) {
    auto x = away_from_zero(rng, shape);
    const auto r = random_tensor(rng, shape);
    auto loss = [&] { return dot(activation_forward(x, act).first, r); };
    auto [y, cache] = activation_forward(x, act);
    Comparison c(shape_label(act_name(act), shape), kLayerTolerance);
    c.tensor("dx", x, activation_backward(r, cache), loss);
    return c.finish();
}

CheckResult pool_check(Rng& rng, Shape shape) {
    auto x = random_tensor(rng, shape);
    const auto r = random_tensor(rng, {shape[0], shape[2]});
    auto loss = [&] { return dot(global_avg_pool_forward(x), r); };
    Comparison c(shape_label("global_avg_pool", shape), kLayerTolerance);
    c.tensor("dx", x, global_avg_pool_backward(r, x.shape()), loss);
    return c.finish();
}

}  // namespace

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelFloor});
    return std::abs(analytic - numeric) / denom;
}

std::vector<CheckResult> layer_gradient_checks(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 101));
    std::vector<CheckResult> out;
    out.push_back(conv_check(rng, 1, 8, 2, 3, 3, 2));
    out.push_back(conv_check(rng, 2, 5, 1, 1, 2, 1));
    out.push_back(conv_check(rng, 2, 6, 3, 2, 3, 4));
    out.push_back(conv_check(rng, 3, 4, 2, 2, 1, 1));
    out.push_back(batchnorm_check(rng, {2, 5, 3}));
    out.push_back(batchnorm_check(rng, {4, 3}));
    out.push_back(batchnorm_check(rng, {3, 4, 2}));
    out.push_back(dropout_check(rng, {2, 4, 3}, 0.3));
    out.push_back(dropout_check(rng, {5, 6}, 0.5));
    out.push_back(dropout_check(rng, {1, 10, 2}, 0.1));
    out.push_back(lstm_check(rng, 1, 5, 3, 2, false));
    out.push_back(lstm_check(rng, 2, 4, 2, 3, true));
    out.push_back(lstm_check(rng, 3, 3, 1, 2, false));
    out.push_back(lstm_check(rng, 1, 1, 2, 2, true));
    out.push_back(bilstm_check(rng, 1, 5, 3, 2, false));
    out.push_back(bilstm_check(rng, 2, 4, 2, 3, false));
    out.push_back(bilstm_check(rng, 2, 3, 2, 2, true));
    out.push_back(dense_check(rng, 3, 4, 2, Activation::none));
    out.push_back(dense_check(rng, 2, 5, 3, Activation::relu));
    out.push_back(dense_check(rng, 4, 3, 1, Activation::sigmoid));
    for (auto act : {Activation::relu, Activation::sigmoid}) {
        out.push_back(activation_check(rng, {3, 4}, act));
        out.push_back(activation_check(rng, {2, 3, 2}, act));
        out.push_back(activation_check(rng, {5}, act));
    }
    out.push_back(pool_check(rng, {2, 5, 3}));
    out.push_back(pool_check(rng, {1, 7, 2}));
    out.push_back(pool_check(rng, {3, 2, 4}));
    return out;
}

CheckResult model_gradient_check(std::uint64_t seed, std::size_t samples) {
    ModelConfig cfg;
    cfg.tcn_filters = 4;
    cfg.lstm_hidden = 4;
    cfg.dense_hidden = 4;
    cfg.window = 16;
    Rng rng(derive_seed(seed, 202));
    auto model = build_model<double>(cfg, rng);
    const std::size_t batch = 3;
    const auto x = random_tensor(rng, {batch, cfg.window, cfg.in_features});
    TensorD y({batch});
    for (std::size_t i = 0; i < batch; ++i) y[i] = static_cast<double>(i % 2);
    const std::uint64_t mask_seed = rng.next_u64();

    auto loss = [&] {
        Rng masks(mask_seed);
        return bce_loss(model.forward(x, Mode::train, masks).probs, y).loss;
    };
    Rng masks(mask_seed);
    const auto pass = model.forward(x, Mode::train, masks);
    const auto grads = model.backward(bce_loss(pass.probs, y).grad, pass);
    const auto params = model.trainable_parameters();

    std::size_t total = 0;
    for (const auto* p : params) total += p->size();
    Comparison c("model etlnet filters=4 hidden=4 window=16", kModelTolerance);
    for (std::size_t s = 0; s < samples; ++s) {
        // Uniform over all trainable scalars.
        auto flat = static_cast<std::size_t>(rng.below(total));
        std::size_t k = 0;
        while (flat >= params[k]->size()) flat -= params[k++]->size();
        c.entry("param" + std::to_string(k), *params[k], flat, grads[k][flat], loss);
    }
    return c.finish();
}

std::vector<CheckResult> causality_checks(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 303));
    std::vector<CheckResult> out;
    for (std::size_t k : {1, 2, 3})
        for (std::size_t d : {1, 2, 4}) {
            const std::size_t b = 2, t = 12, cin = 2, cout = 3;
            const auto x = random_tensor(rng, {b, t, cin});
            const ConvParams<double> p{random_tensor(rng, {cout, cin, k}), random_tensor(rng, {cout}), d};
            const auto y = causal_conv1d_forward(x, p).first;
            CheckResult r;
            r.name = "causality k=" + std::to_string(k) + " d=" + std::to_string(d);
            std::size_t leaks = 0, dead = 0;
            for (std::size_t tp = 0; tp < t; ++tp) {
                auto xm = x;
                for (std::size_t bb = 0; bb < b; ++bb)
                    for (std::size_t c = 0; c < cin; ++c) xm.at(bb, tp, c) += 1.0 + rng.uniform();
                const auto ym = causal_conv1d_forward(xm, p).first;
                for (std::size_t bb = 0; bb < b; ++bb)
                    for (std::size_t tt = 0; tt < t; ++tt)
                        for (std::size_t f = 0; f < cout; ++f) {
                            ++r.checked;
                            const bool same = ym.at(bb, tt, f) == y.at(bb, tt, f);
                            if (tt < tp && !same) ++leaks;
                        }
                // The mutated step itself must be seen, or the test is vacuous.
                bool seen = false;
                for (std::size_t f = 0; f < cout; ++f) seen |= ym.at(0, tp, f) != y.at(0, tp, f);
                if (!seen) ++dead;
            }
            r.max_error = static_cast<double>(leaks + dead);
            r.tolerance = 0.5;
            r.passed = leaks == 0 && dead == 0;
            r.detail = std::to_string(leaks) + " future-to-past leaks, " + std::to_string(dead) + " unseen mutations";
            out.push_back(r);
        }
    return out;
}

CheckResult metrics_oracle_check(std::uint64_t seed, std::size_t cases) {
    Rng rng(derive_seed(seed, 404));
    CheckResult r;
    r.name = "metrics oracle (" + std::to_string(cases) + " random sets)";
    r.tolerance = 0.5;
    std::size_t mismatches = 0;
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.below(60));
        // Vary class skew, including single-class sets.
        const double pos_rate = rng.uniform();
        const double threshold = c % 5 == 0 ? 0.5 : rng.uniform();
        std::vector<std::uint8_t> labels(n);
        std::vector<double> probs(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = rng.uniform() < pos_rate ? 1 : 0;
            probs[i] = rng.uniform();
        }
        const auto got = compute_metrics(labels, probs, threshold);

        // Enumerate the four (label, prediction) cells independently.
        std::uint64_t cell[2][2] = {{0, 0}, {0, 0}};
        for (int yl = 0; yl < 2; ++yl)
            for (int pr = 0; pr < 2; ++pr)
                for (std::size_t i = 0; i < n; ++i)
                    if (labels[i] == yl && (probs[i] >= threshold) == (pr == 1)) ++cell[yl][pr];
        const double tp = static_cast<double>(cell[1][1]), fp = static_cast<double>(cell[0][1]);
        const double tn = static_cast<double>(cell[0][0]), fn = static_cast<double>(cell[1][0]);
        const double acc = (tp + tn) / static_cast<double>(n);
        const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        const double f1 = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        ++r.checked;
        const bool ok = got.confusion.tp == cell[1][1] && got.confusion.fp == cell[0][1] &&
                        got.confusion.tn == cell[0][0] && got.confusion.fn == cell[1][0] && got.accuracy == acc &&
                        got.precision == prec && got.recall == rec && got.f1 == f1 &&
                        got.precision_undefined == (tp + fp == 0) && got.recall_undefined == (tp + fn == 0);
        if (!ok && mismatches++ == 0) r.detail = "first mismatch at case " + std::to_string(c);
    }
    r.max_error = static_cast<double>(mismatches);
    r.passed = mismatches == 0;
    if (r.passed) r.detail = "all cases exact";
    return r;
}

std::vector<CheckResult> run_all(std::uint64_t seed) {
    auto out = layer_gradient_checks(seed);
    out.push_back(model_gradient_check(seed));
    for (auto& c : causality_checks(seed)) out.push_back(std::move(c));
    out.push_back(metrics_oracle_check(seed));
    return out;
}

}  // namespace etlnet::verify
