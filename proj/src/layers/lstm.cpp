#include <algorithm>
#include <cmath>
#include <vector>

#include "etlnet/layers.hpp"
#include "etlnet/ops.hpp"
#include "etlnet/simd/kernels.hpp"
#include "internal.hpp"

namespace etlnet {

template <class T>
LstmParams<T> LstmParams<T>::zeros(std::size_t in, std::size_t hidden) {
    return LstmParams{Tensor<T>({4 * hidden, in}), Tensor<T>({4 * hidden, hidden}), Tensor<T>({4 * hidden})};
}

namespace {

template <class T>
void check_params(const LstmParams<T>& p) {
    require_rank(p.w_input.shape(), 2, "lstm input weight");
    require_rank(p.w_recurrent.shape(), 2, "lstm recurrent weight");
    const std::size_t h = p.w_recurrent.dim(1);
    if (p.w_recurrent.dim(0) != 4 * h || p.w_input.dim(0) != 4 * h || p.bias.size() != 4 * h) {
        throw DimensionError("lstm: gate blocks disagree on hidden size: W " + shape_str(p.w_input.shape()) +
                             ", U " + shape_str(p.w_recurrent.shape()) + ", b " + shape_str(p.bias.shape()));
    }
}

}  // namespace

template <class T>
LstmOutput<T> lstm_forward(const Tensor<T>& x, const LstmParams<T>& p, bool reverse, Mode mode) {
    check_params(p);
    require_rank(x.shape(), 3, "lstm input");
    const std::size_t batch = x.dim(0), steps = x.dim(1), in = x.dim(2), hid = p.hidden(), g4 = 4 * hid;
    if (steps < 1) throw DimensionError("lstm: sequence length must be >= 1");
    if (in != p.input_size()) {
        throw DimensionError("lstm: input " + shape_str(x.shape()) + " has " + std::to_string(in) +
                             " channels but weights expect " + std::to_string(p.input_size()));
    }

    LstmOutput<T> out;
    auto& cache = out.cache;
    cache.mode = mode;
    cache.reverse = reverse;
    cache.x = x;
    cache.w_input_shape = p.w_input.shape();
    cache.gates = Tensor<T>({batch, steps, g4});
    cache.cell = Tensor<T>({batch, steps, hid});
    cache.hidden = Tensor<T>({batch, steps, hid});

    // Input projections for every step at once: zx[(b, t)] = x[b, t] W^T + bias.
    std::vector<T> zx(batch * steps * g4);
    for (std::size_t row = 0; row < batch * steps; ++row)
        std::copy(p.bias.ptr(), p.bias.ptr() + g4, zx.data() + row * g4);
    blas::gemm_nt(batch * steps, g4, in, x.ptr(), in, p.w_input.ptr(), in, zx.data(), g4, true);

    const auto& kt = simd::kernels<T>();
    std::vector<T> u_t(hid * g4);  // U^T, so each step is a plain GEMM
    for (std::size_t r = 0; r < g4; ++r)
        for (std::size_t u = 0; u < hid; ++u) u_t[u * g4 + r] = p.w_recurrent.at(r, u);

    std::vector<T> z(batch * g4), h_prev(batch * hid, T{0}), c_prev(batch * hid, T{0});
    for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t t = reverse ? steps - 1 - s : s;
        for (std::size_t b = 0; b < batch; ++b)
            std::copy_n(zx.data() + (b * steps + t) * g4, g4, z.data() + b * g4);
        if (s > 0) blas::gemm_nn(batch, g4, hid, h_prev.data(), hid, u_t.data(), g4, z.data(), g4, true);

        // Gate activations: sigmoid on the i, f, o blocks, tanh on g.
        for (std::size_t b = 0; b < batch; ++b) {
            T* gates = cache.gates.ptr() + (b * steps + t) * g4;
            kt.sigmoid(z.data() + b * g4, gates, 3 * hid);
            kt.tanh(z.data() + b * g4 + 3 * hid, gates + 3 * hid, hid);
            T* cell = cache.cell.ptr() + (b * steps + t) * hid;
            T* cprev = c_prev.data() + b * hid;
            for (std::size_t u = 0; u < hid; ++u) cell[u] = gates[hid + u] * cprev[u] + gates[u] * gates[3 * hid + u];
            std::copy_n(cell, hid, cprev);
            T* hidden = cache.hidden.ptr() + (b * steps + t) * hid;
            kt.tanh(cell, hidden, hid);
            for (std::size_t u = 0; u < hid; ++u) hidden[u] *= gates[2 * hid + u];
            std::copy_n(hidden, hid, h_prev.data() + b * hid);
        }
    }
    out.h_seq = cache.hidden;
    out.h_last = Tensor<T>({batch, hid}, std::move(h_prev));
    return out;
}

template <class T>
LstmGrads<T> lstm_backward(const Tensor<T>& dh_seq, const Tensor<T>& dh_last, const LstmCache<T>& cache,
                           const LstmParams<T>& p) {
    detail::require_train_cache(cache, "lstm");
    detail::require_same_shape(p.w_input.shape(), cache.w_input_shape, "lstm", "input weight");
    const std::size_t batch = cache.x.dim(0), steps = cache.x.dim(1), in = cache.x.dim(2);
    const std::size_t hid = p.hidden(), g4 = 4 * hid;
    detail::require_same_shape(dh_last.shape(), Shape{batch, hid}, "lstm", "dL/dh_last");
    const bool has_seq = !dh_seq.empty();
    if (has_seq) detail::require_same_shape(dh_seq.shape(), Shape{batch, steps, hid}, "lstm", "dL/dh_seq");

    LstmGrads<T> g{Tensor<T>(cache.x.shape()), Tensor<T>(p.w_input.shape()), Tensor<T>(p.w_recurrent.shape()),
                   Tensor<T>({g4})};
    // dz for every (b, t), laid out like the cache so the input-side
    // products run as single GEMMs after the recurrence.
    std::vector<T> dh_next(dh_last.values()), dc_next(batch * hid, T{0}), dz(batch * g4);
    std::vector<T> dz_all(batch * steps * g4), h_shift(batch * steps * hid, T{0});
    std::vector<T> tanh_cell(cache.cell.size());
    simd::kernels<T>().tanh(cache.cell.ptr(), tanh_cell.data(), tanh_cell.size());

    for (std::size_t s = steps; s-- > 0;) {
        const std::size_t t = cache.reverse ? steps - 1 - s : s;
        const std::size_t tp = cache.reverse ? t + 1 : t - 1;  // only valid when s > 0
        for (std::size_t b = 0; b < batch; ++b) {
            const T* gates = cache.gates.ptr() + (b * steps + t) * g4;
            const T* tcell = tanh_cell.data() + (b * steps + t) * hid;
            const T* cprev = s > 0 ? cache.cell.ptr() + (b * steps + tp) * hid : nullptr;
            T* dzb = dz.data() + b * g4;
            for (std::size_t u = 0; u < hid; ++u) {
                T dh = dh_next[b * hid + u];
                if (has_seq) dh += dh_seq.at(b, t, u);
                const T ig = gates[u], fg = gates[hid + u], og = gates[2 * hid + u], cg = gates[3 * hid + u];
                const T tc = tcell[u];
                const T dc = dc_next[b * hid + u] + dh * og * (T{1} - tc * tc);
                const T c_before = cprev ? cprev[u] : T{0};
                dzb[u] = dc * cg * ig * (T{1} - ig);
                dzb[hid + u] = dc * c_before * fg * (T{1} - fg);
                dzb[2 * hid + u] = dh * tc * og * (T{1} - og);
                dzb[3 * hid + u] = dc * ig * (T{1} - cg * cg);
                dc_next[b * hid + u] = dc * fg;
            }
            std::copy_n(dzb, g4, dz_all.data() + (b * steps + t) * g4);
            if (s > 0) std::copy_n(cache.hidden.ptr() + (b * steps + tp) * hid, hid, h_shift.data() + (b * steps + t) * hid);
        }
        if (s > 0) blas::gemm_nn(batch, hid, g4, dz.data(), g4, p.w_recurrent.ptr(), hid, dh_next.data(), hid, false);
    }
    const std::size_t rows = batch * steps;
    for (std::size_t row = 0; row < rows; ++row)
        for (std::size_t r = 0; r < g4; ++r) g.dbias[r] += dz_all[row * g4 + r];
    blas::gemm_tn(g4, in, rows, dz_all.data(), g4, cache.x.ptr(), in, g.dw_input.ptr(), in, false);
    blas::gemm_nn(rows, in, g4, dz_all.data(), g4, p.w_input.ptr(), in, g.dx.ptr(), in, false);
    // h_shift holds zeros at each direction's first step, so those rows add nothing.
    blas::gemm_tn(g4, hid, rows, dz_all.data(), g4, h_shift.data(), hid, g.dw_recurrent.ptr(), hid, false);
    return g;
}

template <class T>
std::pair<Tensor<T>, BiLstmCache<T>> bilstm_forward(const Tensor<T>& x, const LstmParams<T>& p_fwd,
                                                    const LstmParams<T>& p_bwd, bool return_sequences, Mode mode) {
    check_params(p_fwd);
    check_params(p_bwd);
    if (p_fwd.hidden() != p_bwd.hidden()) {
        throw DimensionError("bilstm: forward hidden size " + std::to_string(p_fwd.hidden()) +
                             " differs from backward hidden size " + std::to_string(p_bwd.hidden()));
    }
    auto fwd = lstm_forward(x, p_fwd, false, mode);
    auto bwd = lstm_forward(x, p_bwd, true, mode);
    const std::size_t batch = x.dim(0), steps = x.dim(1), hid = p_fwd.hidden();

    Tensor<T> out;
    if (return_sequences) {
        out = Tensor<T>({batch, steps, 2 * hid});
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t t = 0; t < steps; ++t)
                for (std::size_t u = 0; u < hid; ++u) {
                    out.at(b, t, u) = fwd.h_seq.at(b, t, u);
                    out.at(b, t, hid + u) = bwd.h_seq.at(b, t, u);
                }
    } else {
        out = Tensor<T>({batch, 2 * hid});
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t u = 0; u < hid; ++u) {
                out.at(b, u) = fwd.h_last.at(b, u);
                out.at(b, hid + u) = bwd.h_last.at(b, u);
            }
    }
    BiLstmCache<T> cache;
    cache.mode = mode;
    cache.sequences = return_sequences;
    cache.forward_dir = std::move(fwd.cache);
    cache.backward_dir = std::move(bwd.cache);
    return {std::move(out), std::move(cache)};
}

template <class T>
BiLstmGrads<T> bilstm_backward(const Tensor<T>& dout, const BiLstmCache<T>& cache, const LstmParams<T>& p_fwd,
                               const LstmParams<T>& p_bwd) {
    detail::require_train_cache(cache, "bilstm");
    const auto& xs = cache.forward_dir.x.shape();
    const std::size_t batch = xs[0], steps = xs[1], hid = p_fwd.hidden();
    Tensor<T> dseq_f, dseq_b;
    Tensor<T> dlast_f({batch, hid}), dlast_b({batch, hid});
    if (cache.sequences) {
        detail::require_same_shape(dout.shape(), Shape{batch, steps, 2 * hid}, "bilstm", "dL/dout");
        dseq_f = Tensor<T>({batch, steps, hid});
        dseq_b = Tensor<T>({batch, steps, hid});
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t t = 0; t < steps; ++t)
                for (std::size_t u = 0; u < hid; ++u) {
                    dseq_f.at(b, t, u) = dout.at(b, t, u);
                    dseq_b.at(b, t, u) = dout.at(b, t, hid + u);
                }
    } else {
        detail::require_same_shape(dout.shape(), Shape{batch, 2 * hid}, "bilstm", "dL/dout");
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t u = 0; u < hid; ++u) {
                dlast_f.at(b, u) = dout.at(b, u);
                dlast_b.at(b, u) = dout.at(b, hid + u);
            }
    }
    BiLstmGrads<T> g;
    g.forward_dir = lstm_backward(dseq_f, dlast_f, cache.forward_dir, p_fwd);
    g.backward_dir = lstm_backward(dseq_b, dlast_b, cache.backward_dir, p_bwd);
    g.dx = g.forward_dir.dx;
    for (std::size_t i = 0; i < g.dx.size(); ++i) g.dx[i] += g.backward_dir.dx[i];
    return g;
}

#define ETLNET_INSTANTIATE_LSTM(T)                                                                              \
    template struct LstmParams<T>;                                                                             \
    template LstmOutput<T> lstm_forward(const Tensor<T>&, const LstmParams<T>&, bool, Mode);                   \
    template LstmGrads<T> lstm_backward(const Tensor<T>&, const Tensor<T>&, const LstmCache<T>&,               \
                                        const LstmParams<T>&);                                                 \
    template std::pair<Tensor<T>, BiLstmCache<T>> bilstm_forward(const Tensor<T>&, const LstmParams<T>&,       \
                                                                 const LstmParams<T>&, bool, Mode);            \
    template BiLstmGrads<T> bilstm_backward(const Tensor<T>&, const BiLstmCache<T>&, const LstmParams<T>&,     \
                                            const LstmParams<T>&);
ETLNET_INSTANTIATE_LSTM(float)
ETLNET_INSTANTIATE_LSTM(double)
#undef ETLNET_INSTANTIATE_LSTM

}  // namespace etlnet
