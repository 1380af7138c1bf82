#include "kb2text/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "kb2text/error.hpp"

namespace kb2text {

GRULayerParams::GRULayerParams(int in_dim, int hid_dim)
    : input_dim(in_dim),
      hidden_dim(hid_dim),
      W_z(static_cast<size_t>(hid_dim), static_cast<size_t>(in_dim)),
      U_z(static_cast<size_t>(hid_dim), static_cast<size_t>(hid_dim)),
      b_z(static_cast<size_t>(hid_dim), 1),
      W_r(static_cast<size_t>(hid_dim), static_cast<size_t>(in_dim)),
      U_r(static_cast<size_t>(hid_dim), static_cast<size_t>(hid_dim)),
      b_r(static_cast<size_t>(hid_dim), 1),
      W_n(static_cast<size_t>(hid_dim), static_cast<size_t>(in_dim)),
      U_n(static_cast<size_t>(hid_dim), static_cast<size_t>(hid_dim)),
      b_n(static_cast<size_t>(hid_dim), 1) {
    if (in_dim < 1 || hid_dim < 1)
        throw ArgumentError("gru layer: dimensions must be positive");
}

void GRULayerParams::zero_grad() {
    for (Tensor* t : {&W_z, &U_z, &b_z, &W_r, &U_r, &b_r, &W_n, &U_n, &b_n}) t->zero_grad();
}

DecoderParams::DecoderParams(const DecoderConfig& c)
    : cfg(c),
      E_out(static_cast<size_t>(c.vocab_ext), static_cast<size_t>(c.d_emb_out)),
      W_out(static_cast<size_t>(c.vocab_ext), static_cast<size_t>(c.d_hidden)),
      b_out(static_cast<size_t>(c.vocab_ext), 1) {
    if (c.vocab_ext < 1 || c.d_hidden < 1 || c.d_emb_out < 1 || c.n_layers < 1)
        throw ArgumentError("decoder config: all dimensions must be positive");
    layers.emplace_back(c.d_emb_out, c.d_hidden);
    for (int l = 1; l < c.n_layers; ++l) layers.emplace_back(c.d_hidden, c.d_hidden);
}

void DecoderParams::zero_grad() {
    for (auto& layer : layers) layer.zero_grad();
    E_out.zero_grad();
    W_out.zero_grad();
    b_out.zero_grad();
}

namespace {

real sigmoid(real x) { return apply_activation(x, Activation::sigmoid); }

Vector affine(const Matrix& w, const Vector& x, const Matrix& u, const Vector& h,
              const Matrix& b) {
    Vector out = matvec(w, x);
    Vector uh = matvec(u, h);
    for (size_t i = 0; i < out.size(); ++i) out[i] += uh[i] + b[i];
    return out;
}

}  // namespace

Vector gru_step(const GRULayerParams& layer, const Vector& x, const Vector& h_prev,
                GruCache* cache) {
    if (x.size() != static_cast<size_t>(layer.input_dim))
        throw ShapeError("gru_step: input size " + std::to_string(x.size()) +
                         ", expected " + std::to_string(layer.input_dim));
    if (h_prev.size() != static_cast<size_t>(layer.hidden_dim))
        throw ShapeError("gru_step: hidden size " + std::to_string(h_prev.size()) +
                         ", expected " + std::to_string(layer.hidden_dim));

    Vector z = affine(layer.W_z.v, x, layer.U_z.v, h_prev, layer.b_z.v);
    Vector r = affine(layer.W_r.v, x, layer.U_r.v, h_prev, layer.b_r.v);
    for (auto& v : z) v = sigmoid(v);
    for (auto& v : r) v = sigmoid(v);

    Vector u_n_h = matvec(layer.U_n.v, h_prev);
    Vector n = matvec(layer.W_n.v, x);
    for (size_t i = 0; i < n.size(); ++i)
        n[i] = apply_activation(n[i] + r[i] * u_n_h[i] + layer.b_n.v[i], Activation::tanh);

    Vector h_new(h_prev.size());
    for (size_t i = 0; i < h_new.size(); ++i)
        h_new[i] = (real(1) - z[i]) * n[i] + z[i] * h_prev[i];

    if (cache) *cache = GruCache{x, h_prev, z, r, n, u_n_h};
    return h_new;
}

void gru_step_backward(GRULayerParams& layer, const GruCache& cache, const Vector& grad_h,
                       Vector& grad_x, Vector& grad_h_prev) {
    const size_t hid = cache.h_prev.size();
    if (grad_h.size() != hid) throw ShapeError("gru_step_backward: gradient size mismatch");

    Vector dz_pre(hid), dr_pre(hid), dn_pre(hid), d_unh(hid);
    for (size_t i = 0; i < hid; ++i) {
        const real dz = grad_h[i] * (cache.h_prev[i] - cache.n[i]);
        const real dn = grad_h[i] * (real(1) - cache.z[i]);
        grad_h_prev[i] += grad_h[i] * cache.z[i];

        dn_pre[i] = dn * (real(1) - cache.n[i] * cache.n[i]);
        const real dr = dn_pre[i] * cache.u_n_h[i];
        d_unh[i] = dn_pre[i] * cache.r[i];
        dz_pre[i] = dz * cache.z[i] * (real(1) - cache.z[i]);
        dr_pre[i] = dr * cache.r[i] * (real(1) - cache.r[i]);
    }

    add_outer(layer.W_n.g, dn_pre, cache.x);
    add_outer(layer.U_n.g, d_unh, cache.h_prev);
    add_outer(layer.W_z.g, dz_pre, cache.x);
    add_outer(layer.U_z.g, dz_pre, cache.h_prev);
    add_outer(layer.W_r.g, dr_pre, cache.x);
    add_outer(layer.U_r.g, dr_pre, cache.h_prev);
    for (size_t i = 0; i < hid; ++i) {
        layer.b_n.g[i] += dn_pre[i];
        layer.b_z.g[i] += dz_pre[i];
        layer.b_r.g[i] += dr_pre[i];
    }

    Vector dx = matvec_transposed(layer.W_n.v, dn_pre);
    axpy(dx, real(1), matvec_transposed(layer.W_z.v, dz_pre));
    axpy(dx, real(1), matvec_transposed(layer.W_r.v, dr_pre));
    for (size_t i = 0; i < dx.size(); ++i) grad_x[i] += dx[i];

    Vector dh = matvec_transposed(layer.U_n.v, d_unh);
    axpy(dh, real(1), matvec_transposed(layer.U_z.v, dz_pre));
    axpy(dh, real(1), matvec_transposed(layer.U_r.v, dr_pre));
    for (size_t i = 0; i < dh.size(); ++i) grad_h_prev[i] += dh[i];
}

DecoderState initial_state(const DecoderParams& params, const Vector& h_fe) {
    if (h_fe.size() != static_cast<size_t>(params.cfg.d_hidden))
        throw ShapeError("initial_state: h_FE size " + std::to_string(h_fe.size()) +
                         ", decoder hidden is " + std::to_string(params.cfg.d_hidden));
    DecoderState s;
    s.h.assign(params.layers.size(), Vector(h_fe.size(), real(0)));
    s.h[0] = h_fe;
    return s;
}

Vector decode_step(const DecoderParams& params, DecoderState& state, int prev_token,
                   DecodeStepCache* cache) {
    if (prev_token < 0 || prev_token >= params.cfg.vocab_ext)
        throw BoundsError("decode_step: token " + std::to_string(prev_token) +
                          " out of range for vocab " + std::to_string(params.cfg.vocab_ext));
    if (state.h.size() != params.layers.size())
        throw Error("decode_step: state has " + std::to_string(state.h.size()) +
                    " layers, decoder has " + std::to_string(params.layers.size()));

    const size_t d_emb = static_cast<size_t>(params.cfg.d_emb_out);
    Vector x(d_emb);
    const real* row = params.E_out.v.row(static_cast<size_t>(prev_token));
    std::copy(row, row + d_emb, x.begin());

    if (cache) {
        cache->token = prev_token;
        cache->layers.resize(params.layers.size());
    }
    for (size_t l = 0; l < params.layers.size(); ++l) {
        Vector h_new = gru_step(params.layers[l], x, state.h[l],
                                cache ? &cache->layers[l] : nullptr);
        state.h[l] = std::move(h_new);
        x = state.h[l];
    }
    ++state.t;
    if (cache) cache->h_top = state.h.back();

    Vector logits = matvec(params.W_out.v, state.h.back());
    for (size_t i = 0; i < logits.size(); ++i) logits[i] += params.b_out.v[i];
    return logits;
}

Vector decoder_backward(DecoderParams& params, const DecoderSequenceCache& cache,
                        const std::vector<Vector>& grad_logits) {
    if (grad_logits.size() != cache.steps.size())
        throw Error("decoder_backward: " + std::to_string(grad_logits.size()) +
                    " logit gradients for " + std::to_string(cache.steps.size()) + " steps");

    const size_t n_layers = params.layers.size();
    const size_t hid = static_cast<size_t>(params.cfg.d_hidden);
    std::vector<Vector> grad_h(n_layers, Vector(hid, real(0)));

    for (size_t t = cache.steps.size(); t-- > 0;) {
        const DecodeStepCache& step = cache.steps[t];
        if (!grad_logits[t].empty()) {
            add_outer(params.W_out.g, grad_logits[t], step.h_top);
            for (size_t i = 0; i < grad_logits[t].size(); ++i)
                params.b_out.g[i] += grad_logits[t][i];
            Vector dh = matvec_transposed(params.W_out.v, grad_logits[t]);
            for (size_t i = 0; i < hid; ++i) grad_h[n_layers - 1][i] += dh[i];
        }
        for (size_t l = n_layers; l-- > 0;) {
            Vector grad_x(step.layers[l].x.size(), real(0));
            Vector grad_h_prev(hid, real(0));
            gru_step_backward(params.layers[l], step.layers[l], grad_h[l], grad_x,
                              grad_h_prev);
            grad_h[l] = std::move(grad_h_prev);
            if (l > 0) {
                for (size_t i = 0; i < grad_x.size(); ++i) grad_h[l - 1][i] += grad_x[i];
            } else {
                real* dst = params.E_out.g.row(static_cast<size_t>(step.token));
                for (size_t i = 0; i < grad_x.size(); ++i) dst[i] += grad_x[i];
            }
        }
    }
    return grad_h[0];
}

}  // namespace kb2text
