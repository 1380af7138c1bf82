#include "kb2text/encoder.hpp"

#include <algorithm>

#include "kb2text/error.hpp"

namespace kb2text {

CombineMode combine_from_string(const std::string& s) {
    if (s == "concat") return CombineMode::concat;
    if (s == "sum") return CombineMode::sum;
    if (s == "mean") return CombineMode::mean;
    throw ArgumentError("unknown combine mode: " + s);
}

std::string to_string(CombineMode m) {
    switch (m) {
        case CombineMode::concat: return "concat";
        case CombineMode::sum: return "sum";
        case CombineMode::mean: return "mean";
    }
    return "sum";
}

EncoderParams::EncoderParams(const EncoderConfig& c)
    : cfg(c),
      W_in(static_cast<size_t>(c.vocab_kb), static_cast<size_t>(c.d_emb)),
      W_h(static_cast<size_t>(c.d_triple), static_cast<size_t>(3 * c.d_emb)),
      W_F(static_cast<size_t>(c.d_hidden), static_cast<size_t>(c.combine_dim())),
      bn_h(static_cast<size_t>(c.d_triple)),
      bn_F(static_cast<size_t>(c.d_hidden)) {
    if (c.vocab_kb < 1 || c.d_emb < 1 || c.d_triple < 1 || c.d_hidden < 1 || c.r_max < 1)
        throw ArgumentError("encoder config: all dimensions must be positive");
}

void EncoderParams::zero_grad() {
    W_in.zero_grad();
    W_h.zero_grad();
    W_F.zero_grad();
    bn_h.gamma_grad.zero();
    bn_h.beta_grad.zero();
    bn_F.gamma_grad.zero();
    bn_F.beta_grad.zero();
}

namespace {

// Train-mode batch norm needs at least two rows for batch statistics; a
// single-row batch is normalised with the running averages instead (the
// cache records eval so the backward pass stays consistent).
Matrix bn_apply(BatchNormState& state, const Matrix& input, NormMode mode,
                BatchNormCache* cache) {
    NormMode effective =
        (mode == NormMode::train && input.rows() < 2) ? NormMode::eval : mode;
    return batchnorm_forward(input, state, effective, cache);
}

void check_index(int idx, int vocab, const char* what) {
    if (idx < 0 || idx >= vocab)
        throw BoundsError(std::string("encoder: ") + what + " index " +
                          std::to_string(idx) + " out of range for vocab " +
                          std::to_string(vocab));
}

}  // namespace

Matrix encoder_forward(EncoderParams& params,
                       const std::vector<std::vector<IndexTriple>>& batch, NormMode mode,
                       EncoderCache* cache) {
    const auto& cfg = params.cfg;
    if (batch.empty()) throw ArgumentError("encoder_forward: empty batch");

    EncoderCache local;
    EncoderCache& c = cache ? *cache : local;
    c = EncoderCache{};
    c.mode = mode;
    c.n_real.assign(batch.size(), 0);

    for (size_t b = 0; b < batch.size(); ++b) {
        const auto& set = batch[b];
        if (set.empty())
            throw ArgumentError("encoder_forward: example " + std::to_string(b) +
                                " has an empty triple set");
        if (static_cast<int>(set.size()) > cfg.r_max)
            throw ArgumentError("encoder_forward: example " + std::to_string(b) + " has " +
                                std::to_string(set.size()) + " triples, r_max is " +
                                std::to_string(cfg.r_max));
        for (size_t slot = 0; slot < set.size(); ++slot) {
            const IndexTriple& t = set[slot];
            if (t.pad) continue;
            check_index(t.s, cfg.vocab_kb, "subject");
            check_index(t.p, cfg.vocab_kb, "property");
            check_index(t.o, cfg.vocab_kb, "object");
            c.rows.push_back({b, slot, t});
            ++c.n_real[b];
        }
        if (c.n_real[b] == 0)
            throw ArgumentError("encoder_forward: example " + std::to_string(b) +
                                " has only pad triples");
    }

    const size_t n = c.rows.size();
    const size_t d_emb = static_cast<size_t>(cfg.d_emb);
    c.X = Matrix(n, 3 * d_emb);
    for (size_t r = 0; r < n; ++r) {
        const IndexTriple& t = c.rows[r].triple;
        const real* es = params.W_in.v.row(static_cast<size_t>(t.s));
        const real* ep = params.W_in.v.row(static_cast<size_t>(t.p));
        const real* eo = params.W_in.v.row(static_cast<size_t>(t.o));
        real* dst = c.X.row(r);
        std::copy(es, es + d_emb, dst);
        std::copy(ep, ep + d_emb, dst + d_emb);
        std::copy(eo, eo + d_emb, dst + 2 * d_emb);
    }

    c.A = matmul(c.X, transpose(params.W_h.v));
    Matrix hn = bn_apply(params.bn_h, c.A, mode, &c.bn_h_cache);
    c.H = hn;
    for (size_t i = 0; i < c.H.size(); ++i) c.H[i] = apply_activation(c.H[i], cfg.activation);

    const size_t combine_dim = static_cast<size_t>(cfg.combine_dim());
    const size_t d_triple = static_cast<size_t>(cfg.d_triple);
    c.C = Matrix(batch.size(), combine_dim);
    for (size_t r = 0; r < n; ++r) {
        const size_t b = c.rows[r].example;
        const size_t slot = c.rows[r].slot;
        switch (cfg.combine) {
            case CombineMode::concat:
                for (size_t j = 0; j < d_triple; ++j)
                    c.C(b, slot * d_triple + j) = c.H(r, j);
                break;
            case CombineMode::sum:
                for (size_t j = 0; j < d_triple; ++j) c.C(b, j) += c.H(r, j);
                break;
            case CombineMode::mean:
                for (size_t j = 0; j < d_triple; ++j)
                    c.C(b, j) += c.H(r, j) / static_cast<real>(c.n_real[b]);
                break;
        }
    }

    Matrix u = matmul(c.C, transpose(params.W_F.v));
    Matrix h_fe = bn_apply(params.bn_F, u, mode, &c.bn_F_cache);
    return h_fe;
}

Vector embed_triple(EncoderParams& params, int s, int p, int o, NormMode mode) {
    const auto& cfg = params.cfg;
    check_index(s, cfg.vocab_kb, "subject");
    check_index(p, cfg.vocab_kb, "property");
    check_index(o, cfg.vocab_kb, "object");
    const size_t d_emb = static_cast<size_t>(cfg.d_emb);
    Matrix x(1, 3 * d_emb);
    const real* es = params.W_in.v.row(static_cast<size_t>(s));
    const real* ep = params.W_in.v.row(static_cast<size_t>(p));
    const real* eo = params.W_in.v.row(static_cast<size_t>(o));
    std::copy(es, es + d_emb, x.row(0));
    std::copy(ep, ep + d_emb, x.row(0) + d_emb);
    std::copy(eo, eo + d_emb, x.row(0) + 2 * d_emb);
    Matrix a = matmul(x, transpose(params.W_h.v));
    BatchNormCache cache;
    Matrix hn = bn_apply(params.bn_h, a, mode, &cache);
    Vector out(static_cast<size_t>(cfg.d_triple));
    for (size_t j = 0; j < out.size(); ++j) out[j] = apply_activation(hn(0, j), cfg.activation);
    return out;
}

Vector encode_triple_set(EncoderParams& params, const std::vector<IndexTriple>& triples,
                         NormMode mode) {
    Matrix h_fe = encoder_forward(params, {triples}, mode);
    Vector out(h_fe.cols());
    for (size_t j = 0; j < out.size(); ++j) out[j] = h_fe(0, j);
    return out;
}

void encoder_backward(EncoderParams& params, const EncoderCache& cache,
                      const Matrix& grad_hFE) {
    const auto& cfg = params.cfg;
    if (grad_hFE.rows() != cache.n_real.size() ||
        grad_hFE.cols() != static_cast<size_t>(cfg.d_hidden))
        throw Error("encoder_backward: gradient shape " + grad_hFE.shape_str() +
                    " does not match cache");

    Matrix grad_u = batchnorm_backward(grad_hFE, params.bn_F, cache.bn_F_cache);

    // u = C * W_F^T
    Matrix w_f_grad = matmul(transpose(grad_u), cache.C);
    for (size_t i = 0; i < w_f_grad.size(); ++i) params.W_F.g[i] += w_f_grad[i];
    Matrix grad_c = matmul(grad_u, params.W_F.v);

    const size_t n = cache.rows.size();
    const size_t d_triple = static_cast<size_t>(cfg.d_triple);
    Matrix grad_h(n, d_triple);
    for (size_t r = 0; r < n; ++r) {
        const size_t b = cache.rows[r].example;
        const size_t slot = cache.rows[r].slot;
        for (size_t j = 0; j < d_triple; ++j) {
            switch (cfg.combine) {
                case CombineMode::concat:
                    grad_h(r, j) = grad_c(b, slot * d_triple + j);
                    break;
                case CombineMode::sum:
                    grad_h(r, j) = grad_c(b, j);
                    break;
                case CombineMode::mean:
                    grad_h(r, j) = grad_c(b, j) / static_cast<real>(cache.n_real[b]);
                    break;
            }
        }
    }

    for (size_t i = 0; i < grad_h.size(); ++i)
        grad_h[i] *= activation_derivative(cache.H[i], cfg.activation);

    Matrix grad_a = batchnorm_backward(grad_h, params.bn_h, cache.bn_h_cache);

    Matrix w_h_grad = matmul(transpose(grad_a), cache.X);
    for (size_t i = 0; i < w_h_grad.size(); ++i) params.W_h.g[i] += w_h_grad[i];
    Matrix grad_x = matmul(grad_a, params.W_h.v);

    const size_t d_emb = static_cast<size_t>(cfg.d_emb);
    for (size_t r = 0; r < n; ++r) {
        const IndexTriple& t = cache.rows[r].triple;
        real* gs = params.W_in.g.row(static_cast<size_t>(t.s));
        real* gp = params.W_in.g.row(static_cast<size_t>(t.p));
        real* go = params.W_in.g.row(static_cast<size_t>(t.o));
        const real* src = grad_x.row(r);
        for (size_t j = 0; j < d_emb; ++j) {
            gs[j] += src[j];
            gp[j] += src[d_emb + j];
            go[j] += src[2 * d_emb + j];
        }
    }
}

}  // namespace kb2text
