#pragma once

#include <string>
#include <vector>

#include "kb2text/numerics.hpp"
#include "kb2text/tensor.hpp"

namespace kb2text {

// How per-triple embeddings are merged into one fixed-length vector. sum and
// mean are order-agnostic; concat preserves slot order and needs a canonical
// triple ordering imposed at batch assembly.
enum class CombineMode { concat, sum, mean };

CombineMode combine_from_string(const std::string& s);
std::string to_string(CombineMode m);

struct EncoderConfig {
    int vocab_kb = 0;  // KB-side vocabulary (entity/property ids)
    int d_emb = 0;
    int d_triple = 0;
    int d_hidden = 0;
    int r_max = 32;
    Activation activation = Activation::tanh;
    CombineMode combine = CombineMode::sum;

    int combine_dim() const {
        return combine == CombineMode::concat ? r_max * d_triple : d_triple;
    }
};

// A triple encoded against the KB vocabulary. Pad slots keep variable-size
// sets rectangular; they are zeroed after embedding and excluded from batch
// statistics.
struct IndexTriple {
    int s = 0;
    int p = 0;
    int o = 0;
    bool pad = false;
};

struct EncoderParams {
    EncoderConfig cfg;
    Tensor W_in;  // vocab_kb x d_emb, shared by subject/property/object
    Tensor W_h;   // d_triple x 3*d_emb
    Tensor W_F;   // d_hidden x combine_dim
    BatchNormState bn_h;
    BatchNormState bn_F;

    EncoderParams() = default;
    explicit EncoderParams(const EncoderConfig& cfg);
    void zero_grad();
};

struct EncoderCache {
    NormMode mode = NormMode::train;
    // Flattened non-pad triples: (example index, slot index, triple).
    struct Row {
        size_t example;
        size_t slot;
        IndexTriple triple;
    };
    std::vector<Row> rows;
    std::vector<size_t> n_real;  // non-pad triples per example
    Matrix X;   // rows x 3*d_emb
    Matrix A;   // rows x d_triple, pre-norm
    Matrix H;   // rows x d_triple, post-activation h_f
    Matrix C;   // batch x combine_dim
    BatchNormCache bn_h_cache;
    BatchNormCache bn_F_cache;
};

// Encodes a batch of triple sets into h_FE rows (batch x d_hidden).
// Train mode uses batch statistics where at least two rows are available and
// falls back to the running averages otherwise.
Matrix encoder_forward(EncoderParams& params,
                       const std::vector<std::vector<IndexTriple>>& batch, NormMode mode,
                       EncoderCache* cache = nullptr);

// Single-triple embedding h_f (through W_h, batch norm, activation).
Vector embed_triple(EncoderParams& params, int s, int p, int o, NormMode mode);

// Single triple set -> h_FE.
Vector encode_triple_set(EncoderParams& params, const std::vector<IndexTriple>& triples,
                         NormMode mode);

// Accumulates parameter gradients from a train-mode forward cache.
void encoder_backward(EncoderParams& params, const EncoderCache& cache,
                      const Matrix& grad_hFE);

}  // namespace kb2text
