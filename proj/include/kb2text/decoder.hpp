#pragma once

#include <vector>

#include "kb2text/numerics.hpp"
#include "kb2text/tensor.hpp"

namespace kb2text {

struct GRULayerParams {
    int input_dim = 0;
    int hidden_dim = 0;
    Tensor W_z, U_z, b_z;  // update gate
    Tensor W_r, U_r, b_r;  // reset gate
    Tensor W_n, U_n, b_n;  // candidate state

    GRULayerParams() = default;
    GRULayerParams(int input_dim, int hidden_dim);
    void zero_grad();
};

struct DecoderConfig {
    int vocab_ext = 0;  // extended summary vocabulary
    int d_hidden = 0;
    int d_emb_out = 0;  // target-token embedding width
    int n_layers = 1;
};

struct DecoderParams {
    DecoderConfig cfg;
    std::vector<GRULayerParams> layers;
    Tensor E_out;  // vocab_ext x d_emb_out, input embeddings (untied)
    Tensor W_out;  // vocab_ext x d_hidden
    Tensor b_out;  // vocab_ext x 1

    DecoderParams() = default;
    explicit DecoderParams(const DecoderConfig& cfg);
    void zero_grad();
};

struct GruCache {
    Vector x, h_prev, z, r, n, u_n_h;
};

// z = sig(W_z x + U_z h + b_z), r = sig(W_r x + U_r h + b_r),
// n = tanh(W_n x + r .* (U_n h) + b_n), h' = (1-z) .* n + z .* h.
Vector gru_step(const GRULayerParams& layer, const Vector& x, const Vector& h_prev,
                GruCache* cache = nullptr);

// Accumulates parameter gradients for one step; adds this step's input and
// carry gradients into grad_x / grad_h_prev.
void gru_step_backward(GRULayerParams& layer, const GruCache& cache, const Vector& grad_h,
                       Vector& grad_x, Vector& grad_h_prev);

struct DecoderState {
    std::vector<Vector> h;  // one hidden vector per layer
    long t = 0;
};

// First layer starts from h_FE, the rest from zero.
DecoderState initial_state(const DecoderParams& params, const Vector& h_fe);

struct DecodeStepCache {
    int token = 0;
    std::vector<GruCache> layers;
    Vector h_top;
};

// Advances the state by one token and returns logits over the extended
// vocabulary.
Vector decode_step(const DecoderParams& params, DecoderState& state, int prev_token,
                   DecodeStepCache* cache = nullptr);

struct DecoderSequenceCache {
    std::vector<DecodeStepCache> steps;
};

// Backpropagation through time over a teacher-forced sequence. grad_logits
// holds one gradient per recorded step (empty vectors are treated as zero).
// Returns the gradient flowing into h_FE.
Vector decoder_backward(DecoderParams& params, const DecoderSequenceCache& cache,
                        const std::vector<Vector>& grad_logits);

}  // namespace kb2text
