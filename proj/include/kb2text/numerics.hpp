#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kb2text/matrix.hpp"

namespace kb2text {

enum class Activation { tanh, sigmoid, relu };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

real apply_activation(real x, Activation kind);
real activation_derivative(real y, Activation kind);  // derivative in terms of the output y
Vector apply_activation(const Vector& x, Activation kind);

// Max-shifted, numerically stable. Entries in (0,1), sum 1.
Vector softmax(const Vector& logits);
// log softmax, same stabilisation; avoids underflow for NLL computation.
Vector log_softmax(const Vector& logits);

enum class NormMode { train, eval };

struct BatchNormState {
    Matrix gamma;         // dim x 1, trainable
    Matrix beta;          // dim x 1, trainable
    Matrix gamma_grad;    // paired gradient buffers
    Matrix beta_grad;
    Vector running_mean;
    Vector running_var;
    real momentum = real(0.1);
    real epsilon = real(1e-5);

    BatchNormState() = default;
    explicit BatchNormState(size_t dim);
    size_t dim() const { return running_mean.size(); }
};

// Cache from a forward pass, needed by batchnorm_backward.
struct BatchNormCache {
    NormMode mode = NormMode::train;
    Vector mean;      // per-column statistics used for normalisation
    Vector inv_std;   // 1 / sqrt(var + eps)
    Matrix x_hat;     // normalised inputs
};

// Rows are batch items, columns are features. Train mode normalises with
// batch statistics and updates the running averages; eval mode uses the
// running averages and leaves them untouched. Train mode needs >= 2 rows.
Matrix batchnorm_forward(const Matrix& batch, BatchNormState& state, NormMode mode,
                         BatchNormCache* cache = nullptr);

// Accumulates gamma/beta gradients into the state buffers and returns the
// gradient w.r.t. the input batch.
Matrix batchnorm_backward(const Matrix& grad_out, BatchNormState& state,
                          const BatchNormCache& cache);

struct AdamState {
    Matrix m;  // first moment
    Matrix v;  // second moment
    real beta1 = real(0.9);
    real beta2 = real(0.999);
    real epsilon = real(1e-8);
    int64_t step_count = 0;

    AdamState() = default;
    AdamState(size_t rows, size_t cols) : m(rows, cols), v(rows, cols) {}
};

// Bias-corrected Adam update, applied in place. `name` only feeds error
// messages when a gradient entry is non-finite.
void adam_step(Matrix& params, const Matrix& grads, AdamState& state, real lr,
               const std::string& name = "params");

struct GradCheckTensor {
    std::string name;
    Matrix* value;         // perturbed in place and restored
    const Matrix* grad;    // analytic gradient to verify
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_tensor;
    size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Central finite differences against the supplied analytic gradients.
// Samples at most `max_coords_per_tensor` coordinates per tensor (all of
// them when the tensor is smaller). Throws NumericError when two
// evaluations of loss_fn at the same point disagree.
GradCheckResult gradient_check(const std::function<double()>& loss_fn,
                               const std::vector<GradCheckTensor>& tensors,
                               double epsilon = 1e-5, int max_coords_per_tensor = 500,
                               uint64_t seed = 0);

}  // namespace kb2text
