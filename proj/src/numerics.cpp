#include "kb2text/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "kb2text/rng.hpp"

namespace kb2text {

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "relu") return Activation::relu;
    throw ArgumentError("unknown activation: " + s);
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::relu: return "relu";
    }
    return "tanh";
}

real apply_activation(real x, Activation kind) {
    switch (kind) {
        case Activation::tanh: return std::tanh(x);
        case Activation::sigmoid: return real(1) / (real(1) + std::exp(-x));
        case Activation::relu: return x > real(0) ? x : real(0);
    }
    return x;
}

real activation_derivative(real y, Activation kind) {
    switch (kind) {
        case Activation::tanh: return real(1) - y * y;
        case Activation::sigmoid: return y * (real(1) - y);
        case Activation::relu: return y > real(0) ? real(1) : real(0);
    }
    return real(1);
}

Vector apply_activation(const Vector& x, Activation kind) {
    Vector y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = apply_activation(x[i], kind);
    return y;
}

Vector softmax(const Vector& logits) {
    if (logits.empty()) throw ArgumentError("softmax: empty input");
    const real m = *std::max_element(logits.begin(), logits.end());
    Vector out(logits.size());
    real sum = real(0);
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (real& x : out) x /= sum;
    return out;
}

Vector log_softmax(const Vector& logits) {
    if (logits.empty()) throw ArgumentError("log_softmax: empty input");
    const real m = *std::max_element(logits.begin(), logits.end());
    real sum = real(0);
    for (real x : logits) sum += std::exp(x - m);
    const real lse = m + std::log(sum);
    Vector out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

BatchNormState::BatchNormState(size_t dim)
    : gamma(dim, 1, real(1)),
      beta(dim, 1, real(0)),
      gamma_grad(dim, 1),
      beta_grad(dim, 1),
      running_mean(dim, real(0)),
      running_var(dim, real(1)) {}

Matrix batchnorm_forward(const Matrix& batch, BatchNormState& state, NormMode mode,
                         BatchNormCache* cache) {
    const size_t n = batch.rows();
    const size_t d = batch.cols();
    if (d != state.dim()) {
        throw ShapeError("batchnorm_forward: batch has " + std::to_string(d) +
                         " features, state has " + std::to_string(state.dim()));
    }
    if (mode == NormMode::train && n < 2) {
        throw ArgumentError("batchnorm_forward: degenerate batch of " + std::to_string(n) +
                            " rows in train mode (need >= 2)");
    }

    Vector mean(d, real(0));
    Vector var(d, real(0));
    if (mode == NormMode::train) {
        for (size_t i = 0; i < n; ++i) {
            const real* row = batch.row(i);
            for (size_t j = 0; j < d; ++j) mean[j] += row[j];
        }
        for (size_t j = 0; j < d; ++j) mean[j] /= real(n);
        for (size_t i = 0; i < n; ++i) {
            const real* row = batch.row(i);
            for (size_t j = 0; j < d; ++j) {
                const real c = row[j] - mean[j];
                var[j] += c * c;
            }
        }
        for (size_t j = 0; j < d; ++j) var[j] /= real(n);
        for (size_t j = 0; j < d; ++j) {
            state.running_mean[j] =
                (real(1) - state.momentum) * state.running_mean[j] + state.momentum * mean[j];
            state.running_var[j] =
                (real(1) - state.momentum) * state.running_var[j] + state.momentum * var[j];
        }
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }

    Vector inv_std(d);
    for (size_t j = 0; j < d; ++j) inv_std[j] = real(1) / std::sqrt(var[j] + state.epsilon);

    Matrix out(n, d);
    Matrix x_hat(n, d);
    for (size_t i = 0; i < n; ++i) {
        const real* row = batch.row(i);
        real* orow = out.row(i);
        real* hrow = x_hat.row(i);
        for (size_t j = 0; j < d; ++j) {
            const real xh = (row[j] - mean[j]) * inv_std[j];
            hrow[j] = xh;
            orow[j] = state.gamma[j] * xh + state.beta[j];
        }
    }

    if (cache) {
        cache->mode = mode;
        cache->mean = std::move(mean);
        cache->inv_std = std::move(inv_std);
        cache->x_hat = std::move(x_hat);
    }
    return out;
}

Matrix batchnorm_backward(const Matrix& grad_out, BatchNormState& state,
                          const BatchNormCache& cache) {
    const size_t n = grad_out.rows();
    const size_t d = grad_out.cols();
    if (cache.x_hat.rows() != n || cache.x_hat.cols() != d) {
        throw ShapeError("batchnorm_backward: cache shape " + cache.x_hat.shape_str() +
                         " does not match grad " + grad_out.shape_str());
    }

    Vector sum_dy(d, real(0));
    Vector sum_dy_xhat(d, real(0));
    for (size_t i = 0; i < n; ++i) {
        const real* g = grad_out.row(i);
        const real* xh = cache.x_hat.row(i);
        for (size_t j = 0; j < d; ++j) {
            sum_dy[j] += g[j];
            sum_dy_xhat[j] += g[j] * xh[j];
        }
    }

    Matrix grad_in(n, d);
    if (cache.mode == NormMode::train) {
        // Batch statistics depend on x, so the mean/variance terms appear.
        for (size_t i = 0; i < n; ++i) {
            const real* g = grad_out.row(i);
            const real* xh = cache.x_hat.row(i);
            real* gi = grad_in.row(i);
            for (size_t j = 0; j < d; ++j) {
                gi[j] = (state.gamma[j] * cache.inv_std[j] / real(n)) *
                        (real(n) * g[j] - sum_dy[j] - xh[j] * sum_dy_xhat[j]);
            }
        }
    } else {
        for (size_t i = 0; i < n; ++i) {
            const real* g = grad_out.row(i);
            real* gi = grad_in.row(i);
            for (size_t j = 0; j < d; ++j) {
                gi[j] = g[j] * state.gamma[j] * cache.inv_std[j];
            }
        }
    }

    for (size_t j = 0; j < d; ++j) {
        state.gamma_grad[j] += sum_dy_xhat[j];
        state.beta_grad[j] += sum_dy[j];
    }
    return grad_in;
}

void adam_step(Matrix& params, const Matrix& grads, AdamState& state, real lr,
               const std::string& name) {
    if (!params.same_shape(grads)) {
        throw ShapeError("adam_step(" + name + "): params " + params.shape_str() +
                         " vs grads " + grads.shape_str());
    }
    if (state.m.empty()) state = AdamState(params.rows(), params.cols());
    if (!state.m.same_shape(params)) {
        throw ShapeError("adam_step(" + name + "): state shape " + state.m.shape_str() +
                         " vs params " + params.shape_str());
    }
    if (lr < real(0)) throw ArgumentError("adam_step(" + name + "): lr must be >= 0");

    for (size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericError("adam_step(" + name + "): non-finite gradient at index " +
                               std::to_string(i));
        }
    }

    state.step_count += 1;
    const real b1 = state.beta1;
    const real b2 = state.beta2;
    const real bias1 = real(1) - std::pow(b1, real(state.step_count));
    const real bias2 = real(1) - std::pow(b2, real(state.step_count));
    for (size_t i = 0; i < params.size(); ++i) {
        const real g = grads[i];
        state.m[i] = b1 * state.m[i] + (real(1) - b1) * g;
        state.v[i] = b2 * state.v[i] + (real(1) - b2) * g * g;
        const real m_hat = state.m[i] / bias1;
        const real v_hat = state.v[i] / bias2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

GradCheckResult gradient_check(const std::function<double()>& loss_fn,
                               const std::vector<GradCheckTensor>& tensors,
                               double epsilon, int max_coords_per_tensor, uint64_t seed) {
    const double l0 = loss_fn();
    const double l0_again = loss_fn();
    if (l0 != l0_again) {
        throw NumericError("gradient_check: loss_fn is not deterministic (" +
                           std::to_string(l0) + " vs " + std::to_string(l0_again) + ")");
    }

    Rng rng(splitmix64(seed ^ 0x67726164ULL));
    GradCheckResult res;
    // loss_fn may refresh the gradient buffers (a training-mode loss does),
    // so capture the analytic gradients at the base point before perturbing.
    std::vector<Matrix> snapshots;
    snapshots.reserve(tensors.size());
    for (const auto& t : tensors) snapshots.push_back(*t.grad);
    for (size_t ti = 0; ti < tensors.size(); ++ti) {
        const auto& t = tensors[ti];
        Matrix& val = *t.value;
        const Matrix& grad = snapshots[ti];
        if (!val.same_shape(grad)) {
            throw ShapeError("gradient_check(" + t.name + "): value " + val.shape_str() +
                             " vs grad " + grad.shape_str());
        }
        std::vector<size_t> coords(val.size());
        for (size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        if (coords.size() > static_cast<size_t>(max_coords_per_tensor)) {
            rng.shuffle(coords);
            coords.resize(static_cast<size_t>(max_coords_per_tensor));
        }
        for (size_t i : coords) {
            const real saved = val[i];
            val[i] = saved + static_cast<real>(epsilon);
            const double lp = loss_fn();
            val[i] = saved - static_cast<real>(epsilon);
            const double lm = loss_fn();
            val[i] = saved;
            const double numeric = (lp - lm) / (2.0 * epsilon);
            const double analytic = static_cast<double>(grad[i]);
            const double denom =
                std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            const double rel = std::abs(analytic - numeric) / denom;
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_tensor = t.name;
                res.worst_index = i;
                res.worst_analytic = analytic;
                res.worst_numeric = numeric;
            }
        }
    }
    return res;
}

}  // namespace kb2text
