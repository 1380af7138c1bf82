#pragma once

#include "kb2text/matrix.hpp"

namespace kb2text {

// A trainable value paired with its gradient accumulator.
struct Tensor {
    Matrix v;
    Matrix g;

    Tensor() = default;
    Tensor(size_t rows, size_t cols) : v(rows, cols), g(rows, cols) {}

    void zero_grad() { g.zero(); }
};

}  // namespace kb2text
