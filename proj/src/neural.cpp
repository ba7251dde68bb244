#include "pacrr/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace pacrr {

std::string format_dims(const std::vector<std::size_t>& dims) {
    std::string out;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        out += (i == 0 ? "" : "x") + std::to_string(dims[i]);
    }
    return out.empty() ? "scalar" : out;
}

AxisPadding same_padding(std::size_t extent, std::size_t kernel, std::size_t stride) {
    if (stride == 0) {
        throw std::invalid_argument("stride must be at least 1");
    }
    AxisPadding padding;
    padding.out = (extent + stride - 1) / stride;
    const std::size_t needed = padding.out == 0 ? 0 : (padding.out - 1) * stride + kernel;
    const std::size_t total = needed > extent ? needed - extent : 0;
    // Strided axes pad only at the end so kernel windows stay aligned with
    // stride-length segments of the input.
    padding.before = stride == 1 ? total / 2 : 0;
    return padding;
}

namespace {

template <typename T>
void check_conv_shapes(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias, Stride stride) {
    if (input.rank() != 2) {
        throw std::invalid_argument(fmt::format("conv2d expects an H x W input, got {}", format_dims(input.dims())));
    }
    if (kernels.rank() != 3 || kernels.dim(1) != kernels.dim(2) || kernels.dim(0) == 0 || kernels.dim(1) == 0) {
        throw std::invalid_argument(
            fmt::format("conv2d expects n_f x n x n kernels, got {}", format_dims(kernels.dims())));
    }
    if (bias.rank() != 1 || bias.dim(0) != kernels.dim(0)) {
        throw std::invalid_argument("conv2d bias must hold one value per filter");
    }
    if (stride.rows == 0 || stride.cols == 0) {
        throw std::invalid_argument("conv2d stride must be at least 1");
    }
    const std::size_t n = kernels.dim(1);
    const auto rows = same_padding(input.dim(0), n, stride.rows);
    const auto cols = same_padding(input.dim(1), n, stride.cols);
    const std::size_t padded_rows = std::max(input.dim(0), rows.out == 0 ? 0 : (rows.out - 1) * stride.rows + n);
    const std::size_t padded_cols = std::max(input.dim(1), cols.out == 0 ? 0 : (cols.out - 1) * stride.cols + n);
    if (n > padded_rows || n > padded_cols) {
        throw std::invalid_argument(fmt::format("conv2d kernel {}x{} exceeds padded input {}x{}", n, n,
                                                padded_rows, padded_cols));
    }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias, Stride stride) {
    check_conv_shapes(input, kernels, bias, stride);
    const std::size_t filters = kernels.dim(0);
    const std::size_t n = kernels.dim(1);
    const std::size_t height = input.dim(0);
    const std::size_t width = input.dim(1);
    const auto rows = same_padding(height, n, stride.rows);
    const auto cols = same_padding(width, n, stride.cols);

    Tensor<T> out({filters, rows.out, cols.out});
    for (std::size_t f = 0; f < filters; ++f) {
        for (std::size_t oi = 0; oi < rows.out; ++oi) {
            for (std::size_t oj = 0; oj < cols.out; ++oj) {
                T sum = bias[f];
                for (std::size_t a = 0; a < n; ++a) {
                    const auto r = static_cast<std::ptrdiff_t>(oi * stride.rows + a) - static_cast<std::ptrdiff_t>(rows.before);
                    if (r < 0 || r >= static_cast<std::ptrdiff_t>(height)) {
                        continue;
                    }
                    for (std::size_t b = 0; b < n; ++b) {
                        const auto c = static_cast<std::ptrdiff_t>(oj * stride.cols + b) - static_cast<std::ptrdiff_t>(cols.before);
                        if (c < 0 || c >= static_cast<std::ptrdiff_t>(width)) {
                            continue;
                        }
                        sum += kernels.at(f, a, b) * input.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
                    }
                }
                out.at(f, oi, oj) = sum > T{0} ? sum : T{0};
            }
        }
    }
    return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernels, Stride stride,
                               const Tensor<T>& output, const Tensor<T>& grad_output) {
    const std::size_t filters = kernels.dim(0);
    const std::size_t n = kernels.dim(1);
    const std::size_t height = input.dim(0);
    const std::size_t width = input.dim(1);
    const auto rows = same_padding(height, n, stride.rows);
    const auto cols = same_padding(width, n, stride.cols);
    if (grad_output.dims() != output.dims() || output.dims() != std::vector<std::size_t>{filters, rows.out, cols.out}) {
        throw std::invalid_argument("conv2d_backward: gradient shape does not match the forward output");
    }

    Conv2dGrads<T> grads{Tensor<T>(input.dims()), Tensor<T>(kernels.dims()), Tensor<T>({filters})};
    for (std::size_t f = 0; f < filters; ++f) {
        for (std::size_t oi = 0; oi < rows.out; ++oi) {
            for (std::size_t oj = 0; oj < cols.out; ++oj) {
                if (!(output.at(f, oi, oj) > T{0})) {
                    continue;
                }
                const T g = grad_output.at(f, oi, oj);
                grads.bias[f] += g;
                for (std::size_t a = 0; a < n; ++a) {
                    const auto r = static_cast<std::ptrdiff_t>(oi * stride.rows + a) - static_cast<std::ptrdiff_t>(rows.before);
                    if (r < 0 || r >= static_cast<std::ptrdiff_t>(height)) {
                        continue;
                    }
                    for (std::size_t b = 0; b < n; ++b) {
                        const auto c = static_cast<std::ptrdiff_t>(oj * stride.cols + b) - static_cast<std::ptrdiff_t>(cols.before);
                        if (c < 0 || c >= static_cast<std::ptrdiff_t>(width)) {
                            continue;
                        }
                        const auto ur = static_cast<std::size_t>(r);
                        const auto uc = static_cast<std::size_t>(c);
                        grads.kernels.at(f, a, b) += g * input.at(ur, uc);
                        grads.input.at(ur, uc) += g * kernels.at(f, a, b);
                    }
                }
            }
        }
    }
    return grads;
}

template <typename T>
FilterMax<T> max_over_filters(const Tensor<T>& input) {
    if (input.rank() != 3 || input.dim(0) == 0) {
        throw std::invalid_argument("max_over_filters expects an n_f x H x W input with n_f >= 1");
    }
    const std::size_t filters = input.dim(0);
    const std::size_t height = input.dim(1);
    const std::size_t width = input.dim(2);
    FilterMax<T> out{Tensor<T>({height, width}), std::vector<std::uint32_t>(height * width, 0)};
    for (std::size_t i = 0; i < height; ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            std::uint32_t best = 0;
            for (std::size_t f = 1; f < filters; ++f) {
                if (input.at(f, i, j) > input.at(best, i, j)) {
                    best = static_cast<std::uint32_t>(f);
                }
            }
            out.values.at(i, j) = input.at(best, i, j);
            out.argmax[i * width + j] = best;
        }
    }
    return out;
}

template <typename T>
Tensor<T> max_over_filters_backward(const FilterMax<T>& forward, std::size_t filters, const Tensor<T>& grad_output) {
    const std::size_t height = forward.values.dim(0);
    const std::size_t width = forward.values.dim(1);
    Tensor<T> grad({filters, height, width});
    for (std::size_t i = 0; i < height; ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            grad.at(forward.argmax[i * width + j], i, j) = grad_output.at(i, j);
        }
    }
    return grad;
}

template <typename T>
KMax<T> kmax_per_row(const Tensor<T>& input, std::size_t n_s) {
    if (input.rank() != 2) {
        throw std::invalid_argument("kmax_per_row expects an H x W input");
    }
    if (n_s == 0) {
        throw std::invalid_argument("kmax_per_row needs n_s >= 1");
    }
    const std::size_t height = input.dim(0);
    const std::size_t width = input.dim(1);
    const std::size_t keep = std::min(n_s, width);
    KMax<T> out{Tensor<T>({height, n_s}), std::vector<std::int32_t>(height * n_s, -1)};
    std::vector<std::size_t> order(width);
    for (std::size_t i = 0; i < height; ++i) {
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              const T va = input.at(i, a);
                              const T vb = input.at(i, b);
                              return va > vb || (va == vb && a < b);
                          });
        for (std::size_t k = 0; k < keep; ++k) {
            out.values.at(i, k) = input.at(i, order[k]);
            out.source[i * n_s + k] = static_cast<std::int32_t>(order[k]);
        }
    }
    return out;
}

template <typename T>
Tensor<T> kmax_per_row_backward(const KMax<T>& forward, std::size_t width, const Tensor<T>& grad_output) {
    const std::size_t height = forward.values.dim(0);
    const std::size_t n_s = forward.values.dim(1);
    Tensor<T> grad({height, width});
    for (std::size_t i = 0; i < height; ++i) {
        for (std::size_t k = 0; k < n_s; ++k) {
            const std::int32_t source = forward.source[i * n_s + k];
            if (source >= 0) {
                grad.at(i, static_cast<std::size_t>(source)) += grad_output.at(i, k);
            }
        }
    }
    return grad;
}

template <typename T>
std::vector<T> softmax(std::span<const T> input) {
    if (input.empty()) {
        throw std::invalid_argument("softmax needs at least one input");
    }
    const T peak = *std::max_element(input.begin(), input.end());
    std::vector<T> out(input.size());
    T total = T{0};
    for (std::size_t i = 0; i < input.size(); ++i) {
        out[i] = std::exp(input[i] - peak);
        total += out[i];
    }
    for (auto& value : out) {
        value /= total;
    }
    return out;
}

template <typename T>
std::vector<T> softmax_backward(std::span<const T> output, std::span<const T> grad_output) {
    T dot = T{0};
    for (std::size_t i = 0; i < output.size(); ++i) {
        dot += output[i] * grad_output[i];
    }
    std::vector<T> grad(output.size());
    for (std::size_t i = 0; i < output.size(); ++i) {
        grad[i] = output[i] * (grad_output[i] - dot);
    }
    return grad;
}

namespace {

template <typename T>
T sigmoid(T x) {
    return T{1} / (T{1} + std::exp(-x));
}

constexpr std::size_t kGates = 4;
enum Gate : std::size_t { kInput = 0, kForget = 1, kOutput = 2, kCandidate = 3 };

template <typename T>
void check_lstm_shapes(const Tensor<T>& inputs, const LstmWeights<T>& weights) {
    if (inputs.rank() != 2 || inputs.dim(0) == 0) {
        throw std::invalid_argument("recurrent_sequence expects a non-empty T x D input");
    }
    if (weights.w_input.dims() != std::vector<std::size_t>{kGates, inputs.dim(1)} ||
        weights.w_recurrent.dims() != std::vector<std::size_t>{kGates} ||
        weights.bias.dims() != std::vector<std::size_t>{kGates}) {
        throw std::invalid_argument(fmt::format("recurrent weights do not match input dimension {}", inputs.dim(1)));
    }
}

}  // namespace

template <typename T>
LstmTrace<T> recurrent_sequence(const Tensor<T>& inputs, const LstmWeights<T>& weights) {
    check_lstm_shapes(inputs, weights);
    const std::size_t steps = inputs.dim(0);
    const std::size_t width = inputs.dim(1);
    LstmTrace<T> trace;
    trace.gates.resize(steps * kGates);
    trace.cell.resize(steps);
    trace.hidden.resize(steps);
    T cell = T{0};
    T hidden = T{0};
    for (std::size_t t = 0; t < steps; ++t) {
        T pre[kGates];
        for (std::size_t g = 0; g < kGates; ++g) {
            T sum = weights.bias[g] + weights.w_recurrent[g] * hidden;
            for (std::size_t d = 0; d < width; ++d) {
                sum += weights.w_input.at(g, d) * inputs.at(t, d);
            }
            pre[g] = sum;
        }
        T* gate = &trace.gates[t * kGates];
        gate[kInput] = sigmoid(pre[kInput]);
        gate[kForget] = sigmoid(pre[kForget]);
        gate[kOutput] = sigmoid(pre[kOutput]);
        gate[kCandidate] = std::tanh(pre[kCandidate]);
        cell = gate[kForget] * cell + gate[kInput] * gate[kCandidate];
        hidden = gate[kOutput] * std::tanh(cell);
        trace.cell[t] = cell;
        trace.hidden[t] = hidden;
    }
    return trace;
}

template <typename T>
LstmGrads<T> recurrent_sequence_backward(const Tensor<T>& inputs, const LstmWeights<T>& weights,
                                         const LstmTrace<T>& trace, T grad_output) {
    check_lstm_shapes(inputs, weights);
    const std::size_t steps = inputs.dim(0);
    const std::size_t width = inputs.dim(1);
    LstmGrads<T> grads{Tensor<T>(inputs.dims()), Tensor<T>(weights.w_input.dims()),
                       Tensor<T>(weights.w_recurrent.dims()), Tensor<T>(weights.bias.dims())};
    T grad_hidden = grad_output;
    T grad_cell = T{0};
    for (std::size_t t = steps; t-- > 0;) {
        const T* gate = &trace.gates[t * kGates];
        const T cell_prev = t == 0 ? T{0} : trace.cell[t - 1];
        const T hidden_prev = t == 0 ? T{0} : trace.hidden[t - 1];
        const T tanh_cell = std::tanh(trace.cell[t]);

        grad_cell += grad_hidden * gate[kOutput] * (T{1} - tanh_cell * tanh_cell);
        T grad_pre[kGates];
        grad_pre[kOutput] = grad_hidden * tanh_cell * gate[kOutput] * (T{1} - gate[kOutput]);
        grad_pre[kInput] = grad_cell * gate[kCandidate] * gate[kInput] * (T{1} - gate[kInput]);
        grad_pre[kForget] = grad_cell * cell_prev * gate[kForget] * (T{1} - gate[kForget]);
        grad_pre[kCandidate] = grad_cell * gate[kInput] * (T{1} - gate[kCandidate] * gate[kCandidate]);

        T next_grad_hidden = T{0};
        for (std::size_t g = 0; g < kGates; ++g) {
            grads.bias[g] += grad_pre[g];
            grads.w_recurrent[g] += grad_pre[g] * hidden_prev;
            next_grad_hidden += grad_pre[g] * weights.w_recurrent[g];
            for (std::size_t d = 0; d < width; ++d) {
                grads.w_input.at(g, d) += grad_pre[g] * inputs.at(t, d);
                grads.inputs.at(t, d) += grad_pre[g] * weights.w_input.at(g, d);
            }
        }
        grad_hidden = next_grad_hidden;
        grad_cell *= gate[kForget];
    }
    return grads;
}

template <typename T>
T hinge_loss(T rel_pos, T rel_neg) {
    return std::max(T{0}, T{1} - rel_pos + rel_neg);
}

template <typename T>
std::pair<T, T> hinge_loss_backward(T rel_pos, T rel_neg) {
    if (T{1} - rel_pos + rel_neg > T{0}) {
        return {T{-1}, T{1}};
    }
    return {T{0}, T{0}};
}

template <typename T>
void sgd_step(std::span<ParamGroup<T>> params, T learning_rate) {
    if (!(learning_rate > T{0}) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("learning rate must be a positive finite number");
    }
    for (const auto& group : params) {
        if (group.gradient.dims() != group.value.dims()) {
            throw std::invalid_argument(fmt::format("parameter group '{}' has mismatched gradient dims", group.name));
        }
        if (!group.gradient.all_finite()) {
            throw std::invalid_argument(fmt::format("parameter group '{}' has a non-finite gradient", group.name));
        }
    }
    for (auto& group : params) {
        auto values = group.value.values();
        auto gradient = group.gradient.values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            values[i] -= learning_rate * gradient[i];
        }
        group.gradient.fill(T{0});
    }
}

#define PACRR_INSTANTIATE_NEURAL(T)                                                                          \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Stride);                \
    template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, Stride, const Tensor<T>&,   \
                                            const Tensor<T>&);                                              \
    template FilterMax<T> max_over_filters(const Tensor<T>&);                                               \
    template Tensor<T> max_over_filters_backward(const FilterMax<T>&, std::size_t, const Tensor<T>&);       \
    template KMax<T> kmax_per_row(const Tensor<T>&, std::size_t);                                           \
    template Tensor<T> kmax_per_row_backward(const KMax<T>&, std::size_t, const Tensor<T>&);                \
    template std::vector<T> softmax(std::span<const T>);                                                    \
    template std::vector<T> softmax_backward(std::span<const T>, std::span<const T>);                       \
    template LstmTrace<T> recurrent_sequence(const Tensor<T>&, const LstmWeights<T>&);                      \
    template LstmGrads<T> recurrent_sequence_backward(const Tensor<T>&, const LstmWeights<T>&,              \
                                                      const LstmTrace<T>&, T);                              \
    template T hinge_loss(T, T);                                                                            \
    template std::pair<T, T> hinge_loss_backward(T, T);                                                     \
    template void sgd_step(std::span<ParamGroup<T>>, T);

PACRR_INSTANTIATE_NEURAL(float)
PACRR_INSTANTIATE_NEURAL(double)

#undef PACRR_INSTANTIATE_NEURAL

}  // namespace pacrr
