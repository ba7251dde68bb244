#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pacrr/tensor.hpp"

namespace pacrr {

// Every differentiable op comes as a forward function plus a backward function
// that maps the gradient of the loss w.r.t. the op's output onto its inputs
// and parameters. Forward results carry whatever discrete routing decisions
// (rectification masks, argmax indices) the backward pass needs.

struct Stride {
    std::size_t rows = 1;
    std::size_t cols = 1;
};

/// Zero padding placed before/after an axis so the output has ceil(extent / stride) positions.
struct AxisPadding {
    std::size_t out = 0;
    std::size_t before = 0;
};

AxisPadding same_padding(std::size_t extent, std::size_t kernel, std::size_t stride);

/// Rectified cross-correlation. input: H x W, kernels: n_f x n x n, bias: n_f.
/// Returns n_f x ceil(H / stride.rows) x ceil(W / stride.cols).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias, Stride stride);

template <typename T>
struct Conv2dGrads {
    Tensor<T> input;
    Tensor<T> kernels;
    Tensor<T> bias;
};

/// `output` is the value returned by conv2d; its zeros mark inactive units.
template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernels, Stride stride,
                               const Tensor<T>& output, const Tensor<T>& grad_output);

template <typename T>
struct FilterMax {
    Tensor<T> values;                 // H x W
    std::vector<std::uint32_t> argmax;  // first filter attaining the max, per cell
};

template <typename T>
FilterMax<T> max_over_filters(const Tensor<T>& input);

template <typename T>
Tensor<T> max_over_filters_backward(const FilterMax<T>& forward, std::size_t filters, const Tensor<T>& grad_output);

template <typename T>
struct KMax {
    Tensor<T> values;                  // H x n_s, each row sorted descending
    std::vector<std::int32_t> source;  // source column per output cell, -1 for padding
};

/// Keeps the n_s largest values of every row, sorted descending, zero-padded when W < n_s.
/// Equal values keep their column order.
template <typename T>
KMax<T> kmax_per_row(const Tensor<T>& input, std::size_t n_s);

template <typename T>
Tensor<T> kmax_per_row_backward(const KMax<T>& forward, std::size_t width, const Tensor<T>& grad_output);

template <typename T>
std::vector<T> softmax(std::span<const T> input);

template <typename T>
std::vector<T> softmax_backward(std::span<const T> output, std::span<const T> grad_output);

/// Single-unit LSTM. Gate order throughout: input, forget, output, candidate.
/// w_input: 4 x D, w_recurrent: 4, bias: 4.
template <typename T>
struct LstmWeights {
    const Tensor<T>& w_input;
    const Tensor<T>& w_recurrent;
    const Tensor<T>& bias;
};

template <typename T>
struct LstmTrace {
    // Per step t: activated gates (4 values), cell state, hidden state.
    std::vector<T> gates;
    std::vector<T> cell;
    std::vector<T> hidden;

    T output() const { return hidden.back(); }
};

/// inputs: T x D, T >= 1. Returns the trace; the result is trace.output() = h_T.
template <typename T>
LstmTrace<T> recurrent_sequence(const Tensor<T>& inputs, const LstmWeights<T>& weights);

template <typename T>
struct LstmGrads {
    Tensor<T> inputs;
    Tensor<T> w_input;
    Tensor<T> w_recurrent;
    Tensor<T> bias;
};

template <typename T>
LstmGrads<T> recurrent_sequence_backward(const Tensor<T>& inputs, const LstmWeights<T>& weights,
                                         const LstmTrace<T>& trace, T grad_output);

/// max(0, 1 - rel_pos + rel_neg).
template <typename T>
T hinge_loss(T rel_pos, T rel_neg);

/// (d loss / d rel_pos, d loss / d rel_neg); zero when the margin is met or exactly on the kink.
template <typename T>
std::pair<T, T> hinge_loss_backward(T rel_pos, T rel_neg);

template <typename T>
struct ParamGroup {
    std::string name;
    Tensor<T> value;
    Tensor<T> gradient;

    ParamGroup() = default;
    ParamGroup(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), gradient(value.dims()) {}
};

/// value -= learning_rate * gradient for every group, then zeroes gradients.
/// Throws std::invalid_argument naming the first group holding a non-finite
/// gradient; no group is modified in that case.
template <typename T>
void sgd_step(std::span<ParamGroup<T>> params, T learning_rate);

}  // namespace pacrr
