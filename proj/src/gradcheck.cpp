#include "pacrr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pacrr/rng.hpp"

namespace pacrr {

double relative_error(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / scale;
}

GradCheckResult gradient_check(std::string name, const Objective& objective, std::span<const double> point,
                               std::span<const double> analytic, double step) {
    GradCheckResult result{std::move(name)};
    const auto base_pattern = objective(point).pattern;
    std::vector<double> probe(point.begin(), point.end());
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double original = probe[i];
        probe[i] = original + step;
        const auto plus = objective(probe);
        probe[i] = original - step;
        const auto minus = objective(probe);
        probe[i] = original;
        if (plus.pattern != base_pattern || minus.pattern != base_pattern) {
            ++result.excluded;
            continue;
        }
        const double numeric = (plus.value - minus.value) / (2.0 * step);
        result.max_relative_error = std::max(result.max_relative_error, relative_error(analytic[i], numeric));
        ++result.checked;
    }
    return result;
}

namespace {

using Tensor64 = Tensor<double>;

Tensor64 random_tensor(Rng& rng, std::vector<std::size_t> dims, double lo, double hi) {
    Tensor64 t(std::move(dims));
    for (auto& v : t.values()) {
        v = uniform_real(rng, lo, hi);
    }
    return t;
}

// Packs tensors into one coordinate vector and back.
std::vector<double> pack(std::initializer_list<const Tensor64*> tensors) {
    std::vector<double> flat;
    for (const auto* t : tensors) {
        flat.insert(flat.end(), t->values().begin(), t->values().end());
    }
    return flat;
}

void unpack(std::span<const double> flat, std::initializer_list<Tensor64*> tensors) {
    std::size_t offset = 0;
    for (auto* t : tensors) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), t->size(), t->values().begin());
        offset += t->size();
    }
}

double weighted_sum(const Tensor64& t, const Tensor64& weights) {
    double sum = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        sum += t[i] * weights[i];
    }
    return sum;
}

GradCheckResult check_conv(Rng& rng, Stride stride, std::size_t n, std::string name, double step) {
    Tensor64 input = random_tensor(rng, {4, 12}, -1.0, 1.0);
    Tensor64 kernels = random_tensor(rng, {3, n, n}, -0.6, 0.6);
    Tensor64 bias = random_tensor(rng, {3}, -0.2, 0.2);
    const Tensor64 output = conv2d(input, kernels, bias, stride);
    const Tensor64 weights = random_tensor(rng, output.dims(), -1.0, 1.0);
    const auto grads = conv2d_backward(input, kernels, stride, output, weights);

    const auto point = pack({&input, &kernels, &bias});
    const auto analytic = pack({&grads.input, &grads.kernels, &grads.bias});
    auto objective = [&](std::span<const double> x) {
        Tensor64 in = input;
        Tensor64 k = kernels;
        Tensor64 b = bias;
        unpack(x, {&in, &k, &b});
        const Tensor64 out = conv2d(in, k, b, stride);
        Evaluation eval{weighted_sum(out, weights), {}};
        for (const double v : out.values()) {
            eval.pattern.push_back(v > 0.0 ? 1 : 0);
        }
        return eval;
    };
    return gradient_check(std::move(name), objective, point, analytic, step);
}

GradCheckResult check_filter_max(Rng& rng, double step) {
    Tensor64 input = random_tensor(rng, {4, 3, 5}, -1.0, 1.0);
    const auto forward = max_over_filters(input);
    const Tensor64 weights = random_tensor(rng, forward.values.dims(), -1.0, 1.0);
    const auto grad = max_over_filters_backward(forward, 4, weights);
    auto objective = [&](std::span<const double> x) {
        Tensor64 in = input;
        unpack(x, {&in});
        const auto out = max_over_filters(in);
        return Evaluation{weighted_sum(out.values, weights), {out.argmax.begin(), out.argmax.end()}};
    };
    return gradient_check("max_over_filters", objective, input.values(), grad.values(), step);
}

GradCheckResult check_kmax(Rng& rng, double step) {
    Tensor64 input = random_tensor(rng, {4, 7}, -1.0, 1.0);
    const auto forward = kmax_per_row(input, 3);
    const Tensor64 weights = random_tensor(rng, forward.values.dims(), -1.0, 1.0);
    const auto grad = kmax_per_row_backward(forward, 7, weights);
    auto objective = [&](std::span<const double> x) {
        Tensor64 in = input;
        unpack(x, {&in});
        const auto out = kmax_per_row(in, 3);
        return Evaluation{weighted_sum(out.values, weights), {out.source.begin(), out.source.end()}};
    };
    return gradient_check("kmax_per_row", objective, input.values(), grad.values(), step);
}

GradCheckResult check_softmax(Rng& rng, double step) {
    const Tensor64 input = random_tensor(rng, {6}, -3.0, 3.0);
    const Tensor64 weights = random_tensor(rng, {6}, -1.0, 1.0);
    const auto output = softmax<double>(input.values());
    const auto grad = softmax_backward<double>(output, weights.values());
    auto objective = [&](std::span<const double> x) {
        const auto out = softmax<double>(x);
        double sum = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            sum += out[i] * weights[i];
        }
        return Evaluation{sum, {}};
    };
    return gradient_check("softmax", objective, input.values(), grad, step);
}

GradCheckResult check_recurrent(Rng& rng, double step) {
    Tensor64 inputs = random_tensor(rng, {4, 5}, -1.0, 1.0);
    Tensor64 w_input = random_tensor(rng, {4, 5}, -0.8, 0.8);
    Tensor64 w_recurrent = random_tensor(rng, {4}, -0.8, 0.8);
    Tensor64 bias = random_tensor(rng, {4}, -0.3, 0.3);
    const LstmWeights<double> weights{w_input, w_recurrent, bias};
    const auto trace = recurrent_sequence(inputs, weights);
    const auto grads = recurrent_sequence_backward(inputs, weights, trace, 1.0);
    const auto point = pack({&inputs, &w_input, &w_recurrent, &bias});
    const auto analytic = pack({&grads.inputs, &grads.w_input, &grads.w_recurrent, &grads.bias});
    auto objective = [&](std::span<const double> x) {
        Tensor64 in = inputs;
        Tensor64 wi = w_input;
        Tensor64 wr = w_recurrent;
        Tensor64 b = bias;
        unpack(x, {&in, &wi, &wr, &b});
        return Evaluation{recurrent_sequence(in, LstmWeights<double>{wi, wr, b}).output(), {}};
    };
    return gradient_check("recurrent_sequence", objective, point, analytic, step);
}

GradCheckResult check_hinge(double step) {
    const std::vector<double> point{0.2, 0.5};
    const auto [d_pos, d_neg] = hinge_loss_backward(point[0], point[1]);
    const std::vector<double> analytic{d_pos, d_neg};
    auto objective = [](std::span<const double> x) {
        return Evaluation{hinge_loss(x[0], x[1]), {1.0 - x[0] + x[1] > 0.0 ? 1 : 0}};
    };
    return gradient_check("hinge_loss", objective, point, analytic, step);
}

DistilledInput random_distilled(Rng& rng, const PacrrConfig& config, std::string doc_id, std::size_t query_len) {
    const std::size_t doc_len = config.l_d / 2 + uniform_index(rng, 2 * config.l_d);
    SimilarityMatrix sim{"q", std::move(doc_id), Matrix(query_len, doc_len)};
    for (auto& v : sim.values.values) {
        v = uniform_unit(rng) < 0.1 ? 1.0 : uniform_real(rng, -0.4, 0.9);
    }
    return distill(sim, config.mode, config.l_g, config.l_q, config.l_d);
}

std::vector<double> random_idf(Rng& rng, std::size_t n) {
    std::vector<double> idf(n);
    for (auto& v : idf) {
        v = uniform_real(rng, 0.0, 5.0);
    }
    return idf;
}

PacrrParams<double> verification_params(const PacrrConfig& config, Rng& rng) {
    auto params = init_params<double>(config);
    // Non-zero biases so their gradients are exercised too.
    for (auto& group : params.groups) {
        if (group.name.ends_with("bias")) {
            for (auto& v : group.value.values()) {
                v = uniform_real(rng, -0.1, 0.3);
            }
        }
    }
    return params;
}

std::vector<double> flatten_params(const PacrrParams<double>& params) {
    std::vector<double> flat;
    for (const auto& group : params.groups) {
        flat.insert(flat.end(), group.value.values().begin(), group.value.values().end());
    }
    return flat;
}

void assign_params(PacrrParams<double>& params, std::span<const double> flat) {
    std::size_t offset = 0;
    for (auto& group : params.groups) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), group.value.size(),
                    group.value.values().begin());
        offset += group.value.size();
    }
}

std::vector<double> flatten(const std::vector<Tensor64>& grads) {
    std::vector<double> flat;
    for (const auto& g : grads) {
        flat.insert(flat.end(), g.values().begin(), g.values().end());
    }
    return flat;
}

GradCheckResult check_pipeline(Rng& rng, PacrrConfig config, DistillMode mode, double step) {
    config.mode = mode;
    const auto params = verification_params(config, rng);
    const auto input = random_distilled(rng, config, "d", 1 + uniform_index(rng, config.l_q));
    const auto idf = random_idf(rng, input.query_len);
    const auto trace = score_forward(config, params, input, idf);
    const auto analytic = flatten(score_gradients(config, params, trace, 1.0));
    auto objective = [&, scratch = params](std::span<const double> x) mutable {
        assign_params(scratch, x);
        const auto t = score_forward(config, scratch, input, idf);
        return Evaluation{t.rel, t.routing_pattern()};
    };
    return gradient_check(std::string("score[") + to_string(mode) + "]", objective, flatten_params(params), analytic,
                          step);
}

GradCheckResult check_pairwise_loss(Rng& rng, const PacrrConfig& config, double step) {
    const auto params = verification_params(config, rng);
    const std::size_t query_len = 1 + uniform_index(rng, config.l_q);
    const auto positive = random_distilled(rng, config, "d+", query_len);
    const auto negative = random_distilled(rng, config, "d-", query_len);
    const auto idf = random_idf(rng, positive.query_len);

    const auto pos_trace = score_forward(config, params, positive, idf);
    const auto neg_trace = score_forward(config, params, negative, idf);
    const auto [d_pos, d_neg] = hinge_loss_backward(pos_trace.rel, neg_trace.rel);
    auto grads = score_gradients(config, params, pos_trace, d_pos);
    const auto neg_grads = score_gradients(config, params, neg_trace, d_neg);
    for (std::size_t g = 0; g < grads.size(); ++g) {
        for (std::size_t i = 0; i < grads[g].size(); ++i) {
            grads[g][i] += neg_grads[g][i];
        }
    }
    auto objective = [&, scratch = params](std::span<const double> x) mutable {
        assign_params(scratch, x);
        const auto p = score_forward(config, scratch, positive, idf);
        const auto n = score_forward(config, scratch, negative, idf);
        Evaluation eval{hinge_loss(p.rel, n.rel), p.routing_pattern()};
        const auto neg_pattern = n.routing_pattern();
        eval.pattern.insert(eval.pattern.end(), neg_pattern.begin(), neg_pattern.end());
        eval.pattern.push_back(1.0 - p.rel + n.rel > 0.0 ? 1 : 0);
        return eval;
    };
    return gradient_check("pairwise_loss", objective, flatten_params(params), flatten(grads), step);
}

}  // namespace

std::vector<GradCheckResult> run_gradient_checks(const PacrrConfig& config, std::uint64_t seed, double step) {
    config.validate();
    Rng rng(seed);
    std::vector<GradCheckResult> results;
    results.push_back(check_conv(rng, Stride{1, 1}, 2, "conv2d", step));
    results.push_back(check_conv(rng, Stride{1, 3}, 3, "conv2d[stride 1x3]", step));
    results.push_back(check_filter_max(rng, step));
    results.push_back(check_kmax(rng, step));
    results.push_back(check_softmax(rng, step));
    results.push_back(check_recurrent(rng, step));
    results.push_back(check_hinge(step));
    results.push_back(check_pipeline(rng, config, DistillMode::FirstK, step));
    results.push_back(check_pipeline(rng, config, DistillMode::KWindow, step));
    results.push_back(check_pairwise_loss(rng, config, step));
    return results;
}

}  // namespace pacrr
