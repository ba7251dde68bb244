#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pacrr/gradcheck.hpp"
#include "pacrr/neural.hpp"
#include "pacrr/rng.hpp"

using namespace pacrr;

namespace {

Tensor<double> random_tensor(Rng& rng, std::vector<std::size_t> dims, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(std::move(dims));
    for (auto& v : t.values()) {
        v = uniform_real(rng, lo, hi);
    }
    return t;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(Conv2d, IdentityKernelRectifies) {
    const Tensor<double> input({1, 2}, {2.0, -3.0});
    const Tensor<double> kernel({1, 1, 1}, {1.0});
    const Tensor<double> bias({1}, {0.0});
    const auto out = conv2d(input, kernel, bias, {1, 1});
    EXPECT_EQ(out.dims(), (std::vector<std::size_t>{1, 1, 2}));
    EXPECT_EQ(out.at(0, 0, 0), 2.0);
    EXPECT_EQ(out.at(0, 0, 1), 0.0);
}

TEST(Conv2d, AllOnesKernelSumsWindow) {
    const Tensor<double> input({2, 2}, {1.0, 2.0, 3.0, 4.0});
    const Tensor<double> kernel({1, 2, 2}, 1.0);
    const auto out = conv2d(input, kernel, Tensor<double>({1}), {1, 1});
    EXPECT_EQ(out.dims(), (std::vector<std::size_t>{1, 2, 2}));
    EXPECT_EQ(out.at(0, 0, 0), 10.0);
}

TEST(Conv2d, StridedOutputWidth) {
    const Tensor<double> input({3, 6}, 0.5);
    const auto out = conv2d(input, Tensor<double>({2, 3, 3}, 0.1), Tensor<double>({2}), {1, 2});
    EXPECT_EQ(out.dims(), (std::vector<std::size_t>{2, 3, 3}));
}

TEST(Conv2d, SamePaddingArithmetic) {
    EXPECT_EQ(same_padding(12, 3, 1).out, 12u);
    EXPECT_EQ(same_padding(12, 3, 1).before, 1u);
    EXPECT_EQ(same_padding(12, 2, 1).before, 0u);
    EXPECT_EQ(same_padding(12, 3, 3).out, 4u);
    EXPECT_EQ(same_padding(12, 3, 3).before, 0u);
    EXPECT_EQ(same_padding(7, 2, 2).out, 4u);
}

TEST(FilterMax, ElementwiseMaximum) {
    const Tensor<double> single({1, 1, 2}, {0.3, -0.1});
    EXPECT_EQ(max_over_filters(single).values.values()[1], -0.1);
    EXPECT_EQ(max_over_filters(Tensor<double>({2, 1, 1}, {1.0, 3.0})).values.values()[0], 3.0);
    const auto out = max_over_filters(Tensor<double>({2, 1, 2}, {2.0, 5.0, 4.0, 1.0}));
    EXPECT_EQ(std::vector<double>(out.values.values().begin(), out.values.values().end()),
              (std::vector<double>{4.0, 5.0}));
}

TEST(FilterMax, PermutationInvariant) {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const auto input = random_tensor(rng, {4, 3, 5});
        std::vector<std::size_t> perm{0, 1, 2, 3};
        std::shuffle(perm.begin(), perm.end(), rng);
        Tensor<double> permuted(input.dims());
        for (std::size_t f = 0; f < 4; ++f) {
            for (std::size_t r = 0; r < 3; ++r) {
                for (std::size_t c = 0; c < 5; ++c) {
                    permuted.at(f, r, c) = input.at(perm[f], r, c);
                }
            }
        }
        EXPECT_EQ(max_over_filters(input).values, max_over_filters(permuted).values);
    }
}

TEST(KMax, SpecExamples) {
    auto row = [](std::vector<double> v, std::size_t k) {
        const auto out = kmax_per_row(Tensor<double>({1, v.size()}, v), k);
        return std::vector<double>(out.values.values().begin(), out.values.values().end());
    };
    EXPECT_EQ(row({0.1, 0.9, 0.5, 0.7}, 2), (std::vector<double>{0.9, 0.7}));
    EXPECT_EQ(row({0.3}, 3), (std::vector<double>{0.3, 0.0, 0.0}));
    EXPECT_EQ(row({0.5, 0.5, 0.5}, 2), (std::vector<double>{0.5, 0.5}));
}

TEST(KMax, TiesKeepEarliestSource) {
    const auto out = kmax_per_row(Tensor<double>({1, 3}, {0.5, 0.5, 0.5}), 2);
    EXPECT_EQ(out.source, (std::vector<std::int32_t>{0, 1}));
    const auto padded = kmax_per_row(Tensor<double>({1, 1}, {0.3}), 2);
    EXPECT_EQ(padded.source, (std::vector<std::int32_t>{0, -1}));
}

TEST(KMax, MatchesSortOracle) {
    Rng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t width = 1 + uniform_index(rng, 12);
        const std::size_t k = 1 + uniform_index(rng, 5);
        std::vector<double> row(width);
        for (auto& v : row) {
            v = static_cast<double>(uniform_index(rng, 7)) / 6.0;
        }
        const auto out = kmax_per_row(Tensor<double>({1, width}, row), k);
        const auto expected = oracle::sorted_top(row, k);
        ASSERT_EQ(std::vector<double>(out.values.values().begin(), out.values.values().end()), expected);
    }
}

TEST(Softmax, Examples) {
    const std::vector<double> zero{0.0, 0.0};
    EXPECT_EQ(softmax<double>(zero), (std::vector<double>{0.5, 0.5}));
    const std::vector<double> large{1000.0, 1000.0};
    EXPECT_EQ(softmax<double>(large), (std::vector<double>{0.5, 0.5}));
    const std::vector<double> logs{std::log(1.0), std::log(3.0)};
    const auto p = softmax<double>(logs);
    EXPECT_NEAR(p[0], 0.25, 1e-12);
    EXPECT_NEAR(p[1], 0.75, 1e-12);
    const std::vector<double> one{42.0};
    EXPECT_EQ(softmax<double>(one)[0], 1.0);
}

TEST(Softmax, SumsToOneAndTranslationInvariant) {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(1 + uniform_index(rng, 8));
        for (auto& v : x) {
            v = uniform_real(rng, -20.0, 20.0);
        }
        const auto p = softmax<double>(x);
        EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
        const double shift = uniform_real(rng, -100.0, 100.0);
        auto shifted = x;
        for (auto& v : shifted) {
            v += shift;
        }
        const auto q = softmax<double>(shifted);
        for (std::size_t i = 0; i < p.size(); ++i) {
            EXPECT_NEAR(p[i], q[i], 1e-9);
        }
    }
}

TEST(Lstm, ZeroWeightsGiveZero) {
    const Tensor<double> w_input({4, 3});
    const Tensor<double> w_rec({4});
    const Tensor<double> bias({4});
    Rng rng(1);
    const auto trace = recurrent_sequence(random_tensor(rng, {5, 3}), LstmWeights<double>{w_input, w_rec, bias});
    EXPECT_EQ(trace.output(), 0.0);
    EXPECT_EQ(trace.gates[0], 0.5);
}

TEST(Lstm, SingleStepHandEvaluation) {
    const Tensor<double> w_input({4, 1}, {0.5, -0.3, 0.8, 1.2});
    const Tensor<double> w_rec({4}, {0.7, 0.7, 0.7, 0.7});  // irrelevant at t = 1 since h_0 = 0
    const Tensor<double> bias({4}, {0.1, 0.2, -0.1, 0.05});
    const auto trace = recurrent_sequence(Tensor<double>({1, 1}, {1.0}), LstmWeights<double>{w_input, w_rec, bias});
    const double i = sigmoid(0.6);
    const double o = sigmoid(0.7);
    const double g = std::tanh(1.25);
    EXPECT_NEAR(trace.output(), o * std::tanh(i * g), 1e-15);
}

TEST(Lstm, TwoStepHandEvaluation) {
    const Tensor<double> w_input({4, 1}, {0.5, -0.3, 0.8, 1.2});
    const Tensor<double> w_rec({4}, {0.4, -0.6, 0.2, 0.9});
    const Tensor<double> bias({4}, {0.1, 0.2, -0.1, 0.05});
    const auto trace =
        recurrent_sequence(Tensor<double>({2, 1}, {1.0, -0.5}), LstmWeights<double>{w_input, w_rec, bias});
    double h = 0.0;
    double c = 0.0;
    for (const double x : {1.0, -0.5}) {
        const double i = sigmoid(0.5 * x + 0.4 * h + 0.1);
        const double f = sigmoid(-0.3 * x - 0.6 * h + 0.2);
        const double o = sigmoid(0.8 * x + 0.2 * h - 0.1);
        const double g = std::tanh(1.2 * x + 0.9 * h + 0.05);
        c = f * c + i * g;
        h = o * std::tanh(c);
    }
    EXPECT_NEAR(trace.output(), h, 1e-15);
}

TEST(Lstm, OutputBounded) {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const auto w_input = random_tensor(rng, {4, 3}, -5.0, 5.0);
        const auto w_rec = random_tensor(rng, {4}, -5.0, 5.0);
        const auto bias = random_tensor(rng, {4}, -5.0, 5.0);
        const auto out =
            recurrent_sequence(random_tensor(rng, {4, 3}), LstmWeights<double>{w_input, w_rec, bias}).output();
        EXPECT_GT(out, -1.0);
        EXPECT_LT(out, 1.0);
    }
}

TEST(Hinge, Examples) {
    EXPECT_EQ(hinge_loss(1.5, 0.2), 0.0);
    EXPECT_EQ(hinge_loss(0.5, 0.5), 1.0);
    EXPECT_NEAR(hinge_loss(0.2, 0.5), 1.3, 1e-15);
    EXPECT_EQ(hinge_loss_backward(1.5, 0.2), std::make_pair(0.0, 0.0));
    EXPECT_EQ(hinge_loss_backward(0.2, 0.5), std::make_pair(-1.0, 1.0));
}

TEST(Sgd, UpdatesAndClears) {
    std::vector<ParamGroup<double>> groups{ParamGroup<double>("w", Tensor<double>({1}, {1.0}))};
    groups[0].gradient.values()[0] = 0.5;
    sgd_step<double>(groups, 0.1);
    EXPECT_DOUBLE_EQ(groups[0].value.values()[0], 0.95);
    EXPECT_EQ(groups[0].gradient.values()[0], 0.0);
    sgd_step<double>(groups, 0.1);
    EXPECT_DOUBLE_EQ(groups[0].value.values()[0], 0.95);
}

TEST(Sgd, NonFiniteGradientRejectedWithoutChanges) {
    std::vector<ParamGroup<double>> groups{ParamGroup<double>("a", Tensor<double>({1}, {1.0})),
                                           ParamGroup<double>("b", Tensor<double>({1}, {2.0}))};
    groups[0].gradient.values()[0] = 1.0;
    groups[1].gradient.values()[0] = std::numeric_limits<double>::quiet_NaN();
    try {
        sgd_step<double>(groups, 0.1);
        FAIL() << "expected invalid_argument";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find('b'), std::string::npos);
    }
    EXPECT_EQ(groups[0].value.values()[0], 1.0);
}

TEST(GradCheck, RelativeErrorFloor) {
    EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
    EXPECT_NEAR(relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
    EXPECT_NEAR(relative_error(1e-9, 0.0), 1e-3, 1e-15);
}

TEST(GradCheck, DetectsWrongGradient) {
    const Objective square = [](std::span<const double> x) { return Evaluation{x[0] * x[0], {}}; };
    const std::vector<double> point{0.7};
    const std::vector<double> right{1.4};
    const std::vector<double> wrong{1.5};
    EXPECT_LT(gradient_check("sq", square, point, right).max_relative_error, 1e-8);
    EXPECT_GT(gradient_check("sq", square, point, wrong).max_relative_error, 1e-2);
}

TEST(GradCheck, ExcludesKinkCoordinates) {
    const Objective relu = [](std::span<const double> x) {
        return Evaluation{std::max(x[0], 0.0), {x[0] > 0.0 ? 1 : 0}};
    };
    const std::vector<double> at_kink{0.0};
    const std::vector<double> analytic{0.0};
    const auto result = gradient_check("relu", relu, at_kink, analytic);
    EXPECT_EQ(result.excluded, 1u);
    EXPECT_EQ(result.checked, 0u);
}

TEST(GradCheck, EveryOpPasses) {
    PacrrConfig tiny;
    tiny.l_q = 4;
    tiny.l_d = 12;
    tiny.l_g = 3;
    tiny.n_f = 4;
    tiny.n_s = 2;
    for (const std::uint64_t seed : {1u, 2u, 3u}) {
        const auto results = run_gradient_checks(tiny, seed);
        ASSERT_GE(results.size(), 10u);
        for (const auto& r : results) {
            const double tolerance = r.name == "hinge_loss" ? 1e-6 : 1e-4;
            EXPECT_LT(r.max_relative_error, tolerance) << r.name << " seed " << seed;
            EXPECT_GT(r.checked, 0u) << r.name;
        }
    }
}

TEST(GradCheck, Deterministic) {
    PacrrConfig tiny;
    tiny.l_q = 3;
    tiny.l_d = 9;
    tiny.n_f = 2;
    const auto a = run_gradient_checks(tiny, 5);
    const auto b = run_gradient_checks(tiny, 5);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].max_relative_error, b[i].max_relative_error);
        EXPECT_EQ(a[i].checked, b[i].checked);
    }
}
