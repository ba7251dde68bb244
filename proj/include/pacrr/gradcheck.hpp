#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pacrr/model.hpp"

namespace pacrr {

/// Objective value plus the discrete routing decisions (rectification masks,
/// argmax/k-max sources, hinge activity) taken while computing it. A change in
/// the pattern means a perturbation crossed a non-differentiable point.
struct Evaluation {
    double value = 0.0;
    std::vector<std::int64_t> pattern;
};

using Objective = std::function<Evaluation(std::span<const double>)>;

struct GradCheckResult {
    std::string name;
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t excluded = 0;

    bool passed(double tolerance) const { return max_relative_error < tolerance; }
};

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
double relative_error(double analytic, double numeric);

/// Compares `analytic` with central differences (f(x + h) - f(x - h)) / 2h at
/// every coordinate of `point`. Coordinates whose perturbation changes the
/// routing pattern are excluded and counted.
GradCheckResult gradient_check(std::string name, const Objective& objective, std::span<const double> point,
                               std::span<const double> analytic, double step = 1e-5);

/// Checks every differentiable op plus the full scoring pipeline (and the
/// pairwise loss through it) on seeded random inputs in double precision.
std::vector<GradCheckResult> run_gradient_checks(const PacrrConfig& config, std::uint64_t seed, double step = 1e-5);

}  // namespace pacrr
