#pragma once

#include <functional>
#include <span>
#include <vector>

namespace avood {

// log Σ exp(vᵢ), computed with max-subtraction so no intermediate overflows.
// Satisfies logsumexp(v + c) = logsumexp(v) + c up to rounding.
double logsumexp(std::span<const double> v);

// exp(vᵢ − logsumexp(v)); sums to 1.
std::vector<double> softmax(std::span<const double> v);

// Max over coordinates of |central difference − analytic| / max(1, |analytic|)
// for f around `point` with the given step. The workhorse behind every
// gradient test in the library.
double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> analytic, std::span<const double> point, double step);

}  // namespace avood
