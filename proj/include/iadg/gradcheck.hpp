#ifndef IADG_GRADCHECK_HPP_
#define IADG_GRADCHECK_HPP_

#include <functional>

#include "iadg/autodiff.hpp"

namespace iadg {

/// Builds a scalar from `x` on x's tape.
using ScalarFn = std::function<Var(Var x)>;

/// |a - b| / max(|a|, |b|, 1e-8)
double rel_err(double a, double b);

/**
 * Fourth-order central difference of f at offset 0. Estimates at `step`
 * (<= 0: 1e-3·max(1, |x0|)) and three tenfold smaller steps; returns the
 * larger step of the best-agreeing successive pair, so neither a kink near
 * x0 nor roundoff at tiny steps dominates.
 */
double numeric_derivative(const std::function<double(double offset)>& f, double x0, double step = 0.0);

/**
 * Compares reverse-mode gradients of f at x with numeric_derivative per
 * coordinate and returns the worst rel_err. max_coords > 0 probes an evenly
 * strided subset of about that many coordinates per input.
 */
double grad_check(const ScalarFn& f, const Tensor& x, double step = 0.0, std::size_t max_coords = 0);

/// Multi-input variant: every tensor in `xs` is perturbed.
using MultiScalarFn = std::function<Var(std::span<const Var> xs)>;
double grad_check(const MultiScalarFn& f, std::span<const Tensor> xs, double step = 0.0, std::size_t max_coords = 0);

}  // namespace iadg

#endif  // IADG_GRADCHECK_HPP_
