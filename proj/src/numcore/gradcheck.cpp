#include "iadg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace iadg {

namespace {

double evaluate(const MultiScalarFn& f, std::span<const Tensor> xs) {
	Tape tape(false);
	std::vector<Var> vars;
	for (const Tensor& x : xs) vars.push_back(tape.constant(x));
	return f(vars).value().item();
}

double stencil(const std::function<double(double)>& f, double h) {
	return (8.0 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12.0 * h);
}

}  // namespace

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

double numeric_derivative(const std::function<double(double)>& f, double x0, double step) {
	// A kink (relu, abs) inside the stencil makes the larger of two successive
	// steps disagree; roundoff makes the smaller ones noisy. Take the larger
	// step of the best-agreeing pair.
	double h = step > 0 ? step : 1e-3 * std::max(1.0, std::abs(x0));
	double prev = stencil(f, h), best = prev, best_gap = std::numeric_limits<double>::infinity();
	for (int k = 0; k < 3; ++k) {
		h *= 0.1;
		const double next = stencil(f, h);
		const double gap = std::abs(prev - next);
		if (gap <= 1e-11 * std::max(1.0, std::abs(prev))) return prev;
		if (gap < best_gap) {
			best_gap = gap;
			best = prev;
		}
		prev = next;
	}
	return best;
}

double grad_check(const MultiScalarFn& f, std::span<const Tensor> xs, double step, std::size_t max_coords) {
	std::vector<Tensor> analytic;
	{
		Tape tape;
		std::vector<Var> vars;
		for (const Tensor& x : xs) vars.push_back(tape.leaf(x));
		const Gradients grads = tape.backward(f(vars));
		for (const Var& v : vars) analytic.push_back(grads[v]);
	}

	std::vector<Tensor> probe(xs.begin(), xs.end());
	double worst = 0.0;
	for (std::size_t t = 0; t < probe.size(); ++t) {
		const std::size_t stride = max_coords ? std::max<std::size_t>(1, probe[t].size() / max_coords) : 1;
		for (std::size_t i = 0; i < probe[t].size(); i += stride) {
			const double x0 = xs[t][i];
			const double numeric = numeric_derivative(
			    [&](double offset) {
				    probe[t][i] = x0 + offset;
				    return evaluate(f, probe);
			    },
			    x0, step);
			probe[t][i] = x0;
			worst = std::max(worst, rel_err(analytic[t][i], numeric));
		}
	}
	return worst;
}

double grad_check(const ScalarFn& f, const Tensor& x, double step, std::size_t max_coords) {
	const Tensor xs[] = {x};
	return grad_check([&f](std::span<const Var> v) { return f(v[0]); }, std::span<const Tensor>(xs), step, max_coords);
}

}  // namespace iadg
