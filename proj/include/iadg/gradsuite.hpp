#ifndef IADG_GRADSUITE_HPP_
#define IADG_GRADSUITE_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "iadg/gradcheck.hpp"
#include "iadg/params.hpp"

namespace iadg {

/// Finite-difference check of dL/dθ for the named parameters (up to `max_coords` coordinates each).
double param_grad_check(ParamSet params, const std::vector<std::string>& names,
                        const std::function<Var(Tape&, const BoundParams&)>& loss, std::size_t max_coords = 48,
                        double step = 0.0);

struct GradCase {
	std::string name;
	/// Max relative error for inputs drawn from `seed`.
	std::function<double(std::uint64_t seed)> run;
};

/// Every differentiable primitive plus each composed training loss.
std::vector<GradCase> gradient_cases();

struct GradResult {
	std::string name;
	std::uint64_t seed = 0;
	double max_rel_err = 0.0;
};

std::vector<GradResult> run_gradient_suite(std::span<const std::uint64_t> seeds);

}  // namespace iadg

#endif  // IADG_GRADSUITE_HPP_
