#ifndef IADG_STYLE_HPP_
#define IADG_STYLE_HPP_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iadg/autodiff.hpp"
#include "iadg/labels.hpp"
#include "iadg/rng.hpp"

namespace iadg {

/// Variance floor for style statistics and the matching normalization in
/// reassemble(); small so restyled maps carry the target std almost exactly.
inline constexpr double kStyleEps = 1e-8;

/// Per-channel spatial mean and eps-stabilized std of one instance.
struct StyleStats {
	std::vector<double> mu;
	std::vector<double> sigma;
	ClassLabel label = ClassLabel::real;

	/// [mu; sigma], the point used for farthest point sampling.
	std::vector<double> vector() const;
};

/// One StyleStats per instance of an N×C×H×W map; labels.size() must be N.
std::vector<StyleStats> compute_style_stats(const Tensor& features, std::span<const ClassLabel> labels,
                                            double eps = kStyleEps);

/**
 * Greedy max-min subset of `points` (Euclidean). The seed is the point
 * farthest from the centroid; each next pick maximizes its distance to the
 * nearest selected point. Ties go to the lowest index. L >= |points|
 * returns every index in order.
 */
std::vector<std::size_t> fps_select(const std::vector<std::vector<double>>& points, std::size_t L);

/// L×C basis of one class.
struct StyleBasis {
	Tensor mu;
	Tensor sigma;
	std::size_t size() const { return mu.empty() ? 0 : mu.dim(0); }
};

struct StyleBank {
	StyleBasis real;
	StyleBasis spoof;
	long epoch_stamp = -1;

	const StyleBasis& basis(ClassLabel c) const { return c == ClassLabel::real ? real : spoof; }
	bool populated() const { return real.size() > 0 && spoof.size() > 0; }
	std::size_t channels() const { return real.mu.empty() ? 0 : real.mu.dim(1); }
};

/// FPS per class over a pool of styles; both classes must be present.
StyleBank build_bank(std::span<const StyleStats> pool, std::size_t L, long epoch);

/// Dirichlet(1/L, …, 1/L) draw via normalized Gamma variates.
std::vector<double> sample_weights(std::size_t L, Rng& rng);

/// Convex combination of the class-c basis styles.
std::pair<std::vector<double>, std::vector<double>> assemble_style(std::span<const double> weights,
                                                                   const StyleBank& bank, ClassLabel c);

/// AdaIN: sigma_aug ⊙ (F − μ(F)) / σ(F) + mu_aug per instance and channel. mu/sigma are N×C.
Var reassemble(Var features, Var mu_aug, Var sigma_aug, double eps = kStyleEps);

/// How the augmented branch picks its target style.
enum class AugMode { off, random_mix, csa };
std::string to_string(AugMode m);
AugMode parse_aug_mode(const std::string& s);

/// Target (mu, sigma) N×C tensors for an augmented branch.
struct StyleTargets {
	Tensor mu;
	Tensor sigma;
	/// Class whose basis produced each instance's style (csa only).
	std::vector<ClassLabel> style_class;
};

/// Category-aware assembly: one Dirichlet draw per instance from its own class basis.
StyleTargets csa_targets(std::span<const ClassLabel> labels, const StyleBank& bank, Rng& rng);

/// Class-agnostic baseline: mix each instance's style with a random batch partner, Beta(0.1, 0.1) weight.
StyleTargets random_mix_targets(std::span<const StyleStats> batch_styles, Rng& rng);

}  // namespace iadg

#endif  // IADG_STYLE_HPP_
