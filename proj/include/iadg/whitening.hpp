#ifndef IADG_WHITENING_HPP_
#define IADG_WHITENING_HPP_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iadg/autodiff.hpp"
#include "iadg/labels.hpp"

namespace iadg {

/// (1/HW)·F·Fᵀ of the instance-normalized C×H×W feature.
Tensor covariance(const Tensor& feature, double eps = 1e-5);
/// Batched, differentiable: N×C×H×W -> N×C×C.
Var covariance(Var features, double eps = 1e-5);

/// Mean over pairs of the elementwise variance between the two branches.
Tensor variance_matrix(std::span<const std::pair<Tensor, Tensor>> pairs);

/// Binary C×C mask, nonzero only strictly above the diagonal.
struct SelectiveMask {
	Tensor m;
	double ratio = 0.0;
	std::vector<std::pair<std::size_t, std::size_t>> positions;  // selected (row, col), largest V first

	std::size_t count() const { return positions.size(); }
};

/// Number of strictly-upper entries selected for ratio k: floor(C(C−1)/2 · k).
std::size_t mask_count(std::size_t channels, double k);

/// Top floor(U·k) strictly-upper positions of V; ties by (row, col) order.
SelectiveMask selective_mask(const Tensor& v, double k);
SelectiveMask full_mask(std::size_t channels);

enum class WhiteningMode { off, full_iw, symmetric, asymmetric };
std::string to_string(WhiteningMode m);
WhiteningMode parse_whitening_mode(const std::string& s);

struct WhiteningConfig {
	WhiteningMode mode = WhiteningMode::asymmetric;
	double k_real = 0.003;
	double k_spoof = 0.0006;

	/// Rejects k_real < k_spoof and ratios outside [0, 1].
	void validate() const;
	/// Ratio actually used for class c under this mode.
	double ratio(ClassLabel c) const;
};

struct AiawResult {
	Var loss;
	SelectiveMask real_mask;
	SelectiveMask spoof_mask;
	/// Per-sample mean |Σ_org| over its class mask (NaN where the mask is empty).
	std::vector<double> masked_abs_org;
};

/**
 * Bilateral selective whitening loss. Per class, V is built from that class's
 * (Σ_org, Σ_aug) pairs in the batch, giving the mask M(k_c); the loss sums,
 * over classes and branches, the batch mean of mean |Σ_t ⊙ M| over selected
 * entries. Empty subgroups and empty masks contribute zero. `sigma_aug` may be
 * unbound only for full_iw (the mask then does not need V).
 */
AiawResult aiaw_loss(Var sigma_org, Var sigma_aug, std::span<const ClassLabel> labels, const WhiteningConfig& cfg);

/// Masked statistic used for diagnostics: per-sample mean |Σ| over the given mask.
double masked_abs_mean(const Tensor& sigma, const SelectiveMask& mask);

}  // namespace iadg

#endif  // IADG_WHITENING_HPP_
