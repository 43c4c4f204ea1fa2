#ifndef IADG_MODEL_HPP_
#define IADG_MODEL_HPP_

#include <cstdint>
#include <optional>
#include <span>

#include "iadg/backbone.hpp"
#include "iadg/heads.hpp"
#include "iadg/style.hpp"

namespace iadg {

struct Model {
	ModelConfig config;
	ParamSet params;
	BackboneParams backbone;
	HeadParams heads;

	static Model create(const ModelConfig& cfg, std::uint64_t seed);
};

struct DualOutputs {
	BranchOutputs org;
	std::optional<BranchOutputs> aug;
	StyleTargets targets;
};

/**
 * Runs stage 1 once, then stages 2.. on the original map and (unless
 * aug == off) on its restyled copy. csa draws label-preserving styles from
 * `bank`; random_mix mixes batch statistics.
 */
DualOutputs forward_dual(Var images, const BoundParams& p, const Model& m, std::span<const ClassLabel> labels,
                         AugMode aug, const StyleBank* bank, Rng& rng, DkgMode dkg = DkgMode::full);

/// Inference: original branch only, liveness probabilities (sigmoid of the cls logit).
std::vector<double> predict(const Model& m, const Tensor& images, DkgMode dkg = DkgMode::full);

}  // namespace iadg

#endif  // IADG_MODEL_HPP_
