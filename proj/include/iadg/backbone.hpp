#ifndef IADG_BACKBONE_HPP_
#define IADG_BACKBONE_HPP_

#include <cstdint>
#include <vector>

#include "iadg/dkg.hpp"

namespace iadg {

struct ModelConfig {
	/// Input channels followed by one entry per stage; every stage width even.
	std::vector<std::size_t> channels{3, 16, 32, 64};
	std::size_t image_size = 64;
	std::size_t kernel = 3;
	std::size_t depth_hidden = 16;
};

/// static block (conv → IN → relu), DKG block, stride-2 downsample conv.
struct StageParams {
	ConvRef block;
	DkgParams dkg;
	ConvRef down;
};

struct BackboneParams {
	std::vector<StageParams> stages;
};

struct BranchOutputs {
	Var stage1_feat;
	Var final_feat;
};

BackboneParams add_backbone(ParamSet& ps, const ModelConfig& cfg, Rng& rng);

/// Spatial size of the final feature map for input size S.
std::size_t final_spatial(const ModelConfig& cfg);

Var run_stage(Var x, const BoundParams& p, const StageParams& st, DkgMode mode);
/// Stages [first, end) of the backbone.
Var run_stages(Var x, const BoundParams& p, const BackboneParams& bb, std::size_t first, DkgMode mode);

/// Rejects S not divisible by 2^stages.
BranchOutputs extract(Var images, const BoundParams& p, const BackboneParams& bb, DkgMode mode = DkgMode::full);

}  // namespace iadg

#endif  // IADG_BACKBONE_HPP_
