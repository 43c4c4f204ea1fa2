#include "iadg/backbone.hpp"

#include <stdexcept>

namespace iadg {

BackboneParams add_backbone(ParamSet& ps, const ModelConfig& cfg, Rng& rng) {
	if (cfg.channels.size() < 2) throw std::invalid_argument("channel plan needs input width and at least one stage");
	BackboneParams bb;
	const std::size_t k = cfg.kernel;
	for (std::size_t s = 1; s < cfg.channels.size(); ++s) {
		const std::size_t cin = cfg.channels[s - 1], c = cfg.channels[s];
		if (c % 2 != 0) throw std::invalid_argument("stage " + std::to_string(s) + " width " + std::to_string(c) + " is odd");
		const std::string name = "stage" + std::to_string(s);
		StageParams st;
		st.block = add_conv(ps, name + ".block", cin, c, k, 1, k / 2, rng);
		st.dkg = add_dkg(ps, name + ".dkg", c, rng, k);
		st.down = add_conv(ps, name + ".down", c, c, k, 2, k / 2, rng);
		bb.stages.push_back(st);
	}
	return bb;
}

std::size_t final_spatial(const ModelConfig& cfg) {
	return cfg.image_size >> (cfg.channels.size() - 1);
}

Var run_stage(Var x, const BoundParams& p, const StageParams& st, DkgMode mode) {
	Var h = relu(instance_norm(apply(p, st.block, x)));
	h = dkg_forward(h, p, st.dkg, mode);
	return apply(p, st.down, h);
}

Var run_stages(Var x, const BoundParams& p, const BackboneParams& bb, std::size_t first, DkgMode mode) {
	for (std::size_t s = first; s < bb.stages.size(); ++s) x = run_stage(x, p, bb.stages[s], mode);
	return x;
}

BranchOutputs extract(Var images, const BoundParams& p, const BackboneParams& bb, DkgMode mode) {
	const Shape& s = images.shape();
	if (s.size() != 4) throw std::invalid_argument("extract: images must be N×3×S×S, got " + shape_str(s));
	const std::size_t factor = std::size_t{1} << bb.stages.size();
	if (s[2] != s[3] || s[2] % factor != 0)
		throw std::invalid_argument("extract: image size " + std::to_string(s[2]) + " must be square and divisible by " +
		                            std::to_string(factor));
	BranchOutputs out;
	out.stage1_feat = run_stage(images, p, bb.stages.front(), mode);
	out.final_feat = run_stages(out.stage1_feat, p, bb, 1, mode);
	return out;
}

}  // namespace iadg
