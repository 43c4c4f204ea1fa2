#include "iadg/model.hpp"

#include <cmath>
#include <stdexcept>

namespace iadg {

Model Model::create(const ModelConfig& cfg, std::uint64_t seed) {
	Model m;
	m.config = cfg;
	Rng rng = Rng(seed).split(0x1417);
	m.backbone = add_backbone(m.params, cfg, rng);
	m.heads = add_heads(m.params, cfg.channels.back(), cfg.depth_hidden, rng);
	return m;
}

DualOutputs forward_dual(Var images, const BoundParams& p, const Model& m, std::span<const ClassLabel> labels,
                         AugMode aug, const StyleBank* bank, Rng& rng, DkgMode dkg) {
	DualOutputs out;
	out.org = extract(images, p, m.backbone, dkg);
	if (aug == AugMode::off) return out;

	Var s1 = out.org.stage1_feat;
	if (labels.size() != s1.shape()[0]) throw std::invalid_argument("forward_dual: one label per image required");
	if (aug == AugMode::csa) {
		if (!bank || !bank->populated())
			throw std::invalid_argument("forward_dual: augmented branch needs a populated style bank");
		if (bank->channels() != s1.shape()[1])
			throw std::invalid_argument("forward_dual: style bank has " + std::to_string(bank->channels()) +
			                            " channels, stage-1 features have " + std::to_string(s1.shape()[1]));
		out.targets = csa_targets(labels, *bank, rng);
	} else {
		out.targets = random_mix_targets(compute_style_stats(s1.value(), labels), rng);
	}
	Tape& tape = p.tape();
	Var restyled = reassemble(s1, tape.constant(out.targets.mu), tape.constant(out.targets.sigma));
	out.aug = BranchOutputs{restyled, run_stages(restyled, p, m.backbone, 1, dkg)};
	return out;
}

std::vector<double> predict(const Model& m, const Tensor& images, DkgMode dkg) {
	Tape tape(false);
	BoundParams p(tape, m.params, false);
	Var feats = extract(tape.constant(images), p, m.backbone, dkg).final_feat;
	const Tensor& logits = cls_logits(feats, p, m.heads).value();
	std::vector<double> probs(logits.size());
	for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = 1.0 / (1.0 + std::exp(-logits[i]));
	return probs;
}

}  // namespace iadg
