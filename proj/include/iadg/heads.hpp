#ifndef IADG_HEADS_HPP_
#define IADG_HEADS_HPP_

#include "iadg/params.hpp"

namespace iadg {

/// cls: pool → dense → logit. dep: 3×3 conv → relu → 3×3 conv to one channel.
struct HeadParams {
	DenseRef cls;
	ConvRef dep_hidden;
	ConvRef dep_out;
};

HeadParams add_heads(ParamSet& ps, std::size_t channels, std::size_t hidden, Rng& rng);

/// N logits.
Var cls_logits(Var features, const BoundParams& p, const HeadParams& h);
/// N×1×D×D, D the spatial size of `features`.
Var depth_map(Var features, const BoundParams& p, const HeadParams& h);

/// Per-sample BCE summed over the branches present, averaged over the batch.
/// `logits_aug` may be unbound (original branch only). y holds 1 for real, 0 for spoof.
Var cls_loss(Var logits_org, Var logits_aug, const Tensor& y);
/// Squared depth error summed over branches, averaged over batch and pixels.
Var depth_loss(Var depth_org, Var depth_aug, const Tensor& y_dep);
/// cls + λ·dep (+ aiaw when bound).
Var total_loss(Var cls, Var dep, Var aiaw, double lambda);

}  // namespace iadg

#endif  // IADG_HEADS_HPP_
