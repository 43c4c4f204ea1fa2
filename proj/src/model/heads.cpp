#include "iadg/heads.hpp"

#include <stdexcept>

namespace iadg {

HeadParams add_heads(ParamSet& ps, std::size_t channels, std::size_t hidden, Rng& rng) {
	HeadParams h;
	h.cls = add_dense(ps, "head.cls", channels, 1, rng);
	h.dep_hidden = add_conv(ps, "head.dep1", channels, hidden, 3, 1, 1, rng);
	h.dep_out = add_conv(ps, "head.dep2", hidden, 1, 3, 1, 1, rng);
	return h;
}

Var cls_logits(Var features, const BoundParams& p, const HeadParams& h) {
	Var logits = apply(p, h.cls, global_avg_pool(features));
	return reshape(logits, {features.shape()[0]});
}

Var depth_map(Var features, const BoundParams& p, const HeadParams& h) {
	return apply(p, h.dep_out, relu(apply(p, h.dep_hidden, features)));
}

Var cls_loss(Var logits_org, Var logits_aug, const Tensor& y) {
	Tape& tape = *logits_org.tape();
	if (y.shape() != logits_org.shape())
		throw std::invalid_argument("cls_loss: labels " + shape_str(y.shape()) + " vs logits " +
		                            shape_str(logits_org.shape()));
	Var target = tape.constant(y);
	Var loss = mean(bce_with_logits(logits_org, target));
	if (logits_aug.valid()) loss = add(loss, mean(bce_with_logits(logits_aug, target)));
	return loss;
}

Var depth_loss(Var depth_org, Var depth_aug, const Tensor& y_dep) {
	Tape& tape = *depth_org.tape();
	if (y_dep.shape() != depth_org.shape())
		throw std::invalid_argument("depth_loss: label shape " + shape_str(y_dep.shape()) + " does not match prediction " +
		                            shape_str(depth_org.shape()));
	Var target = tape.constant(y_dep);
	Var loss = mean(square(sub(depth_org, target)));
	if (depth_aug.valid()) {
		if (depth_aug.shape() != y_dep.shape())
			throw std::invalid_argument("depth_loss: augmented prediction shape " + shape_str(depth_aug.shape()) +
			                            " does not match label " + shape_str(y_dep.shape()));
		loss = add(loss, mean(square(sub(depth_aug, target))));
	}
	return loss;
}

Var total_loss(Var cls, Var dep, Var aiaw, double lambda) {
	if (lambda < 0) throw std::invalid_argument("total_loss: lambda must be non-negative");
	Var t = add(cls, scale(dep, lambda));
	if (aiaw.valid()) t = add(t, aiaw);
	return t;
}

}  // namespace iadg
