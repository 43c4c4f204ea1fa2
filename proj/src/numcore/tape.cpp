#include <stdexcept>

#include "iadg/autodiff.hpp"

namespace iadg {

const Tensor& Var::value() const {
	if (!tape_) throw std::logic_error("value() on an unbound Var");
	return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value) {
	nodes_.push_back(Node{std::move(value), {}, {}, recording_, true});
	return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
	nodes_.push_back(Node{std::move(value), {}, {}, false, true});
	return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn fn) {
	Node node;
	node.value = std::move(value);
	bool needs = false;
	for (const Var& v : inputs) {
		if (v.tape() != this) throw std::invalid_argument("operation mixes Vars from different tapes");
		needs = needs || nodes_[v.id()].requires_grad;
	}
	if (recording_ && needs) {
		node.requires_grad = true;
		node.inputs.reserve(inputs.size());
		for (const Var& v : inputs) node.inputs.push_back(v.id());
		node.backward = std::move(fn);
	}
	nodes_.push_back(std::move(node));
	return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
	if (loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
	const Tensor& lv = nodes_[loss.id()].value;
	if (lv.size() != 1)
		throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(lv.shape()));

	Gradients out;
	out.grads_.resize(nodes_.size());
	auto& g = out.grads_;
	if (nodes_[loss.id()].requires_grad) g[loss.id()] = Tensor(lv.shape(), 1.0);

	std::vector<Tensor*> gin;
	for (std::size_t i = loss.id() + 1; i-- > 0;) {
		const Node& node = nodes_[i];
		if (node.is_leaf || !node.backward || g[i].empty()) continue;
		gin.assign(node.inputs.size(), nullptr);
		for (std::size_t k = 0; k < node.inputs.size(); ++k) {
			const std::size_t in = node.inputs[k];
			if (!nodes_[in].requires_grad) continue;
			if (g[in].empty()) g[in] = Tensor(nodes_[in].value.shape(), 0.0);
			gin[k] = &g[in];
		}
		node.backward(g[i], gin);
		g[i] = Tensor();  // intermediate gradients are not part of the result
	}
	for (std::size_t i = 0; i < nodes_.size(); ++i) {
		const Node& node = nodes_[i];
		if (node.is_leaf && node.requires_grad && g[i].empty()) g[i] = Tensor(node.value.shape(), 0.0);
		if (!node.is_leaf) g[i] = Tensor();
	}
	return out;
}

const Tensor& Gradients::operator[](Var v) const {
	if (v.id() >= grads_.size() || grads_[v.id()].empty())
		throw std::invalid_argument("no gradient recorded for node " + std::to_string(v.id()) +
		                            " (not a tracked leaf)");
	return grads_[v.id()];
}

bool Gradients::has(Var v) const { return v.id() < grads_.size() && !grads_[v.id()].empty(); }

}  // namespace iadg
