#ifndef IADG_AUTODIFF_HPP_
#define IADG_AUTODIFF_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "iadg/tensor.hpp"

namespace iadg {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
public:
	static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

	Var() = default;
	Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

	Tape* tape() const { return tape_; }
	std::size_t id() const { return id_; }
	bool valid() const { return tape_ != nullptr; }

	const Tensor& value() const;
	const Shape& shape() const { return value().shape(); }
	bool requires_grad() const;

private:
	Tape* tape_ = nullptr;
	std::size_t id_ = npos;
};

/// Receives dL/d(output) and accumulates into dL/d(input_k) for every
/// input that needs a gradient (null pointers for the others).
using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> grad_in)>;

class Gradients;

/**
 * Reverse-mode record. Nodes are appended in evaluation order, so the
 * node list is topologically sorted by construction. Node storage is a deque:
 * references returned by value() stay valid while the tape grows.
 */
class Tape {
public:
	explicit Tape(bool recording = true) : recording_(recording) {}
	Tape(const Tape&) = delete;
	Tape& operator=(const Tape&) = delete;

	/// Leaf whose gradient is reported by backward(); untracked when not recording.
	Var leaf(Tensor value);
	Var constant(Tensor value);
	Var record(Tensor value, std::vector<Var> inputs, BackwardFn fn);

	const Tensor& value(std::size_t id) const { return nodes_[id].value; }
	bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
	bool recording() const { return recording_; }
	std::size_t size() const { return nodes_.size(); }

	/// Gradients of a scalar loss w.r.t. every tracked leaf.
	Gradients backward(Var loss) const;

private:
	struct Node {
		Tensor value;
		std::vector<std::size_t> inputs;
		BackwardFn backward;
		bool requires_grad = false;
		bool is_leaf = false;
	};
	std::deque<Node> nodes_;
	bool recording_;
};

class Gradients {
public:
	/// dL/dv for a tracked leaf; all-zeros when the leaf does not reach the loss.
	const Tensor& operator[](Var v) const;
	bool has(Var v) const;

private:
	friend class Tape;
	std::vector<Tensor> grads_;
};

// ---- primitive operations -------------------------------------------------
// All shape violations throw std::invalid_argument naming the offending extent.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var square(Var a);
Var abs(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var sum(Var a);
Var mean(Var a);
Var reshape(Var a, Shape shape);
/// (M×K)·(K×N)
Var matmul(Var a, Var b);
/// x: N×I, weight: O×I, bias: O
Var linear(Var x, Var weight, Var bias);
/// Elementwise numerically stable binary cross-entropy of sigmoid(logits) vs targets.
Var bce_with_logits(Var logits, Var targets);

Var concat_channels(Var a, Var b);
Var slice_channels(Var x, std::size_t begin, std::size_t count);

/// Cross-correlation. input N×Cin×H×W, kernel Cout×Cin×k×k (k odd), bias Cout.
Var conv2d(Var input, Var kernel, Var bias, std::size_t stride, std::size_t pad);
/// Per-sample depthwise cross-correlation, stride 1: kernels N×C×k×k, pad k/2.
Var dynamic_depthwise_conv2d(Var input, Var kernels);
Var instance_norm(Var x, double eps = 1e-5);
/// N×C×H×W -> N×C spatial mean.
Var global_avg_pool(Var x);
/// N×C×H×W -> N×C×C, (1/HW)·F·Fᵀ per sample.
Var channel_gram(Var x);
/// y[n,c,:,:] = scale[n,c]·x[n,c,:,:] + shift[n,c]
Var channel_affine(Var x, Var scale, Var shift);

}  // namespace iadg

#endif  // IADG_AUTODIFF_HPP_
