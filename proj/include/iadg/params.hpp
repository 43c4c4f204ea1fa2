#ifndef IADG_PARAMS_HPP_
#define IADG_PARAMS_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "iadg/autodiff.hpp"
#include "iadg/rng.hpp"

namespace iadg {

/// Index of a tensor inside a ParamSet.
struct ParamRef {
	std::size_t index = 0;
};

/// Named, ordered collection of trainable tensors.
class ParamSet {
public:
	ParamRef add(std::string name, Tensor value);
	std::size_t size() const { return values_.size(); }
	const std::string& name(std::size_t i) const { return names_[i]; }
	Tensor& operator[](ParamRef r) { return values_[r.index]; }
	const Tensor& operator[](ParamRef r) const { return values_[r.index]; }
	std::vector<Tensor>& values() { return values_; }
	const std::vector<Tensor>& values() const { return values_; }
	const std::vector<std::string>& names() const { return names_; }
	/// Throws std::out_of_range for unknown names.
	ParamRef find(const std::string& name) const;

private:
	std::vector<std::string> names_;
	std::vector<Tensor> values_;
};

/// A ParamSet placed on a tape; leaves are tracked only when `trainable`.
class BoundParams {
public:
	BoundParams(Tape& tape, const ParamSet& params, bool trainable);
	Var operator[](ParamRef r) const { return vars_[r.index]; }
	const std::vector<Var>& vars() const { return vars_; }
	Tape& tape() const { return *tape_; }

private:
	Tape* tape_;
	std::vector<Var> vars_;
};

struct ConvRef {
	ParamRef weight;
	ParamRef bias;
	std::size_t stride = 1;
	std::size_t pad = 0;
};

struct DenseRef {
	ParamRef weight;
	ParamRef bias;
};

/// Cout×Cin×k×k kernel with centered uniform fan-in init, zero bias.
ConvRef add_conv(ParamSet& ps, const std::string& name, std::size_t cin, std::size_t cout, std::size_t k,
                 std::size_t stride, std::size_t pad, Rng& rng);
DenseRef add_dense(ParamSet& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                   bool zero_init = false);

Var apply(const BoundParams& p, const ConvRef& c, Var x);
Var apply(const BoundParams& p, const DenseRef& d, Var x);

}  // namespace iadg

#endif  // IADG_PARAMS_HPP_
