#include "iadg/params.hpp"

#include <cmath>
#include <stdexcept>

namespace iadg {

ParamRef ParamSet::add(std::string name, Tensor value) {
	for (const auto& n : names_)
		if (n == name) throw std::invalid_argument("duplicate parameter name " + name);
	names_.push_back(std::move(name));
	values_.push_back(std::move(value));
	return ParamRef{values_.size() - 1};
}

ParamRef ParamSet::find(const std::string& name) const {
	for (std::size_t i = 0; i < names_.size(); ++i)
		if (names_[i] == name) return ParamRef{i};
	throw std::out_of_range("unknown parameter " + name);
}

BoundParams::BoundParams(Tape& tape, const ParamSet& params, bool trainable) : tape_(&tape) {
	vars_.reserve(params.size());
	for (const Tensor& t : params.values()) vars_.push_back(trainable ? tape.leaf(t) : tape.constant(t));
}

static Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
	Tensor t(std::move(shape));
	for (double& v : t.data()) v = rng.uniform(-bound, bound);
	return t;
}

ConvRef add_conv(ParamSet& ps, const std::string& name, std::size_t cin, std::size_t cout, std::size_t k,
                 std::size_t stride, std::size_t pad, Rng& rng) {
	const double bound = std::sqrt(6.0 / static_cast<double>(cin * k * k));
	ConvRef c;
	c.weight = ps.add(name + ".weight", uniform_tensor({cout, cin, k, k}, bound, rng));
	c.bias = ps.add(name + ".bias", Tensor({cout}, 0.0));
	c.stride = stride;
	c.pad = pad;
	return c;
}

DenseRef add_dense(ParamSet& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                   bool zero_init) {
	const double bound = std::sqrt(3.0 / static_cast<double>(in));
	DenseRef d;
	d.weight = ps.add(name + ".weight", zero_init ? Tensor({out, in}, 0.0) : uniform_tensor({out, in}, bound, rng));
	d.bias = ps.add(name + ".bias", Tensor({out}, 0.0));
	return d;
}

Var apply(const BoundParams& p, const ConvRef& c, Var x) {
	return conv2d(x, p[c.weight], p[c.bias], c.stride, c.pad);
}

Var apply(const BoundParams& p, const DenseRef& d, Var x) { return linear(x, p[d.weight], p[d.bias]); }

}  // namespace iadg
