#include "iadg/dkg.hpp"

#include <stdexcept>

namespace iadg {

std::string to_string(DkgMode m) {
	switch (m) {
		case DkgMode::full: return "dkg";
		case DkgMode::static_only: return "static";
		case DkgMode::dynamic_only: return "dynamic";
	}
	return "?";
}

DkgMode parse_dkg_mode(const std::string& s) {
	if (s == "dkg" || s == "on" || s == "full") return DkgMode::full;
	if (s == "static" || s == "off" || s == "static_only") return DkgMode::static_only;
	if (s == "dynamic" || s == "dynamic_only") return DkgMode::dynamic_only;
	throw std::invalid_argument("unknown dkg mode '" + s + "' (expected dkg|static|dynamic)");
}

DkgParams add_dkg(ParamSet& ps, const std::string& name, std::size_t channels, Rng& rng, std::size_t k) {
	if (channels < 2 || channels % 2 != 0)
		throw std::invalid_argument("DKG needs an even channel count, got C=" + std::to_string(channels));
	const std::size_t half = channels / 2;
	DkgParams d;
	d.channels = channels;
	d.k = k;
	d.static_conv = add_conv(ps, name + ".static", half, half, k, 1, k / 2, rng);
	d.generator = add_dense(ps, name + ".generator", half, half * k * k, rng, /*zero_init=*/true);
	d.fuse = add_conv(ps, name + ".fuse", channels, channels, 1, 1, 0, rng);
	return d;
}

std::pair<Var, Var> split_channels(Var x) {
	const Shape& s = x.shape();
	if (s.size() != 4) throw std::invalid_argument("split_channels: input must be N×C×H×W, got " + shape_str(s));
	if (s[1] % 2 != 0) throw std::invalid_argument("split_channels: channel count C=" + std::to_string(s[1]) + " is odd");
	const std::size_t half = s[1] / 2;
	return {slice_channels(x, 0, half), slice_channels(x, half, half)};
}

Var generate_kernels(Var x_hat, const BoundParams& p, const DkgParams& d) {
	const std::size_t n = x_hat.shape()[0];
	const std::size_t half = x_hat.shape()[1];
	if (half * 2 != d.channels)
		throw std::invalid_argument("generate_kernels: expected C/2=" + std::to_string(d.channels / 2) +
		                            " channels, got " + std::to_string(half));
	Var flat = apply(p, d.generator, global_avg_pool(x_hat));
	return reshape(flat, {n, half, d.k, d.k});
}

Var dkg_forward(Var x, const BoundParams& p, const DkgParams& d, DkgMode mode) {
	if (x.shape().size() != 4 || x.shape()[1] != d.channels)
		throw std::invalid_argument("dkg_forward: expected C=" + std::to_string(d.channels) + ", got " +
		                            shape_str(x.shape()));
	auto [x_hat, x_tilde] = split_channels(x);
	Tape& tape = p.tape();
	Var z_static = mode == DkgMode::dynamic_only ? tape.constant(Tensor(x_tilde.shape(), 0.0))
	                                             : apply(p, d.static_conv, x_tilde);
	Var z_dynamic = mode == DkgMode::static_only
	                    ? tape.constant(Tensor(x_hat.shape(), 0.0))
	                    : dynamic_depthwise_conv2d(x_hat, generate_kernels(x_hat, p, d));
	return relu(apply(p, d.fuse, concat_channels(z_static, z_dynamic)));
}

}  // namespace iadg
