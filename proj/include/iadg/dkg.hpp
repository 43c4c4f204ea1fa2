#ifndef IADG_DKG_HPP_
#define IADG_DKG_HPP_

#include <string>
#include <utility>

#include "iadg/params.hpp"

namespace iadg {

/// Which DKG branches contribute. static_only is the "no DKG" baseline block.
enum class DkgMode { full, static_only, dynamic_only };

std::string to_string(DkgMode m);
DkgMode parse_dkg_mode(const std::string& s);

/**
 * Dynamic Kernel Generator block on C channels (C even).
 *
 * The first C/2 channels are pooled and mapped by a dense generator to one
 * depthwise k×k filter per channel and per instance; the last C/2 channels go
 * through a static k×k convolution. Both halves are concatenated (static
 * first) and mixed by a 1×1 convolution followed by relu.
 */
struct DkgParams {
	ConvRef static_conv;  // C/2 -> C/2, k×k, same padding
	DenseRef generator;   // C/2 -> (C/2)·k·k
	ConvRef fuse;         // C -> C, 1×1
	std::size_t channels = 0;
	std::size_t k = 3;
};

/// Generator weights start at zero, so a fresh block behaves like a static one.
DkgParams add_dkg(ParamSet& ps, const std::string& name, std::size_t channels, Rng& rng, std::size_t k = 3);

/// (first C/2 channels, last C/2 channels); odd C is rejected.
std::pair<Var, Var> split_channels(Var x);

/// N×(C/2)×k×k instance-conditioned depthwise kernels.
Var generate_kernels(Var x_hat, const BoundParams& p, const DkgParams& d);

Var dkg_forward(Var x, const BoundParams& p, const DkgParams& d, DkgMode mode = DkgMode::full);

}  // namespace iadg

#endif  // IADG_DKG_HPP_
