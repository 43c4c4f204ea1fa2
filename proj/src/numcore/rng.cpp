#include "iadg/rng.hpp"

#include <random>

namespace iadg {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
	x ^= x >> 30;
	x *= 0xBF58476D1CE4E5B9ULL;
	x ^= x >> 27;
	x *= 0x94D049BB133111EBULL;
	x ^= x >> 31;
	return x;
}

Rng::Rng(std::uint64_t seed) : state_{mix64(seed + kGolden), 0} {}

Rng Rng::from_state(State s) {
	Rng r;
	r.state_ = s;
	return r;
}

Rng::result_type Rng::operator()() {
	const std::uint64_t c = state_.counter++;
	return mix64(mix64(c * kGolden + state_.key) ^ state_.key);
}

Rng Rng::split(std::uint64_t key) const {
	Rng r;
	r.state_ = {mix64(state_.key ^ mix64(key + 0xD1B54A32D192ED03ULL)), 0};
	return r;
}

double Rng::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal(double mean, double stddev) {
	std::normal_distribution<double> d(mean, stddev);
	return d(*this);
}

double Rng::gamma(double shape) {
	std::gamma_distribution<double> d(shape, 1.0);
	return d(*this);
}

std::size_t Rng::below(std::size_t n) {
	std::uniform_int_distribution<std::size_t> d(0, n - 1);
	return d(*this);
}

}  // namespace iadg
