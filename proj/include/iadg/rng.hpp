#ifndef IADG_RNG_HPP_
#define IADG_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>

namespace iadg {

/**
 * Counter-based generator: draw i of a stream is a keyed hash of i, so the
 * state is just (key, counter) and independent streams come from split().
 * Satisfies UniformRandomBitGenerator, so <random> distributions work on it.
 */
class Rng {
public:
	using result_type = std::uint64_t;

	struct State {
		std::uint64_t key = 0;
		std::uint64_t counter = 0;
		friend bool operator==(const State&, const State&) = default;
	};

	explicit Rng(std::uint64_t seed = 0);
	static Rng from_state(State s);

	static constexpr result_type min() { return 0; }
	static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
	result_type operator()();

	/// Stream for sub-task `key`; does not advance this generator.
	Rng split(std::uint64_t key) const;

	double uniform();  // [0, 1)
	double uniform(double lo, double hi);
	double normal(double mean = 0.0, double stddev = 1.0);
	double gamma(double shape);
	std::size_t below(std::size_t n);

	State state() const { return state_; }

private:
	State state_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace iadg

#endif  // IADG_RNG_HPP_
