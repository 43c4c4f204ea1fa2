#ifndef IADG_TESTS_HELPERS_HPP_
#define IADG_TESTS_HELPERS_HPP_

#include <filesystem>
#include <string>

#include <unistd.h>

#include "iadg/rng.hpp"
#include "iadg/tensor.hpp"

namespace iadg::test {

inline Tensor randn(Shape s, Rng& rng, double sd = 1.0, double mean = 0.0) {
	Tensor t(std::move(s));
	for (double& v : t.data()) v = rng.normal(mean, sd);
	return t;
}

inline Tensor randu(Shape s, Rng& rng, double lo, double hi) {
	Tensor t(std::move(s));
	for (double& v : t.data()) v = rng.uniform(lo, hi);
	return t;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
	std::filesystem::path path;
	explicit TempDir(const std::string& tag) {
		path = std::filesystem::temp_directory_path() /
		       ("iadg_" + tag + "_" + std::to_string(::getpid()) + "_" +
		        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
		std::filesystem::remove_all(path);
		std::filesystem::create_directories(path);
	}
	~TempDir() {
		std::error_code ec;
		std::filesystem::remove_all(path, ec);
	}
};

}  // namespace iadg::test

#endif  // IADG_TESTS_HELPERS_HPP_
