#ifndef IADG_SYNTHDATA_HPP_
#define IADG_SYNTHDATA_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "iadg/labels.hpp"
#include "iadg/tensor.hpp"

namespace iadg {

/// Appearance shift of one capture condition. Applied after content synthesis.
struct DomainSpec {
	std::string id;
	std::array<double, 3> hue_shift{0.0, 0.0, 0.0};  // additive per RGB channel
	double contrast = 1.0;                           // gain around mid-grey
	double blur_sigma = 0.0;                         // Gaussian blur, pixels
	double noise_std = 0.0;                          // additive Gaussian noise
	double background_level = 0.3;                   // grey level outside the face
};

/// D0..D{count-1}; the first four are fixed, further ones are drawn from a seeded range.
std::vector<DomainSpec> default_domains(std::size_t count = 4);

struct SyntheticSample {
	Tensor image;  // 3×S×S in [0, 1], values exactly representable as float
	ClassLabel y_cls = ClassLabel::real;
	Tensor y_dep;  // D×D in [0, 1]; all zero for spoof
	std::string domain_id;
	std::uint64_t seed = 0;
};

/// Domain-independent content: 3×S×S image before the style transform, plus the face mask.
struct Content {
	Tensor image;
	Tensor face_mask;  // S×S, 1 inside the face
	Tensor depth;      // D×D
};

Content gen_content(std::uint64_t seed, ClassLabel cls, std::size_t size, std::size_t depth_size);
SyntheticSample gen_sample(std::uint64_t seed, const DomainSpec& domain, ClassLabel cls, std::size_t size,
                           std::size_t depth_size);

struct Split {
	std::vector<SyntheticSample> train;
	std::vector<SyntheticSample> test;
};

/// Per-sample seed for (domain index, class, index) under a dataset seed.
std::uint64_t sample_seed(std::uint64_t dataset_seed, std::size_t domain_index, ClassLabel cls, std::size_t index);

/// n_per_class real and n_per_class spoof samples for every domain, domain-major order.
std::vector<SyntheticSample> generate_dataset(std::span<const DomainSpec> domains, std::size_t n_per_class,
                                              std::uint64_t seed, std::size_t size, std::size_t depth_size);

/// Leave-one-domain-out partition; unknown holdout ids are rejected.
Split split_by_holdout(const std::vector<SyntheticSample>& samples, std::span<const DomainSpec> domains,
                       const std::string& holdout);
Split build_split(std::span<const DomainSpec> domains, std::size_t n_per_class, const std::string& holdout,
                  std::uint64_t seed, std::size_t size, std::size_t depth_size);

// ---- batching --------------------------------------------------------------

Tensor stack_images(std::span<const SyntheticSample> samples, std::span<const std::size_t> idx);
Tensor stack_depth(std::span<const SyntheticSample> samples, std::span<const std::size_t> idx);  // N×1×D×D
std::vector<ClassLabel> gather_labels(std::span<const SyntheticSample> samples, std::span<const std::size_t> idx);

// ---- on-disk format ----------------------------------------------------------
//   "IADG" | u16 version | u32 header length | UTF-8 JSON header | f32 LE tensors

inline constexpr std::uint16_t kDatasetVersion = 1;

class FormatError : public std::runtime_error {
public:
	FormatError(const std::string& what, std::uint64_t offset)
	    : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
	std::uint64_t offset() const { return offset_; }

private:
	std::uint64_t offset_;
};

struct Dataset {
	std::size_t image_size = 0;
	std::size_t depth_size = 0;
	std::vector<DomainSpec> domains;
	std::vector<SyntheticSample> samples;
};

struct DatasetInfo {
	std::size_t image_size = 0;
	std::size_t depth_size = 0;
	std::vector<DomainSpec> domains;
	std::size_t sample_count = 0;
	/// domain id -> (real count, spoof count)
	std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
	std::uint64_t data_offset = 0;
	std::uint64_t data_bytes = 0;
};

void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path);
/// Reads magic and header only.
DatasetInfo probe_dataset(const std::filesystem::path& path);

/// `path` itself when it is a file, else `path/dataset.iadg`.
std::filesystem::path dataset_file(const std::filesystem::path& path);

}  // namespace iadg

#endif  // IADG_SYNTHDATA_HPP_
