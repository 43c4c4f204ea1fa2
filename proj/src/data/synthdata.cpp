#include "iadg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "../io/binio.hpp"
#include "iadg/rng.hpp"

namespace iadg {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t hash_string(const std::string& s) {
	std::uint64_t h = 0xcbf29ce484222325ull;
	for (unsigned char ch : s) h = (h ^ ch) * 0x100000001b3ull;
	return h;
}

void check_sizes(std::size_t size, std::size_t depth_size) {
	if (size < 16) throw std::invalid_argument("image size must be at least 16, got " + std::to_string(size));
	if (depth_size == 0 || depth_size > size)
		throw std::invalid_argument("depth size must lie in [1, S], got " + std::to_string(depth_size));
}

// Separable Gaussian blur with clamped borders, in place on one S×S plane.
void blur_plane(double* plane, std::size_t s, double sigma) {
	const int radius = static_cast<int>(std::ceil(3.0 * sigma));
	std::vector<double> k(2 * radius + 1);
	double total = 0.0;
	for (int i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
	for (double& v : k) v /= total;
	const int n = static_cast<int>(s);
	std::vector<double> tmp(s * s);
	for (int y = 0; y < n; ++y)
		for (int x = 0; x < n; ++x) {
			double acc = 0.0;
			for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * plane[y * n + std::clamp(x + i, 0, n - 1)];
			tmp[y * n + x] = acc;
		}
	for (int y = 0; y < n; ++y)
		for (int x = 0; x < n; ++x) {
			double acc = 0.0;
			for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp[std::clamp(y + i, 0, n - 1) * n + x];
			plane[y * n + x] = acc;
		}
}

}  // namespace

std::vector<DomainSpec> default_domains(std::size_t count) {
	if (count < 1) throw std::invalid_argument("at least one domain is required");
	std::vector<DomainSpec> out = {
	    {"D0", {0.05, 0.0, -0.05}, 1.0, 0.0, 0.02, 0.2},
	    {"D1", {-0.08, 0.04, 0.10}, 0.7, 0.8, 0.01, 0.5},
	    {"D2", {0.10, 0.08, -0.10}, 1.3, 0.3, 0.05, 0.1},
	    {"D3", {0.0, -0.06, 0.06}, 0.85, 1.2, 0.03, 0.7},
	};
	Rng rng(0xD0A11);
	for (std::size_t i = out.size(); i < count; ++i) {
		DomainSpec d;
		d.id = "D" + std::to_string(i);
		for (double& h : d.hue_shift) h = rng.uniform(-0.1, 0.1);
		d.contrast = rng.uniform(0.7, 1.3);
		d.blur_sigma = rng.uniform(0.0, 1.2);
		d.noise_std = rng.uniform(0.01, 0.05);
		d.background_level = rng.uniform(0.1, 0.7);
		out.push_back(d);
	}
	out.resize(count);
	return out;
}

Content gen_content(std::uint64_t seed, ClassLabel cls, std::size_t size, std::size_t depth_size) {
	check_sizes(size, depth_size);
	Rng rng = Rng(seed).split(1);
	const double s = static_cast<double>(size);
	const double cx = s / 2 + rng.uniform(-0.05, 0.05) * s;
	const double cy = s / 2 + rng.uniform(-0.05, 0.05) * s;
	const double r = s * rng.uniform(0.27, 0.34);
	std::array<double, 3> skin{0.78, 0.58, 0.47};
	for (double& v : skin) v += rng.uniform(-0.07, 0.07);

	// Skin texture: a few low-amplitude oriented waves.
	struct Wave { double fx, fy, phase; };
	std::array<Wave, 3> tex;
	for (Wave& w : tex) {
		const double f = rng.uniform(0.1, 0.25), th = rng.uniform(0.0, kTwoPi);
		w = {f * std::cos(th), f * std::sin(th), rng.uniform(0.0, kTwoPi)};
	}
	const double eye_dx = 0.35 * r, eye_dy = -0.25 * r, eye_r = 0.12 * r;

	// Spoof media: every attack is flatter than a live face; one artifact on top.
	const bool spoof = cls == ClassLabel::spoof;
	int artifact = -1;
	double relief = 1.0, moire_amp = 0.0, mfx = 0.0, mfy = 0.0, mphase = 0.0;
	std::array<double, 3> tint{1.0, 1.0, 1.0};
	if (spoof) {
		artifact = static_cast<int>(rng.below(3));
		relief = rng.uniform(0.1, 0.45);
		if (artifact == 0) {
			const double f = rng.uniform(0.28, 0.4), th = rng.uniform(0.0, kTwoPi);
			mfx = f * std::cos(th);
			mfy = f * std::sin(th);
			mphase = rng.uniform(0.0, kTwoPi);
			moire_amp = rng.uniform(0.08, 0.14);
		} else if (artifact == 1) {
			relief = rng.uniform(0.0, 0.1);
		} else {
			tint = {1.0 + rng.uniform(0.12, 0.25), 1.0 - rng.uniform(0.05, 0.15), 1.0 - rng.uniform(0.12, 0.25)};
		}
	}

	Content c{Tensor({3, size, size}, 0.0), Tensor({size, size}, 0.0), Tensor({depth_size, depth_size}, 0.0)};
	const std::size_t plane = size * size;
	for (std::size_t y = 0; y < size; ++y)
		for (std::size_t x = 0; x < size; ++x) {
			const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
			const double d = std::hypot(px - cx, py - cy) / r;
			if (d >= 1.0) continue;
			const double z = std::sqrt(1.0 - d * d);
			const double shade = 0.35 + 0.65 * (1.0 - relief + relief * z);
			double t = 0.0;
			for (const Wave& w : tex) t += 0.015 * std::sin(kTwoPi * (w.fx * px + w.fy * py) + w.phase);
			double eye = 1.0;
			for (double sx : {-1.0, 1.0})
				if (std::hypot(px - (cx + sx * eye_dx), py - (cy + eye_dy)) < eye_r) eye = 0.5;
			const double moire = moire_amp * std::sin(kTwoPi * (mfx * px + mfy * py) + mphase);
			for (std::size_t ch = 0; ch < 3; ++ch)
				c.image[ch * plane + y * size + x] = (skin[ch] * shade * eye + t) * tint[ch] + moire;
			c.face_mask[y * size + x] = 1.0;
		}

	if (!spoof) {
		const double cell = s / static_cast<double>(depth_size);
		for (std::size_t i = 0; i < depth_size; ++i)
			for (std::size_t j = 0; j < depth_size; ++j) {
				const double px = (static_cast<double>(j) + 0.5) * cell, py = (static_cast<double>(i) + 0.5) * cell;
				const double d = std::hypot(px - cx, py - cy) / r;
				c.depth[i * depth_size + j] = d < 1.0 ? std::sqrt(1.0 - d * d) : 0.0;
			}
	}
	return c;
}

SyntheticSample gen_sample(std::uint64_t seed, const DomainSpec& domain, ClassLabel cls, std::size_t size,
                           std::size_t depth_size) {
	Content c = gen_content(seed, cls, size, depth_size);
	const std::size_t plane = size * size;
	Tensor& img = c.image;
	for (std::size_t ch = 0; ch < 3; ++ch) {
		double* p = img.ptr() + ch * plane;
		for (std::size_t i = 0; i < plane; ++i) {
			if (c.face_mask[i] == 0.0) {
				// Mild vertical illumination gradient on the backdrop.
				const double row = static_cast<double>(i / size) / static_cast<double>(size);
				p[i] = domain.background_level + 0.05 * (row - 0.5);
			}
			p[i] = (p[i] + domain.hue_shift[ch] - 0.5) * domain.contrast + 0.5;
		}
		if (domain.blur_sigma > 0.0) blur_plane(p, size, domain.blur_sigma);
	}
	if (domain.noise_std > 0.0) {
		Rng rng = Rng(seed).split(2).split(hash_string(domain.id));
		for (double& v : img.data()) v += domain.noise_std * rng.normal();
	}
	for (double& v : img.data()) v = static_cast<double>(static_cast<float>(std::clamp(v, 0.0, 1.0)));
	for (double& v : c.depth.data()) v = static_cast<double>(static_cast<float>(v));
	return {std::move(img), cls, std::move(c.depth), domain.id, seed};
}

std::uint64_t sample_seed(std::uint64_t dataset_seed, std::size_t domain_index, ClassLabel cls, std::size_t index) {
	Rng base(dataset_seed);
	const std::uint64_t stream = (static_cast<std::uint64_t>(domain_index) << 33) |
	                             (static_cast<std::uint64_t>(label_value(cls) > 0.5 ? 1 : 0) << 32) |
	                             static_cast<std::uint64_t>(index);
	return base.split(stream)();
}

std::vector<SyntheticSample> generate_dataset(std::span<const DomainSpec> domains, std::size_t n_per_class,
                                              std::uint64_t seed, std::size_t size, std::size_t depth_size) {
	check_sizes(size, depth_size);
	std::set<std::string> ids;
	for (const DomainSpec& d : domains)
		if (!ids.insert(d.id).second) throw std::invalid_argument("duplicate domain id '" + d.id + "'");
	std::vector<SyntheticSample> out;
	out.reserve(domains.size() * 2 * n_per_class);
	for (std::size_t di = 0; di < domains.size(); ++di)
		for (ClassLabel cls : {ClassLabel::real, ClassLabel::spoof})
			for (std::size_t i = 0; i < n_per_class; ++i)
				out.push_back(gen_sample(sample_seed(seed, di, cls, i), domains[di], cls, size, depth_size));
	return out;
}

Split split_by_holdout(const std::vector<SyntheticSample>& samples, std::span<const DomainSpec> domains,
                       const std::string& holdout) {
	if (domains.size() < 2) throw std::invalid_argument("leave-one-out needs at least 2 domains");
	if (std::none_of(domains.begin(), domains.end(), [&](const DomainSpec& d) { return d.id == holdout; }))
		throw std::invalid_argument("unknown holdout domain '" + holdout + "'");
	Split split;
	for (const SyntheticSample& s : samples) (s.domain_id == holdout ? split.test : split.train).push_back(s);
	return split;
}

Split build_split(std::span<const DomainSpec> domains, std::size_t n_per_class, const std::string& holdout,
                  std::uint64_t seed, std::size_t size, std::size_t depth_size) {
	return split_by_holdout(generate_dataset(domains, n_per_class, seed, size, depth_size), domains, holdout);
}

Tensor stack_images(std::span<const SyntheticSample> samples, std::span<const std::size_t> idx) {
	if (idx.empty()) throw std::invalid_argument("stack_images: empty index list");
	const Shape& s = samples[idx[0]].image.shape();
	Tensor out({idx.size(), s[0], s[1], s[2]});
	const std::size_t per = shape_size(s);
	for (std::size_t i = 0; i < idx.size(); ++i) {
		const Tensor& img = samples[idx[i]].image;
		if (img.shape() != s) throw std::invalid_argument("stack_images: mixed image sizes");
		std::copy_n(img.ptr(), per, out.ptr() + i * per);
	}
	return out;
}

Tensor stack_depth(std::span<const SyntheticSample> samples, std::span<const std::size_t> idx) {
	if (idx.empty()) throw std::invalid_argument("stack_depth: empty index list");
	const std::size_t d = samples[idx[0]].y_dep.dim(0);
	Tensor out({idx.size(), 1, d, d});
	for (std::size_t i = 0; i < idx.size(); ++i) {
		const Tensor& dep = samples[idx[i]].y_dep;
		if (dep.dim(0) != d) throw std::invalid_argument("stack_depth: mixed depth sizes");
		std::copy_n(dep.ptr(), d * d, out.ptr() + i * d * d);
	}
	return out;
}

std::vector<ClassLabel> gather_labels(std::span<const SyntheticSample> samples, std::span<const std::size_t> idx) {
	std::vector<ClassLabel> out;
	out.reserve(idx.size());
	for (std::size_t i : idx) out.push_back(samples[i].y_cls);
	return out;
}

// ---- on-disk format ----------------------------------------------------------

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'I', 'A', 'D', 'G'};

json domain_json(const DomainSpec& d) {
	return {{"id", d.id},
	        {"hue_shift", d.hue_shift},
	        {"contrast", d.contrast},
	        {"blur_sigma", d.blur_sigma},
	        {"noise_std", d.noise_std},
	        {"background_level", d.background_level}};
}

DomainSpec domain_from_json(const json& j) {
	DomainSpec d;
	d.id = j.at("id").get<std::string>();
	d.hue_shift = j.at("hue_shift").get<std::array<double, 3>>();
	d.contrast = j.at("contrast").get<double>();
	d.blur_sigma = j.at("blur_sigma").get<double>();
	d.noise_std = j.at("noise_std").get<double>();
	d.background_level = j.at("background_level").get<double>();
	return d;
}

struct Header {
	DatasetInfo info;
	json records;
};

Header parse_header(io::Reader& r) {
	const std::string magic = r.str(4, "magic");
	if (magic != std::string(kMagic, 4)) throw FormatError("not an IADG dataset (bad magic)", 0);
	const std::uint16_t version = r.u16("format version");
	if (version != kDatasetVersion)
		throw FormatError("unsupported dataset version " + std::to_string(version) + " (expected " +
		                      std::to_string(kDatasetVersion) + ")",
		                  4);
	const std::size_t len_at = r.pos();
	const std::uint32_t len = r.u32("header length");
	if (static_cast<std::uint64_t>(len) > r.size() - r.pos())
		throw FormatError("header length " + std::to_string(len) + " exceeds file size", len_at);
	const std::size_t json_at = r.pos();
	json h;
	try {
		h = json::parse(r.str(len, "header"));
	} catch (const json::exception& e) {
		throw FormatError(std::string("malformed dataset header: ") + e.what(), json_at);
	}
	Header out;
	DatasetInfo& info = out.info;
	try {
		info.image_size = h.at("image_size").get<std::size_t>();
		info.depth_size = h.at("depth_size").get<std::size_t>();
		for (const json& d : h.at("domains")) info.domains.push_back(domain_from_json(d));
		info.sample_count = h.at("sample_count").get<std::size_t>();
		for (const auto& [id, c] : h.at("counts").items())
			info.counts[id] = {c.at("real").get<std::size_t>(), c.at("spoof").get<std::size_t>()};
		out.records = h.at("samples");
	} catch (const json::exception& e) {
		throw FormatError(std::string("incomplete dataset header: ") + e.what(), json_at);
	}
	if (out.records.size() != info.sample_count)
		throw FormatError("header lists " + std::to_string(out.records.size()) + " records for sample_count " +
		                      std::to_string(info.sample_count),
		                  json_at);
	info.data_offset = r.pos();
	const std::uint64_t per = 4ull * (3 * info.image_size * info.image_size + info.depth_size * info.depth_size);
	info.data_bytes = per * info.sample_count;
	return out;
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
	check_sizes(ds.image_size, ds.depth_size);
	const std::size_t s = ds.image_size, d = ds.depth_size;
	const std::uint64_t per = 4ull * (3 * s * s + d * d);
	json counts = json::object();
	for (const DomainSpec& dom : ds.domains) counts[dom.id] = {{"real", 0}, {"spoof", 0}};
	json records = json::array();
	for (std::size_t i = 0; i < ds.samples.size(); ++i) {
		const SyntheticSample& smp = ds.samples[i];
		if (smp.image.shape() != Shape{3, s, s} || smp.y_dep.shape() != Shape{d, d})
			throw std::invalid_argument("write_dataset: sample " + std::to_string(i) + " has shape " +
			                            shape_str(smp.image.shape()) + " / " + shape_str(smp.y_dep.shape()));
		if (!counts.contains(smp.domain_id))
			throw std::invalid_argument("write_dataset: sample domain '" + smp.domain_id + "' is not declared");
		counts[smp.domain_id][to_string(smp.y_cls)] = counts[smp.domain_id][to_string(smp.y_cls)].get<std::size_t>() + 1;
		records.push_back({{"domain", smp.domain_id},
		                   {"class", to_string(smp.y_cls)},
		                   {"seed", smp.seed},
		                   {"offset", per * i}});
	}
	json domains = json::array();
	for (const DomainSpec& dom : ds.domains) domains.push_back(domain_json(dom));
	const json header = {{"image_size", s},     {"depth_size", d},           {"domains", domains},
	                     {"counts", counts},    {"sample_count", ds.samples.size()},
	                     {"layout", "image 3xSxS then depth DxD, f32 little-endian"}, {"samples", records}};
	const std::string text = header.dump();

	io::Writer w;
	w.bytes(std::string(kMagic, 4));
	w.u16(kDatasetVersion);
	w.u32(static_cast<std::uint32_t>(text.size()));
	w.bytes(text);
	for (const SyntheticSample& smp : ds.samples) {
		for (double v : smp.image.data()) w.f32(static_cast<float>(v));
		for (double v : smp.y_dep.data()) w.f32(static_cast<float>(v));
	}
	w.save(path);
}

DatasetInfo probe_dataset(const std::filesystem::path& path) {
	const std::filesystem::path file = dataset_file(path);
	// Fixed prefix first, then exactly the header bytes.
	io::Reader pre(io::Reader::load(file, 10));
	pre.str(4, "magic");
	pre.u16("format version");
	const std::uint64_t len = pre.u32("header length");
	io::Reader r(io::Reader::load(file, 10 + len));
	Header h = parse_header(r);
	const std::uint64_t actual = std::filesystem::file_size(file);
	if (actual < h.info.data_offset + h.info.data_bytes)
		throw FormatError("truncated dataset: expected " + std::to_string(h.info.data_offset + h.info.data_bytes) +
		                      " bytes, file has " + std::to_string(actual),
		                  actual);
	return h.info;
}

Dataset read_dataset(const std::filesystem::path& path) {
	io::Reader r(io::Reader::load(dataset_file(path)));
	Header h = parse_header(r);
	const DatasetInfo& info = h.info;
	const std::uint64_t expected = info.data_offset + info.data_bytes;
	if (r.size() < expected)
		throw FormatError("truncated dataset: expected " + std::to_string(expected) + " bytes, file has " +
		                      std::to_string(r.size()),
		                  r.size());
	if (r.size() > expected) throw FormatError("trailing bytes after dataset payload", expected);

	Dataset ds{info.image_size, info.depth_size, info.domains, {}};
	const std::size_t s = info.image_size, d = info.depth_size;
	const std::uint64_t per = 4ull * (3 * s * s + d * d);
	ds.samples.reserve(info.sample_count);
	for (std::size_t i = 0; i < info.sample_count; ++i) {
		const json& rec = h.records[i];
		SyntheticSample smp;
		try {
			smp.domain_id = rec.at("domain").get<std::string>();
			const std::string cls = rec.at("class").get<std::string>();
			if (cls != "real" && cls != "spoof") throw FormatError("unknown class '" + cls + "'", info.data_offset);
			smp.y_cls = cls == "real" ? ClassLabel::real : ClassLabel::spoof;
			smp.seed = rec.at("seed").get<std::uint64_t>();
			if (rec.at("offset").get<std::uint64_t>() != per * i)
				throw FormatError("sample " + std::to_string(i) + " has an inconsistent offset", info.data_offset);
		} catch (const nlohmann::json::exception& e) {
			throw FormatError(std::string("bad sample record: ") + e.what(), info.data_offset);
		}
		r.seek(info.data_offset + per * i);
		smp.image = Tensor({3, s, s});
		for (double& v : smp.image.data()) v = r.f32("image");
		smp.y_dep = Tensor({d, d});
		for (double& v : smp.y_dep.data()) v = r.f32("depth");
		ds.samples.push_back(std::move(smp));
	}
	return ds;
}

std::filesystem::path dataset_file(const std::filesystem::path& path) {
	if (std::filesystem::is_directory(path)) return path / "dataset.iadg";
	return path;
}

}  // namespace iadg
