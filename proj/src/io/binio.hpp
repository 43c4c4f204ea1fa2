#ifndef IADG_SRC_IO_BINIO_HPP_
#define IADG_SRC_IO_BINIO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "iadg/synthdata.hpp"

namespace iadg::io {

/// Little-endian byte sink.
class Writer {
public:
	void u16(std::uint16_t v) { put(v, 2); }
	void u32(std::uint32_t v) { put(v, 4); }
	void u64(std::uint64_t v) { put(v, 8); }
	void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
	void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
	void bytes(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
	std::size_t size() const { return buf_.size(); }
	const std::vector<std::uint8_t>& buffer() const { return buf_; }

	void save(const std::filesystem::path& path) const {
		if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
		std::ofstream out(path, std::ios::binary | std::ios::trunc);
		if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
		out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
		if (!out) throw std::runtime_error("write failed for " + path.string());
	}

private:
	void put(std::uint64_t v, int n) {
		for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
	}
	std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader; overruns throw FormatError with the offset.
class Reader {
public:
	explicit Reader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}

	static std::vector<std::uint8_t> load(const std::filesystem::path& path, std::size_t max_bytes = SIZE_MAX) {
		std::ifstream in(path, std::ios::binary);
		if (!in) throw std::runtime_error("cannot open " + path.string());
		std::vector<std::uint8_t> buf;
		char chunk[1 << 16];
		while (buf.size() < max_bytes && in) {
			in.read(chunk, static_cast<std::streamsize>(std::min<std::size_t>(sizeof chunk, max_bytes - buf.size())));
			buf.insert(buf.end(), chunk, chunk + in.gcount());
		}
		return buf;
	}

	std::size_t pos() const { return pos_; }
	std::size_t size() const { return data_.size(); }
	void seek(std::size_t p) {
		if (p > data_.size()) throw FormatError("seek past end of file", data_.size());
		pos_ = p;
	}
	void need(std::size_t n, const char* what) const {
		if (data_.size() < pos_ || data_.size() - pos_ < n)
			throw FormatError(std::string("truncated file while reading ") + what, data_.size());
	}
	std::uint64_t uint(int n, const char* what) {
		need(static_cast<std::size_t>(n), what);
		std::uint64_t v = 0;
		for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
		pos_ += static_cast<std::size_t>(n);
		return v;
	}
	std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(uint(2, what)); }
	std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(uint(4, what)); }
	std::uint64_t u64(const char* what) { return uint(8, what); }
	float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
	double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
	std::string str(std::size_t n, const char* what) {
		need(n, what);
		std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
		pos_ += n;
		return s;
	}

private:
	std::vector<std::uint8_t> data_;
	std::size_t pos_ = 0;
};

}  // namespace iadg::io

#endif  // IADG_SRC_IO_BINIO_HPP_
