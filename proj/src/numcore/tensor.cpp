#include "iadg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace iadg {

std::size_t shape_size(const Shape& shape) {
	std::size_t n = 1;
	for (auto e : shape) n *= e;
	return n;
}

std::string shape_str(const Shape& shape) {
	std::ostringstream os;
	os << '[';
	for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
	os << ']';
	return os.str();
}

static void check_extents(const Shape& shape) {
	for (std::size_t i = 0; i < shape.size(); ++i)
		if (shape[i] == 0)
			throw std::invalid_argument("tensor extent " + std::to_string(i) + " is zero in shape " +
			                            shape_str(shape));
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
	check_extents(shape_);
	data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
	check_extents(shape_);
	if (data_.size() != shape_size(shape_))
		throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
		                            " does not match shape " + shape_str(shape_));
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

Tensor Tensor::from(Shape shape, std::initializer_list<double> values) {
	return Tensor(std::move(shape), std::vector<double>(values));
}

double& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
	return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
	return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::item() const {
	if (data_.size() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_str(shape_));
	return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
	if (shape_size(shape) != data_.size())
		throw std::invalid_argument("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
	return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
	return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::add_inplace(const Tensor& other) {
	if (other.data_.size() != data_.size())
		throw std::invalid_argument("add_inplace: " + shape_str(shape_) + " vs " + shape_str(other.shape_));
	for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
	if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: size mismatch");
	double m = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
	return m;
}

}  // namespace iadg
