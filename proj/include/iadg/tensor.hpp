#ifndef IADG_TENSOR_HPP_
#define IADG_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace iadg {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/**
 * Dense row-major array of doubles. Plain value type: copies are deep.
 *
 * Every extent is positive and product(shape) == data.size().
 */
class Tensor {
public:
	Tensor() = default;
	explicit Tensor(Shape shape, double fill = 0.0);
	Tensor(Shape shape, std::vector<double> data);

	static Tensor scalar(double v);
	static Tensor from(Shape shape, std::initializer_list<double> values);

	const Shape& shape() const { return shape_; }
	std::size_t rank() const { return shape_.size(); }
	std::size_t dim(std::size_t i) const { return shape_.at(i); }
	std::size_t size() const { return data_.size(); }
	bool empty() const { return data_.empty(); }

	std::span<double> data() { return data_; }
	std::span<const double> data() const { return data_; }
	double* ptr() { return data_.data(); }
	const double* ptr() const { return data_.data(); }
	std::vector<double>& vec() { return data_; }
	const std::vector<double>& vec() const { return data_; }

	double& operator[](std::size_t i) { return data_[i]; }
	double operator[](std::size_t i) const { return data_[i]; }

	/// 4-d accessor for N×C×H×W maps.
	double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
	double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

	double item() const;
	Tensor reshaped(Shape shape) const;
	bool all_finite() const;
	void fill(double v);
	/// this += other (shapes must match).
	void add_inplace(const Tensor& other);

	friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
	Shape shape_;
	std::vector<double> data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace iadg

#endif  // IADG_TENSOR_HPP_
