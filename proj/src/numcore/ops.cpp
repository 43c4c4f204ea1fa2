#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "iadg/autodiff.hpp"

namespace iadg {

namespace {

void require_same_shape(Var a, Var b, const char* op) {
	if (a.shape() != b.shape())
		throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
		                            shape_str(b.shape()));
}

void require_rank(Var a, std::size_t rank, const char* op, const char* what) {
	if (a.shape().size() != rank)
		throw std::invalid_argument(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
		                            ", got " + shape_str(a.shape()));
}

template <class F>
Var unary(Var a, F&& forward, BackwardFn bw) {
	const Tensor& x = a.value();
	Tensor out(x.shape());
	for (std::size_t i = 0; i < x.size(); ++i) out[i] = forward(x[i]);
	return a.tape()->record(std::move(out), {a}, std::move(bw));
}

}  // namespace

Var add(Var a, Var b) {
	require_same_shape(a, b, "add");
	Tensor out = a.value();
	out.add_inplace(b.value());
	return a.tape()->record(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> gin) {
		for (Tensor* t : gin)
			if (t) t->add_inplace(g);
	});
}

Var sub(Var a, Var b) {
	require_same_shape(a, b, "sub");
	const Tensor& x = a.value();
	const Tensor& y = b.value();
	Tensor out(x.shape());
	for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
	return a.tape()->record(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> gin) {
		if (gin[0]) gin[0]->add_inplace(g);
		if (gin[1])
			for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i] -= g[i];
	});
}

Var mul(Var a, Var b) {
	require_same_shape(a, b, "mul");
	const Tensor* x = &a.value();
	const Tensor* y = &b.value();
	Tensor out(x->shape());
	for (std::size_t i = 0; i < x->size(); ++i) out[i] = (*x)[i] * (*y)[i];
	return a.tape()->record(std::move(out), {a, b}, [x, y](const Tensor& g, std::span<Tensor* const> gin) {
		if (gin[0])
			for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * (*y)[i];
		if (gin[1])
			for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i] += g[i] * (*x)[i];
	});
}

Var scale(Var a, double s) {
	return unary(a, [s](double v) { return s * v; }, [s](const Tensor& g, std::span<Tensor* const> gin) {
		for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += s * g[i];
	});
}

Var square(Var a) {
	const Tensor* x = &a.value();
	return unary(a, [](double v) { return v * v; }, [x](const Tensor& g, std::span<Tensor* const> gin) {
		for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += 2.0 * (*x)[i] * g[i];
	});
}

Var abs(Var a) {
	const Tensor* x = &a.value();
	return unary(a, [](double v) { return std::abs(v); }, [x](const Tensor& g, std::span<Tensor* const> gin) {
		for (std::size_t i = 0; i < g.size(); ++i) {
			const double v = (*x)[i];
			(*gin[0])[i] += v > 0 ? g[i] : (v < 0 ? -g[i] : 0.0);
		}
	});
}

Var relu(Var a) {
	const Tensor* x = &a.value();
	return unary(a, [](double v) { return v > 0 ? v : 0.0; }, [x](const Tensor& g, std::span<Tensor* const> gin) {
		for (std::size_t i = 0; i < g.size(); ++i)
			if ((*x)[i] > 0) (*gin[0])[i] += g[i];
	});
}

static double stable_sigmoid(double z) {
	if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
	const double e = std::exp(z);
	return e / (1.0 + e);
}

Var sigmoid(Var a) {
	Tape* tape = a.tape();
	const std::size_t out_id = tape->size();  // id the output node is about to receive
	return unary(a, stable_sigmoid, [tape, out_id](const Tensor& g, std::span<Tensor* const> gin) {
		const Tensor& y = tape->value(out_id);
		for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * y[i] * (1.0 - y[i]);
	});
}

Var sum(Var a) {
	const Tensor& x = a.value();
	double s = 0.0;
	for (double v : x.data()) s += v;
	return a.tape()->record(Tensor::scalar(s), {a}, [](const Tensor& g, std::span<Tensor* const> gin) {
		const double gv = g[0];
		for (double& v : gin[0]->data()) v += gv;
	});
}

Var mean(Var a) {
	const Tensor& x = a.value();
	const double n = static_cast<double>(x.size());
	double s = 0.0;
	for (double v : x.data()) s += v;
	return a.tape()->record(Tensor::scalar(s / n), {a}, [n](const Tensor& g, std::span<Tensor* const> gin) {
		const double gv = g[0] / n;
		for (double& v : gin[0]->data()) v += gv;
	});
}

Var reshape(Var a, Shape shape) {
	Tensor out = a.value().reshaped(std::move(shape));
	return a.tape()->record(std::move(out), {a}, [](const Tensor& g, std::span<Tensor* const> gin) {
		for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
	});
}

Var matmul(Var a, Var b) {
	require_rank(a, 2, "matmul", "left operand");
	require_rank(b, 2, "matmul", "right operand");
	const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
	if (b.shape()[0] != k)
		throw std::invalid_argument("matmul: inner dimension mismatch, left has " + std::to_string(k) +
		                            " columns, right has " + std::to_string(b.shape()[0]) + " rows");
	const Tensor* x = &a.value();
	const Tensor* y = &b.value();
	Tensor out({m, n});
	for (std::size_t i = 0; i < m; ++i)
		for (std::size_t p = 0; p < k; ++p) {
			const double av = (*x)[i * k + p];
			for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * (*y)[p * n + j];
		}
	return a.tape()->record(std::move(out), {a, b}, [x, y, m, k, n](const Tensor& g, std::span<Tensor* const> gin) {
		if (gin[0])
			for (std::size_t i = 0; i < m; ++i)
				for (std::size_t p = 0; p < k; ++p) {
					double s = 0.0;
					for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * (*y)[p * n + j];
					(*gin[0])[i * k + p] += s;
				}
		if (gin[1])
			for (std::size_t i = 0; i < m; ++i)
				for (std::size_t p = 0; p < k; ++p) {
					const double av = (*x)[i * k + p];
					for (std::size_t j = 0; j < n; ++j) (*gin[1])[p * n + j] += av * g[i * n + j];
				}
	});
}

Var linear(Var x, Var weight, Var bias) {
	require_rank(x, 2, "linear", "input");
	require_rank(weight, 2, "linear", "weight");
	require_rank(bias, 1, "linear", "bias");
	const std::size_t n = x.shape()[0], in = x.shape()[1], out_dim = weight.shape()[0];
	if (weight.shape()[1] != in)
		throw std::invalid_argument("linear: weight expects " + std::to_string(weight.shape()[1]) +
		                            " input features, got " + std::to_string(in));
	if (bias.shape()[0] != out_dim)
		throw std::invalid_argument("linear: bias length " + std::to_string(bias.shape()[0]) +
		                            " does not match output features " + std::to_string(out_dim));
	const Tensor* xv = &x.value();
	const Tensor* wv = &weight.value();
	const Tensor& bv = bias.value();
	Tensor out({n, out_dim});
	for (std::size_t s = 0; s < n; ++s)
		for (std::size_t o = 0; o < out_dim; ++o) {
			double acc = bv[o];
			for (std::size_t i = 0; i < in; ++i) acc += (*wv)[o * in + i] * (*xv)[s * in + i];
			out[s * out_dim + o] = acc;
		}
	return x.tape()->record(std::move(out), {x, weight, bias},
	                        [xv, wv, n, in, out_dim](const Tensor& g, std::span<Tensor* const> gin) {
		                        for (std::size_t s = 0; s < n; ++s)
			                        for (std::size_t o = 0; o < out_dim; ++o) {
				                        const double go = g[s * out_dim + o];
				                        if (gin[0])
					                        for (std::size_t i = 0; i < in; ++i)
						                        (*gin[0])[s * in + i] += go * (*wv)[o * in + i];
				                        if (gin[1])
					                        for (std::size_t i = 0; i < in; ++i)
						                        (*gin[1])[o * in + i] += go * (*xv)[s * in + i];
				                        if (gin[2]) (*gin[2])[o] += go;
			                        }
	                        });
}

Var bce_with_logits(Var logits, Var targets) {
	require_same_shape(logits, targets, "bce_with_logits");
	const Tensor* z = &logits.value();
	const Tensor* y = &targets.value();
	Tensor out(z->shape());
	for (std::size_t i = 0; i < z->size(); ++i) {
		const double zi = (*z)[i];
		out[i] = std::max(zi, 0.0) - zi * (*y)[i] + std::log1p(std::exp(-std::abs(zi)));
	}
	return logits.tape()->record(std::move(out), {logits, targets}, [z, y](const Tensor& g, std::span<Tensor* const> gin) {
		if (gin[0])
			for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * (stable_sigmoid((*z)[i]) - (*y)[i]);
		if (gin[1])
			for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i] -= g[i] * (*z)[i];
	});
}

Var concat_channels(Var a, Var b) {
	require_rank(a, 4, "concat_channels", "first operand");
	require_rank(b, 4, "concat_channels", "second operand");
	const Shape& sa = a.shape();
	const Shape& sb = b.shape();
	const char* names[] = {"N", "C", "H", "W"};
	for (std::size_t d : {0, 2, 3})
		if (sa[d] != sb[d])
			throw std::invalid_argument(std::string("concat_channels: dimension ") + names[d] + " differs (" +
			                            std::to_string(sa[d]) + " vs " + std::to_string(sb[d]) + ")");
	const std::size_t n = sa[0], ca = sa[1], cb = sb[1], hw = sa[2] * sa[3];
	Tensor out({n, ca + cb, sa[2], sa[3]});
	const Tensor& x = a.value();
	const Tensor& y = b.value();
	for (std::size_t s = 0; s < n; ++s) {
		std::copy_n(x.ptr() + s * ca * hw, ca * hw, out.ptr() + s * (ca + cb) * hw);
		std::copy_n(y.ptr() + s * cb * hw, cb * hw, out.ptr() + (s * (ca + cb) + ca) * hw);
	}
	return a.tape()->record(std::move(out), {a, b}, [n, ca, cb, hw](const Tensor& g, std::span<Tensor* const> gin) {
		for (std::size_t s = 0; s < n; ++s) {
			const double* gs = g.ptr() + s * (ca + cb) * hw;
			if (gin[0])
				for (std::size_t i = 0; i < ca * hw; ++i) gin[0]->ptr()[s * ca * hw + i] += gs[i];
			if (gin[1])
				for (std::size_t i = 0; i < cb * hw; ++i) gin[1]->ptr()[s * cb * hw + i] += gs[ca * hw + i];
		}
	});
}

Var slice_channels(Var x, std::size_t begin, std::size_t count) {
	require_rank(x, 4, "slice_channels", "input");
	const Shape& s = x.shape();
	if (count == 0 || begin + count > s[1])
		throw std::invalid_argument("slice_channels: channel range [" + std::to_string(begin) + ", " +
		                            std::to_string(begin + count) + ") outside C=" + std::to_string(s[1]));
	const std::size_t n = s[0], c = s[1], hw = s[2] * s[3];
	Tensor out({n, count, s[2], s[3]});
	const Tensor& v = x.value();
	for (std::size_t i = 0; i < n; ++i)
		std::copy_n(v.ptr() + (i * c + begin) * hw, count * hw, out.ptr() + i * count * hw);
	return x.tape()->record(std::move(out), {x}, [n, c, hw, begin, count](const Tensor& g, std::span<Tensor* const> gin) {
		for (std::size_t i = 0; i < n; ++i)
			for (std::size_t j = 0; j < count * hw; ++j) gin[0]->ptr()[(i * c + begin) * hw + j] += g.ptr()[i * count * hw + j];
	});
}

}  // namespace iadg
