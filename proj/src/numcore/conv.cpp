#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "iadg/autodiff.hpp"

namespace iadg {

namespace {

[[noreturn]] void dim_error(const char* op, const std::string& msg) {
	throw std::invalid_argument(std::string(op) + ": " + msg);
}

void require_map(Var x, const char* op, const char* what) {
	if (x.shape().size() != 4)
		dim_error(op, std::string(what) + " must be N×C×H×W, got " + shape_str(x.shape()));
}

/// Output columns ox whose input column ox*stride + tap - pad lies in [0, width).
struct ColRange {
	std::size_t lo, hi;  // half-open
};

ColRange valid_cols(std::size_t tap, std::size_t pad, std::size_t stride, std::size_t width, std::size_t out_w) {
	// ix = ox*stride + tap - pad >= 0  and  ix <= width - 1
	std::size_t lo = 0;
	if (tap < pad) lo = (pad - tap + stride - 1) / stride;
	const long long max_num = static_cast<long long>(width) - 1 + static_cast<long long>(pad) - static_cast<long long>(tap);
	if (max_num < 0) return {0, 0};
	std::size_t hi = std::min(out_w, static_cast<std::size_t>(max_num) / stride + 1);
	if (lo > hi) lo = hi;
	return {lo, hi};
}

}  // namespace

namespace {

/// R×P patch matrix, R = (ci, ky, kx) in that order, P = (oy, ox). Out-of-range taps are zero.
void im2col(const double* x, std::size_t cin, std::size_t h, std::size_t w, std::size_t k, std::size_t stride,
            std::size_t pad, std::size_t ho, std::size_t wo, double* col) {
	const std::size_t p_count = ho * wo;
	for (std::size_t ci = 0; ci < cin; ++ci)
		for (std::size_t ky = 0; ky < k; ++ky)
			for (std::size_t kx = 0; kx < k; ++kx) {
				double* row = col + ((ci * k + ky) * k + kx) * p_count;
				std::fill_n(row, p_count, 0.0);
				const ColRange cr = valid_cols(kx, pad, stride, w, wo);
				for (std::size_t oy = 0; oy < ho; ++oy) {
					const long long iy = static_cast<long long>(oy * stride + ky) - static_cast<long long>(pad);
					if (iy < 0 || iy >= static_cast<long long>(h)) continue;
					const double* src = x + (ci * h + static_cast<std::size_t>(iy)) * w;
					double* dst = row + oy * wo;
					for (std::size_t ox = cr.lo; ox < cr.hi; ++ox) dst[ox] = src[ox * stride + kx - pad];
				}
			}
}

void col2im_add(const double* col, std::size_t cin, std::size_t h, std::size_t w, std::size_t k, std::size_t stride,
                std::size_t pad, std::size_t ho, std::size_t wo, double* gx) {
	const std::size_t p_count = ho * wo;
	for (std::size_t ci = 0; ci < cin; ++ci)
		for (std::size_t ky = 0; ky < k; ++ky)
			for (std::size_t kx = 0; kx < k; ++kx) {
				const double* row = col + ((ci * k + ky) * k + kx) * p_count;
				const ColRange cr = valid_cols(kx, pad, stride, w, wo);
				for (std::size_t oy = 0; oy < ho; ++oy) {
					const long long iy = static_cast<long long>(oy * stride + ky) - static_cast<long long>(pad);
					if (iy < 0 || iy >= static_cast<long long>(h)) continue;
					double* dst = gx + (ci * h + static_cast<std::size_t>(iy)) * w;
					const double* src = row + oy * wo;
					for (std::size_t ox = cr.lo; ox < cr.hi; ++ox) dst[ox * stride + kx - pad] += src[ox];
				}
			}
}

/// out[m, :] += Σ_r a[m, r] · b[r, :], with r accumulated in increasing order for every element.
void gemm_axpy(const double* a, const double* b, double* out, std::size_t rows, std::size_t inner, std::size_t cols) {
	std::size_t m = 0;
	for (; m + 4 <= rows; m += 4) {
		double* __restrict o0 = out + m * cols;
		double* __restrict o1 = o0 + cols;
		double* __restrict o2 = o1 + cols;
		double* __restrict o3 = o2 + cols;
		for (std::size_t r = 0; r < inner; ++r) {
			const double w0 = a[m * inner + r], w1 = a[(m + 1) * inner + r];
			const double w2 = a[(m + 2) * inner + r], w3 = a[(m + 3) * inner + r];
			const double* __restrict br = b + r * cols;
			for (std::size_t p = 0; p < cols; ++p) {
				const double v = br[p];
				o0[p] += w0 * v;
				o1[p] += w1 * v;
				o2[p] += w2 * v;
				o3[p] += w3 * v;
			}
		}
	}
	for (; m < rows; ++m) {
		double* __restrict o = out + m * cols;
		for (std::size_t r = 0; r < inner; ++r) {
			const double wv = a[m * inner + r];
			const double* __restrict br = b + r * cols;
			for (std::size_t p = 0; p < cols; ++p) o[p] += wv * br[p];
		}
	}
}

}  // namespace

Var conv2d(Var input, Var kernel, Var bias, std::size_t stride, std::size_t pad) {
	constexpr const char* op = "conv2d";
	require_map(input, op, "input");
	require_map(kernel, op, "kernel");
	const Shape& xs = input.shape();
	const Shape& ks = kernel.shape();
	const std::size_t n = xs[0], cin = xs[1], h = xs[2], w = xs[3];
	const std::size_t cout = ks[0], k = ks[2];
	if (ks[1] != cin)
		dim_error(op, "kernel Cin=" + std::to_string(ks[1]) + " does not match input C=" + std::to_string(cin));
	if (ks[3] != k) dim_error(op, "kernel must be square, got " + shape_str(ks));
	if (k % 2 == 0) dim_error(op, "kernel size k=" + std::to_string(k) + " must be odd");
	if (bias.shape().size() != 1 || bias.shape()[0] != cout)
		dim_error(op, "bias shape " + shape_str(bias.shape()) + " does not match Cout=" + std::to_string(cout));
	if (stride == 0) dim_error(op, "stride must be positive");
	if (h + 2 * pad < k) dim_error(op, "input height H=" + std::to_string(h) + " too small for k with pad");
	if (w + 2 * pad < k) dim_error(op, "input width W=" + std::to_string(w) + " too small for k with pad");

	const std::size_t ho = (h + 2 * pad - k) / stride + 1;
	const std::size_t wo = (w + 2 * pad - k) / stride + 1;
	const std::size_t rdim = cin * k * k, pdim = ho * wo;
	const Tensor* xv = &input.value();
	const Tensor* kv = &kernel.value();
	const Tensor& bv = bias.value();
	const bool unit = k == 1 && stride == 1 && pad == 0;

	Tensor out({n, cout, ho, wo});
	std::vector<double> col(unit ? 0 : rdim * pdim);
	for (std::size_t s = 0; s < n; ++s) {
		double* o = out.ptr() + s * cout * pdim;
		for (std::size_t co = 0; co < cout; ++co) std::fill_n(o + co * pdim, pdim, bv[co]);
		const double* x = xv->ptr() + s * cin * h * w;
		if (!unit) im2col(x, cin, h, w, k, stride, pad, ho, wo, col.data());
		gemm_axpy(kv->ptr(), unit ? x : col.data(), o, cout, rdim, pdim);
	}

	return input.tape()->record(
	    std::move(out), {input, kernel, bias},
	    [=](const Tensor& g, std::span<Tensor* const> gin) {
		    Tensor* gx = gin[0];
		    Tensor* gk = gin[1];
		    Tensor* gb = gin[2];
		    std::vector<double> patches(unit ? 0 : rdim * pdim);
		    std::vector<double> gcol(rdim * pdim);
		    // Kᵀ, so that d(patches) = Kᵀ·g runs in the same axpy form.
		    std::vector<double> kt(rdim * cout);
		    for (std::size_t co = 0; co < cout; ++co)
			    for (std::size_t r = 0; r < rdim; ++r) kt[r * cout + co] = (*kv)[co * rdim + r];
		    for (std::size_t s = 0; s < n; ++s) {
			    const double* go = g.ptr() + s * cout * pdim;
			    if (gb)
				    for (std::size_t co = 0; co < cout; ++co) {
					    double acc = 0.0;
					    for (std::size_t p = 0; p < pdim; ++p) acc += go[p + co * pdim];
					    (*gb)[co] += acc;
				    }
			    const double* x = xv->ptr() + s * cin * h * w;
			    const double* pm = x;
			    if (!unit) {
				    im2col(x, cin, h, w, k, stride, pad, ho, wo, patches.data());
				    pm = patches.data();
			    }
			    if (gk)
				    for (std::size_t co = 0; co < cout; ++co) {
					    const double* gr = go + co * pdim;
					    double* gw = gk->ptr() + co * rdim;
					    for (std::size_t r = 0; r < rdim; ++r) {
						    const double* pr = pm + r * pdim;
						    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
						    std::size_t p = 0;
						    for (; p + 4 <= pdim; p += 4) {
							    a0 += gr[p] * pr[p];
							    a1 += gr[p + 1] * pr[p + 1];
							    a2 += gr[p + 2] * pr[p + 2];
							    a3 += gr[p + 3] * pr[p + 3];
						    }
						    for (; p < pdim; ++p) a0 += gr[p] * pr[p];
						    gw[r] += (a0 + a1) + (a2 + a3);
					    }
				    }
			    if (gx) {
				    double* gxs = gx->ptr() + s * cin * h * w;
				    if (unit) {
					    gemm_axpy(kt.data(), go, gxs, rdim, cout, pdim);
				    } else {
					    std::fill(gcol.begin(), gcol.end(), 0.0);
					    gemm_axpy(kt.data(), go, gcol.data(), rdim, cout, pdim);
					    col2im_add(gcol.data(), cin, h, w, k, stride, pad, ho, wo, gxs);
				    }
			    }
		    }
	    });
}

Var dynamic_depthwise_conv2d(Var input, Var kernels) {
	constexpr const char* op = "dynamic_depthwise_conv2d";
	require_map(input, op, "input");
	require_map(kernels, op, "kernels");
	const Shape& xs = input.shape();
	const Shape& ks = kernels.shape();
	const std::size_t n = xs[0], c = xs[1], h = xs[2], w = xs[3], k = ks[2];
	if (ks[0] != n) dim_error(op, "kernel batch N=" + std::to_string(ks[0]) + " does not match input N=" + std::to_string(n));
	if (ks[1] != c) dim_error(op, "kernel C=" + std::to_string(ks[1]) + " does not match input C=" + std::to_string(c));
	if (ks[3] != k || k % 2 == 0) dim_error(op, "kernels must be square with odd k, got " + shape_str(ks));
	const std::size_t pad = k / 2;
	if (h + 2 * pad < k || w + 2 * pad < k) dim_error(op, "input spatial size too small for k");

	const Tensor* xv = &input.value();
	const Tensor* kv = &kernels.value();
	Tensor out({n, c, h, w});
	for (std::size_t s = 0; s < n; ++s)
		for (std::size_t ch = 0; ch < c; ++ch) {
			const double* xi = xv->ptr() + (s * c + ch) * h * w;
			const double* kk = kv->ptr() + (s * c + ch) * k * k;
			double* o = out.ptr() + (s * c + ch) * h * w;
			for (std::size_t ky = 0; ky < k; ++ky)
				for (std::size_t kx = 0; kx < k; ++kx) {
					const double wt = kk[ky * k + kx];
					const ColRange cr = valid_cols(kx, pad, 1, w, w);
					for (std::size_t oy = 0; oy < h; ++oy) {
						const long long iy = static_cast<long long>(oy + ky) - static_cast<long long>(pad);
						if (iy < 0 || iy >= static_cast<long long>(h)) continue;
						const double* row = xi + static_cast<std::size_t>(iy) * w;
						double* orow = o + oy * w;
						for (std::size_t ox = cr.lo; ox < cr.hi; ++ox) orow[ox] += wt * row[ox + kx - pad];
					}
				}
		}

	return input.tape()->record(std::move(out), {input, kernels}, [=](const Tensor& g, std::span<Tensor* const> gin) {
		Tensor* gx = gin[0];
		Tensor* gk = gin[1];
		for (std::size_t s = 0; s < n; ++s)
			for (std::size_t ch = 0; ch < c; ++ch) {
				const double* xi = xv->ptr() + (s * c + ch) * h * w;
				const double* kk = kv->ptr() + (s * c + ch) * k * k;
				const double* go = g.ptr() + (s * c + ch) * h * w;
				double* gxi = gx ? gx->ptr() + (s * c + ch) * h * w : nullptr;
				for (std::size_t ky = 0; ky < k; ++ky)
					for (std::size_t kx = 0; kx < k; ++kx) {
						const double wt = kk[ky * k + kx];
						const ColRange cr = valid_cols(kx, pad, 1, w, w);
						double acc = 0.0;
						for (std::size_t oy = 0; oy < h; ++oy) {
							const long long iy = static_cast<long long>(oy + ky) - static_cast<long long>(pad);
							if (iy < 0 || iy >= static_cast<long long>(h)) continue;
							const std::size_t roff = static_cast<std::size_t>(iy) * w;
							const double* grow = go + oy * w;
							if (gk)
								for (std::size_t ox = cr.lo; ox < cr.hi; ++ox) acc += grow[ox] * xi[roff + ox + kx - pad];
							if (gxi)
								for (std::size_t ox = cr.lo; ox < cr.hi; ++ox) gxi[roff + ox + kx - pad] += wt * grow[ox];
						}
						if (gk) gk->ptr()[(s * c + ch) * k * k + ky * k + kx] += acc;
					}
			}
	});
}

Var instance_norm(Var x, double eps) {
	constexpr const char* op = "instance_norm";
	require_map(x, op, "input");
	if (!(eps > 0)) dim_error(op, "eps must be positive");
	const Shape& s = x.shape();
	const std::size_t planes = s[0] * s[1], hw = s[2] * s[3];
	if (hw < 2) dim_error(op, "H·W must be at least 2, got " + std::to_string(hw));
	const Tensor& xv = x.value();
	Tensor out(s);
	std::vector<double> inv_std(planes);
	for (std::size_t p = 0; p < planes; ++p) {
		const double* xi = xv.ptr() + p * hw;
		double m = 0.0;
		for (std::size_t i = 0; i < hw; ++i) m += xi[i];
		m /= static_cast<double>(hw);
		double v = 0.0;
		for (std::size_t i = 0; i < hw; ++i) v += (xi[i] - m) * (xi[i] - m);
		v /= static_cast<double>(hw);
		const double inv = 1.0 / std::sqrt(v + eps);
		inv_std[p] = inv;
		double* yo = out.ptr() + p * hw;
		for (std::size_t i = 0; i < hw; ++i) yo[i] = (xi[i] - m) * inv;
	}
	Tape* tape = x.tape();
	const std::size_t out_id = tape->size();
	return tape->record(std::move(out), {x}, [tape, out_id, planes, hw, inv_std = std::move(inv_std)](
	                                             const Tensor& g, std::span<Tensor* const> gin) {
		const Tensor& y = tape->value(out_id);
		for (std::size_t p = 0; p < planes; ++p) {
			const double* gp = g.ptr() + p * hw;
			const double* yp = y.ptr() + p * hw;
			double mg = 0.0, mgy = 0.0;
			for (std::size_t i = 0; i < hw; ++i) {
				mg += gp[i];
				mgy += gp[i] * yp[i];
			}
			mg /= static_cast<double>(hw);
			mgy /= static_cast<double>(hw);
			double* gx = gin[0]->ptr() + p * hw;
			for (std::size_t i = 0; i < hw; ++i) gx[i] += inv_std[p] * (gp[i] - mg - yp[i] * mgy);
		}
	});
}

Var global_avg_pool(Var x) {
	require_map(x, "global_avg_pool", "input");
	const Shape& s = x.shape();
	const std::size_t planes = s[0] * s[1], hw = s[2] * s[3];
	const Tensor& xv = x.value();
	Tensor out({s[0], s[1]});
	for (std::size_t p = 0; p < planes; ++p) {
		double acc = 0.0;
		for (std::size_t i = 0; i < hw; ++i) acc += xv[p * hw + i];
		out[p] = acc / static_cast<double>(hw);
	}
	return x.tape()->record(std::move(out), {x}, [planes, hw](const Tensor& g, std::span<Tensor* const> gin) {
		for (std::size_t p = 0; p < planes; ++p) {
			const double gv = g[p] / static_cast<double>(hw);
			for (std::size_t i = 0; i < hw; ++i) (*gin[0])[p * hw + i] += gv;
		}
	});
}

Var channel_gram(Var x) {
	require_map(x, "channel_gram", "input");
	const Shape& s = x.shape();
	const std::size_t n = s[0], c = s[1], hw = s[2] * s[3];
	const double inv_hw = 1.0 / static_cast<double>(hw);
	const Tensor* xv = &x.value();
	Tensor out({n, c, c});
	for (std::size_t b = 0; b < n; ++b) {
		const double* f = xv->ptr() + b * c * hw;
		double* o = out.ptr() + b * c * c;
		for (std::size_t i = 0; i < c; ++i)
			for (std::size_t j = i; j < c; ++j) {
				double acc = 0.0;
				for (std::size_t p = 0; p < hw; ++p) acc += f[i * hw + p] * f[j * hw + p];
				o[i * c + j] = o[j * c + i] = acc * inv_hw;
			}
	}
	return x.tape()->record(std::move(out), {x}, [xv, n, c, hw, inv_hw](const Tensor& g, std::span<Tensor* const> gin) {
		for (std::size_t b = 0; b < n; ++b) {
			const double* f = xv->ptr() + b * c * hw;
			const double* gb = g.ptr() + b * c * c;
			double* gf = gin[0]->ptr() + b * c * hw;
			for (std::size_t i = 0; i < c; ++i)
				for (std::size_t j = 0; j < c; ++j) {
					const double sym = (gb[i * c + j] + gb[j * c + i]) * inv_hw;
					if (sym == 0.0) continue;
					for (std::size_t p = 0; p < hw; ++p) gf[i * hw + p] += sym * f[j * hw + p];
				}
		}
	});
}

Var channel_affine(Var x, Var scale, Var shift) {
	constexpr const char* op = "channel_affine";
	require_map(x, op, "input");
	const Shape& s = x.shape();
	const Shape nc{s[0], s[1]};
	if (scale.shape() != nc) dim_error(op, "scale must be " + shape_str(nc) + ", got " + shape_str(scale.shape()));
	if (shift.shape() != nc) dim_error(op, "shift must be " + shape_str(nc) + ", got " + shape_str(shift.shape()));
	const std::size_t planes = s[0] * s[1], hw = s[2] * s[3];
	const Tensor* xv = &x.value();
	const Tensor* av = &scale.value();
	const Tensor& bv = shift.value();
	Tensor out(s);
	for (std::size_t p = 0; p < planes; ++p)
		for (std::size_t i = 0; i < hw; ++i) out[p * hw + i] = (*av)[p] * (*xv)[p * hw + i] + bv[p];
	return x.tape()->record(std::move(out), {x, scale, shift},
	                        [xv, av, planes, hw](const Tensor& g, std::span<Tensor* const> gin) {
		                        for (std::size_t p = 0; p < planes; ++p) {
			                        double ga = 0.0, gb = 0.0;
			                        for (std::size_t i = 0; i < hw; ++i) {
				                        const double gv = g[p * hw + i];
				                        ga += gv * (*xv)[p * hw + i];
				                        gb += gv;
				                        if (gin[0]) (*gin[0])[p * hw + i] += (*av)[p] * gv;
			                        }
			                        if (gin[1]) (*gin[1])[p] += ga;
			                        if (gin[2]) (*gin[2])[p] += gb;
		                        }
	                        });
}

}  // namespace iadg
