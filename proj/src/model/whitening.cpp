#include "iadg/whitening.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace iadg {

Tensor covariance(const Tensor& feature, double eps) {
	if (feature.rank() != 3)
		throw std::invalid_argument("covariance: expected C×H×W, got " + shape_str(feature.shape()));
	Tape tape(false);
	Var x = tape.constant(feature.reshaped({1, feature.dim(0), feature.dim(1), feature.dim(2)}));
	Tensor sigma = covariance(x, eps).value();
	return sigma.reshaped({feature.dim(0), feature.dim(0)});
}

Var covariance(Var features, double eps) { return channel_gram(instance_norm(features, eps)); }

Tensor variance_matrix(std::span<const std::pair<Tensor, Tensor>> pairs) {
	if (pairs.empty()) throw std::invalid_argument("variance_matrix: no covariance pairs");
	const Shape shape = pairs[0].first.shape();
	Tensor v(shape, 0.0);
	for (const auto& [org, aug] : pairs) {
		if (org.shape() != shape || aug.shape() != shape)
			throw std::invalid_argument("variance_matrix: covariance shapes differ (" + shape_str(org.shape()) + ", " +
			                            shape_str(aug.shape()) + " vs " + shape_str(shape) + ")");
		for (std::size_t i = 0; i < v.size(); ++i) {
			const double mu = 0.5 * (org[i] + aug[i]);
			const double a = org[i] - mu, b = aug[i] - mu;
			v[i] += 0.5 * (a * a + b * b);
		}
	}
	for (double& x : v.data()) x /= static_cast<double>(pairs.size());
	return v;
}

std::size_t mask_count(std::size_t channels, double k) {
	const std::size_t upper = channels * (channels - 1) / 2;
	return static_cast<std::size_t>(std::floor(static_cast<double>(upper) * k));
}

SelectiveMask selective_mask(const Tensor& v, double k) {
	if (v.rank() != 2 || v.dim(0) != v.dim(1))
		throw std::invalid_argument("selective_mask: V must be square, got " + shape_str(v.shape()));
	if (!(k >= 0.0 && k <= 1.0)) throw std::invalid_argument("selective_mask: ratio must lie in [0, 1]");
	const std::size_t c = v.dim(0);
	std::vector<std::pair<std::size_t, std::size_t>> upper;
	upper.reserve(c * (c - 1) / 2);
	for (std::size_t i = 0; i < c; ++i)
		for (std::size_t j = i + 1; j < c; ++j) upper.emplace_back(i, j);
	std::stable_sort(upper.begin(), upper.end(),
	                 [&](const auto& a, const auto& b) { return v[a.first * c + a.second] > v[b.first * c + b.second]; });

	SelectiveMask mask{Tensor({c, c}, 0.0), k, {}};
	const std::size_t count = mask_count(c, k);
	for (std::size_t t = 0; t < count; ++t) {
		mask.m[upper[t].first * c + upper[t].second] = 1.0;
		mask.positions.push_back(upper[t]);
	}
	return mask;
}

SelectiveMask full_mask(std::size_t channels) {
	SelectiveMask mask{Tensor({channels, channels}, 0.0), 1.0, {}};
	for (std::size_t i = 0; i < channels; ++i)
		for (std::size_t j = i + 1; j < channels; ++j) {
			mask.m[i * channels + j] = 1.0;
			mask.positions.emplace_back(i, j);
		}
	return mask;
}

std::string to_string(WhiteningMode m) {
	switch (m) {
		case WhiteningMode::off: return "off";
		case WhiteningMode::full_iw: return "full_iw";
		case WhiteningMode::symmetric: return "symmetric";
		case WhiteningMode::asymmetric: return "asymmetric";
	}
	return "?";
}

WhiteningMode parse_whitening_mode(const std::string& s) {
	if (s == "off" || s == "none") return WhiteningMode::off;
	if (s == "full_iw" || s == "iw") return WhiteningMode::full_iw;
	if (s == "symmetric" || s == "symmetric_iaw") return WhiteningMode::symmetric;
	if (s == "asymmetric" || s == "asymmetric_iaw" || s == "aiaw") return WhiteningMode::asymmetric;
	throw std::invalid_argument("unknown whitening mode '" + s + "' (expected off|full_iw|symmetric|asymmetric)");
}

void WhiteningConfig::validate() const {
	if (!(k_real >= 0.0 && k_real <= 1.0 && k_spoof >= 0.0 && k_spoof <= 1.0))
		throw std::invalid_argument("whitening ratios must lie in [0, 1]");
	if (k_real < k_spoof)
		throw std::invalid_argument("whitening: real ratio k_r=" + std::to_string(k_real) +
		                            " must not be smaller than spoof ratio k_s=" + std::to_string(k_spoof));
}

double WhiteningConfig::ratio(ClassLabel c) const {
	switch (mode) {
		case WhiteningMode::off: return 0.0;
		case WhiteningMode::full_iw: return 1.0;
		case WhiteningMode::symmetric: return k_real;
		case WhiteningMode::asymmetric: return c == ClassLabel::real ? k_real : k_spoof;
	}
	return 0.0;
}

double masked_abs_mean(const Tensor& sigma, const SelectiveMask& mask) {
	if (mask.count() == 0) return std::numeric_limits<double>::quiet_NaN();
	const std::size_t c = sigma.dim(sigma.rank() - 1);
	double acc = 0.0;
	for (const auto& [i, j] : mask.positions) acc += std::abs(sigma[i * c + j]);
	return acc / static_cast<double>(mask.count());
}

AiawResult aiaw_loss(Var sigma_org, Var sigma_aug, std::span<const ClassLabel> labels, const WhiteningConfig& cfg) {
	cfg.validate();
	const Shape& s = sigma_org.shape();
	if (s.size() != 3 || s[1] != s[2])
		throw std::invalid_argument("aiaw_loss: expected N×C×C covariances, got " + shape_str(s));
	const std::size_t n = s[0], c = s[1];
	if (labels.size() != n)
		throw std::invalid_argument("aiaw_loss: " + std::to_string(labels.size()) + " labels for N=" + std::to_string(n));
	if (n == 0) throw std::invalid_argument("aiaw_loss: empty batch");
	const bool bilateral = sigma_aug.valid();
	if (bilateral && sigma_aug.shape() != s)
		throw std::invalid_argument("aiaw_loss: augmented covariances " + shape_str(sigma_aug.shape()) + " vs " +
		                            shape_str(s));
	if (!bilateral && cfg.mode != WhiteningMode::full_iw && cfg.mode != WhiteningMode::off)
		throw std::invalid_argument("aiaw_loss: selective masks need the augmented branch");

	Tape& tape = *sigma_org.tape();
	AiawResult res;
	res.masked_abs_org.assign(n, std::numeric_limits<double>::quiet_NaN());
	Tensor weights({n, c, c}, 0.0);
	bool any = false;

	const Tensor& org = sigma_org.value();
	for (ClassLabel cls : {ClassLabel::real, ClassLabel::spoof}) {
		std::vector<std::size_t> members;
		for (std::size_t i = 0; i < n; ++i)
			if (labels[i] == cls) members.push_back(i);

		SelectiveMask mask;
		if (cfg.mode == WhiteningMode::full_iw) {
			mask = full_mask(c);
		} else if (cfg.mode == WhiteningMode::off || members.empty()) {
			mask = SelectiveMask{Tensor({c, c}, 0.0), cfg.ratio(cls), {}};
		} else {
			const Tensor& aug = sigma_aug.value();
			std::vector<std::pair<Tensor, Tensor>> pairs;
			pairs.reserve(members.size());
			for (std::size_t i : members) {
				Tensor a({c, c}), b({c, c});
				std::copy_n(org.ptr() + i * c * c, c * c, a.ptr());
				std::copy_n(aug.ptr() + i * c * c, c * c, b.ptr());
				pairs.emplace_back(std::move(a), std::move(b));
			}
			mask = selective_mask(variance_matrix(pairs), cfg.ratio(cls));
		}

		if (!members.empty() && mask.count() > 0) {
			const double w = 1.0 / (static_cast<double>(mask.count()) * static_cast<double>(members.size()));
			for (std::size_t i : members) {
				double acc = 0.0;
				for (const auto& [r, col] : mask.positions) {
					weights[(i * c + r) * c + col] = w;
					acc += std::abs(org[(i * c + r) * c + col]);
				}
				res.masked_abs_org[i] = acc / static_cast<double>(mask.count());
			}
			any = true;
		}
		(cls == ClassLabel::real ? res.real_mask : res.spoof_mask) = std::move(mask);
	}

	if (!any) {
		res.loss = tape.constant(Tensor::scalar(0.0));
		return res;
	}
	Var wv = tape.constant(std::move(weights));
	res.loss = sum(mul(abs(sigma_org), wv));
	if (bilateral) res.loss = add(res.loss, sum(mul(abs(sigma_aug), wv)));
	return res;
}

}  // namespace iadg
