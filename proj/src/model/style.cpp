#include "iadg/style.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace iadg {

std::vector<double> StyleStats::vector() const {
	std::vector<double> v(mu);
	v.insert(v.end(), sigma.begin(), sigma.end());
	return v;
}

std::vector<StyleStats> compute_style_stats(const Tensor& features, std::span<const ClassLabel> labels, double eps) {
	if (features.rank() != 4)
		throw std::invalid_argument("compute_style_stats: expected N×C×H×W, got " + shape_str(features.shape()));
	const std::size_t n = features.dim(0), c = features.dim(1), hw = features.dim(2) * features.dim(3);
	if (labels.size() != n)
		throw std::invalid_argument("compute_style_stats: " + std::to_string(labels.size()) + " labels for N=" +
		                            std::to_string(n));
	if (hw < 2) throw std::invalid_argument("compute_style_stats: H·W must be at least 2");
	std::vector<StyleStats> out(n);
	for (std::size_t s = 0; s < n; ++s) {
		StyleStats& st = out[s];
		st.label = labels[s];
		st.mu.resize(c);
		st.sigma.resize(c);
		for (std::size_t ch = 0; ch < c; ++ch) {
			const double* x = features.ptr() + (s * c + ch) * hw;
			double m = 0.0;
			for (std::size_t i = 0; i < hw; ++i) m += x[i];
			m /= static_cast<double>(hw);
			double v = 0.0;
			for (std::size_t i = 0; i < hw; ++i) v += (x[i] - m) * (x[i] - m);
			v /= static_cast<double>(hw);
			st.mu[ch] = m;
			st.sigma[ch] = std::sqrt(v + eps);
		}
	}
	return out;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
	double d = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
	return d;
}

}  // namespace

std::vector<std::size_t> fps_select(const std::vector<std::vector<double>>& points, std::size_t L) {
	if (points.empty()) throw std::invalid_argument("fps_select: empty style list");
	if (L == 0) throw std::invalid_argument("fps_select: L must be at least 1");
	const std::size_t n = points.size(), dim = points[0].size();
	for (const auto& p : points)
		if (p.size() != dim) throw std::invalid_argument("fps_select: points have differing dimensions");

	std::vector<std::size_t> picked;
	if (L >= n) {
		for (std::size_t i = 0; i < n; ++i) picked.push_back(i);
		return picked;
	}

	std::vector<double> centroid(dim, 0.0);
	for (const auto& p : points)
		for (std::size_t d = 0; d < dim; ++d) centroid[d] += p[d];
	for (double& v : centroid) v /= static_cast<double>(n);

	std::size_t first = 0;
	double best = -1.0;
	for (std::size_t i = 0; i < n; ++i) {
		const double d = sq_dist(points[i], centroid);
		if (d > best) {
			best = d;
			first = i;
		}
	}
	picked.push_back(first);

	std::vector<double> nearest(n);
	std::vector<bool> taken(n, false);
	taken[first] = true;
	for (std::size_t i = 0; i < n; ++i) nearest[i] = sq_dist(points[i], points[first]);

	while (picked.size() < L) {
		std::size_t next = n;
		double far = -1.0;
		for (std::size_t i = 0; i < n; ++i)
			if (!taken[i] && nearest[i] > far) {
				far = nearest[i];
				next = i;
			}
		picked.push_back(next);
		taken[next] = true;
		for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], sq_dist(points[i], points[next]));
	}
	return picked;
}

StyleBank build_bank(std::span<const StyleStats> pool, std::size_t L, long epoch) {
	StyleBank bank;
	bank.epoch_stamp = epoch;
	for (ClassLabel cls : {ClassLabel::real, ClassLabel::spoof}) {
		std::vector<const StyleStats*> members;
		std::vector<std::vector<double>> points;
		for (const StyleStats& s : pool)
			if (s.label == cls) {
				members.push_back(&s);
				points.push_back(s.vector());
			}
		if (members.empty())
			throw std::invalid_argument(std::string("build_bank: no ") + to_string(cls) + " samples in the pool");
		const std::vector<std::size_t> idx = fps_select(points, L);
		const std::size_t c = members[0]->mu.size();
		StyleBasis basis{Tensor({idx.size(), c}), Tensor({idx.size(), c})};
		for (std::size_t l = 0; l < idx.size(); ++l)
			for (std::size_t ch = 0; ch < c; ++ch) {
				basis.mu[l * c + ch] = members[idx[l]]->mu[ch];
				basis.sigma[l * c + ch] = members[idx[l]]->sigma[ch];
			}
		(cls == ClassLabel::real ? bank.real : bank.spoof) = std::move(basis);
	}
	return bank;
}

std::vector<double> sample_weights(std::size_t L, Rng& rng) {
	if (L == 0) throw std::invalid_argument("sample_weights: L must be at least 1");
	const double alpha = 1.0 / static_cast<double>(L);
	std::vector<double> w(L);
	double total = 0.0;
	for (double& v : w) {
		v = rng.gamma(alpha);
		total += v;
	}
	if (!(total > 0.0) || !std::isfinite(total)) {
		// Every Gamma(1/L) draw underflowed: the Dirichlet mass sits on a vertex.
		std::fill(w.begin(), w.end(), 0.0);
		w[rng.below(L)] = 1.0;
		return w;
	}
	for (double& v : w) v /= total;
	return w;
}

std::pair<std::vector<double>, std::vector<double>> assemble_style(std::span<const double> weights,
                                                                   const StyleBank& bank, ClassLabel c) {
	const StyleBasis& basis = bank.basis(c);
	if (basis.size() == 0) throw std::invalid_argument("assemble_style: style bank is empty");
	if (weights.size() != basis.size())
		throw std::invalid_argument("assemble_style: " + std::to_string(weights.size()) + " weights for " +
		                            std::to_string(basis.size()) + " basis styles");
	const std::size_t ch = basis.mu.dim(1);
	std::vector<double> mu(ch, 0.0), sigma(ch, 0.0);
	for (std::size_t l = 0; l < weights.size(); ++l)
		for (std::size_t j = 0; j < ch; ++j) {
			mu[j] += weights[l] * basis.mu[l * ch + j];
			sigma[j] += weights[l] * basis.sigma[l * ch + j];
		}
	return {std::move(mu), std::move(sigma)};
}

Var reassemble(Var features, Var mu_aug, Var sigma_aug, double eps) {
	return channel_affine(instance_norm(features, eps), sigma_aug, mu_aug);
}

std::string to_string(AugMode m) {
	switch (m) {
		case AugMode::off: return "off";
		case AugMode::random_mix: return "random_mix";
		case AugMode::csa: return "csa";
	}
	return "?";
}

AugMode parse_aug_mode(const std::string& s) {
	if (s == "off" || s == "none") return AugMode::off;
	if (s == "random_mix" || s == "mix") return AugMode::random_mix;
	if (s == "csa" || s == "on") return AugMode::csa;
	throw std::invalid_argument("unknown csa mode '" + s + "' (expected off|random_mix|csa)");
}

StyleTargets csa_targets(std::span<const ClassLabel> labels, const StyleBank& bank, Rng& rng) {
	if (!bank.populated()) throw std::invalid_argument("csa_targets: style bank must hold both classes");
	const std::size_t n = labels.size(), c = bank.channels();
	StyleTargets t{Tensor({n, c}), Tensor({n, c}), {}};
	for (std::size_t i = 0; i < n; ++i) {
		const ClassLabel cls = labels[i];
		const std::vector<double> w = sample_weights(bank.basis(cls).size(), rng);
		auto [mu, sigma] = assemble_style(w, bank, cls);
		std::copy(mu.begin(), mu.end(), t.mu.ptr() + i * c);
		std::copy(sigma.begin(), sigma.end(), t.sigma.ptr() + i * c);
		t.style_class.push_back(cls);
	}
	return t;
}

StyleTargets random_mix_targets(std::span<const StyleStats> batch_styles, Rng& rng) {
	const std::size_t n = batch_styles.size();
	if (n == 0) throw std::invalid_argument("random_mix_targets: empty batch");
	const std::size_t c = batch_styles[0].mu.size();
	StyleTargets t{Tensor({n, c}), Tensor({n, c}), {}};
	for (std::size_t i = 0; i < n; ++i) {
		const std::size_t j = rng.below(n);
		const double a = rng.gamma(0.1), b = rng.gamma(0.1);
		const double lam = (a + b) > 0 ? a / (a + b) : 0.5;
		for (std::size_t ch = 0; ch < c; ++ch) {
			t.mu[i * c + ch] = lam * batch_styles[i].mu[ch] + (1 - lam) * batch_styles[j].mu[ch];
			t.sigma[i * c + ch] = lam * batch_styles[i].sigma[ch] + (1 - lam) * batch_styles[j].sigma[ch];
		}
		t.style_class.push_back(batch_styles[j].label);
	}
	return t;
}

}  // namespace iadg
