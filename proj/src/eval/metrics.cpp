#include "iadg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace iadg {

namespace {

struct Counts {
	std::size_t real = 0;
	std::size_t spoof = 0;
};

Counts count(const ScoreSet& s) {
	Counts c;
	for (ClassLabel l : s.labels) (l == ClassLabel::real ? c.real : c.spoof)++;
	return c;
}

// Indices ordered by score, descending.
std::vector<std::size_t> by_score_desc(const ScoreSet& s) {
	std::vector<std::size_t> idx(s.scores.size());
	std::iota(idx.begin(), idx.end(), 0);
	std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
	return idx;
}

}  // namespace

void ScoreSet::validate() const {
	if (scores.size() != labels.size())
		throw std::invalid_argument("score set has " + std::to_string(scores.size()) + " scores but " +
		                            std::to_string(labels.size()) + " labels");
	for (double v : scores)
		if (!std::isfinite(v)) throw std::invalid_argument("score set contains a non-finite score");
	const Counts c = count(*this);
	if (c.real == 0 || c.spoof == 0) throw std::invalid_argument("score set needs both real and spoof samples");
}

double auc(const ScoreSet& s) {
	s.validate();
	const Counts c = count(s);
	const std::vector<std::size_t> idx = by_score_desc(s);
	// Walk ascending so `spoof_below` counts spoofs strictly under the current score group.
	double wins = 0.0, ties = 0.0, spoof_below = 0.0;
	std::size_t hi = idx.size();
	while (hi > 0) {
		std::size_t lo = hi - 1;
		while (lo > 0 && s.scores[idx[lo - 1]] == s.scores[idx[hi - 1]]) --lo;
		double r = 0.0, f = 0.0;
		for (std::size_t k = lo; k < hi; ++k) (s.labels[idx[k]] == ClassLabel::real ? r : f) += 1.0;
		wins += r * spoof_below;
		ties += r * f;
		spoof_below += f;
		hi = lo;
	}
	return (wins + 0.5 * ties) / (static_cast<double>(c.real) * static_cast<double>(c.spoof));
}

EerResult eer_hter(const ScoreSet& s) {
	s.validate();
	const Counts c = count(s);
	std::vector<double> taus = s.scores;
	std::sort(taus.begin(), taus.end());
	taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

	std::vector<double> real, spoof;
	for (std::size_t i = 0; i < s.scores.size(); ++i)
		(s.labels[i] == ClassLabel::real ? real : spoof).push_back(s.scores[i]);
	std::sort(real.begin(), real.end());
	std::sort(spoof.begin(), spoof.end());

	EerResult best;
	double gap = std::numeric_limits<double>::infinity();
	for (double tau : taus) {
		const auto below_real = std::lower_bound(real.begin(), real.end(), tau) - real.begin();
		const auto below_spoof = std::lower_bound(spoof.begin(), spoof.end(), tau) - spoof.begin();
		const double frr = static_cast<double>(below_real) / static_cast<double>(c.real);
		const double far = static_cast<double>(static_cast<std::ptrdiff_t>(spoof.size()) - below_spoof) /
		                   static_cast<double>(c.spoof);
		const double d = std::abs(far - frr);
		if (d < gap) {
			gap = d;
			best = {(far + frr) / 2, tau, (far + frr) / 2, far, frr};
		}
	}
	return best;
}

std::vector<RocPoint> roc_curve(const ScoreSet& s) {
	s.validate();
	const Counts c = count(s);
	const std::vector<std::size_t> idx = by_score_desc(s);
	std::vector<RocPoint> out{{0.0, 0.0}};
	double tp = 0.0, fp = 0.0;
	for (std::size_t k = 0; k < idx.size(); ++k) {
		(s.labels[idx[k]] == ClassLabel::real ? tp : fp) += 1.0;
		if (k + 1 == idx.size() || s.scores[idx[k + 1]] != s.scores[idx[k]])
			out.push_back({fp / static_cast<double>(c.spoof), tp / static_cast<double>(c.real)});
	}
	return out;
}

}  // namespace iadg
