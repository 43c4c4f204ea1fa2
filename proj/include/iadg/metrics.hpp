#ifndef IADG_METRICS_HPP_
#define IADG_METRICS_HPP_

#include <vector>

#include "iadg/labels.hpp"

namespace iadg {

/// Liveness scores in [0, 1] with their ground truth.
struct ScoreSet {
	std::vector<double> scores;
	std::vector<ClassLabel> labels;

	/// Rejects length mismatch and single-class sets.
	void validate() const;
};

/// P(real outscores spoof), ties counted one half.
double auc(const ScoreSet& s);

struct EerResult {
	double eer = 0.0;
	double threshold = 0.0;
	double hter = 0.0;  // on the same set, at the EER threshold
	double far = 0.0;
	double frr = 0.0;
};

/**
 * Thresholds are the observed scores. FRR(τ) counts real below τ, FAR(τ)
 * spoof at or above τ; the chosen τ minimizes |FAR − FRR|, lowest τ on ties.
 */
EerResult eer_hter(const ScoreSet& s);

struct RocPoint {
	double fpr = 0.0;
	double tpr = 0.0;
};

/// Accept-if-score≥τ curve from (0, 0) to (1, 1), one point per distinct score.
std::vector<RocPoint> roc_curve(const ScoreSet& s);

}  // namespace iadg

#endif  // IADG_METRICS_HPP_
