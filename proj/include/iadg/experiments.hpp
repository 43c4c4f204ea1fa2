#ifndef IADG_EXPERIMENTS_HPP_
#define IADG_EXPERIMENTS_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iadg/metrics.hpp"
#include "iadg/trainer.hpp"

namespace iadg {

/// Scores from the original branch, in sample order.
ScoreSet score_samples(const Model& model, std::span<const SyntheticSample> samples, DkgMode dkg);

struct RunRecord {
	std::string arm;
	std::string train_domains;  // '+'-joined
	std::string holdout;
	std::uint64_t seed = 0;
	double auc = 0.0;
	EerResult eer;
	std::vector<RocPoint> roc;
	std::vector<EpochLog> history;
	/// Wall time of the training job that produced this record; not written to reports.
	double seconds = 0.0;
};

struct Report {
	std::vector<RunRecord> runs;
};

/// Mean AUC/HTER/EER of one arm over all its runs.
struct ArmMean {
	std::string arm;
	std::size_t runs = 0;
	double auc = 0.0;
	double hter = 0.0;
	double eer = 0.0;
};
std::vector<ArmMean> arm_means(const Report& r);

struct Arm {
	std::string name;
	nlohmann::json delta;  // TrainConfig keys overriding the base config
};

/// Component rows: baseline, +DKG, +DKG+CSA, +DKG+CSA+AIAW.
std::vector<Arm> component_arms();
/// full_iw, symmetric, then asymmetric at k_r:k_s = 1:1, 1:0.8, 1:0.5, 1:0.2, 1:0.1.
std::vector<Arm> whitening_arms(double k_real = 0.003);
/// static-only, dynamic-only, both.
std::vector<Arm> dkg_arms();
/// random mixing vs categorical assembly.
std::vector<Arm> augmentation_arms();
/// "components" | "whitening" | "dkg" | "augmentation" | "all".
std::vector<Arm> preset_arms(const std::string& name);
/// {"arms": [{"name": ..., "delta": {...}}, ...]} or {"preset": "..."}; optional "base" is returned via base_out.
std::vector<Arm> parse_matrix(const nlohmann::json& j, nlohmann::json* base_out = nullptr);

struct ExperimentOptions {
	std::vector<std::uint64_t> seeds{1};
	/// LOO holdouts; empty means every domain.
	std::vector<std::string> holdouts;
	/// Limited-source mode: train on exactly these domains, test on each of the others.
	std::vector<std::string> sources;
	/// Held-out samples per run used for the masked-covariance diagnostic (class-balanced).
	std::size_t monitor_limit = 64;
	/// Concurrent training runs; 0 reads IADG_THREADS, falling back to the hardware count.
	std::size_t threads = 0;
	/// Per-run checkpoints go to out_dir/<arm>/<holdout>/s<seed>/ when set.
	std::filesystem::path out_dir;
	std::function<void(const std::string&)> progress;
};

std::size_t thread_budget(std::size_t requested);

/// One config over the leave-one-out (or limited-source) protocol and every seed.
Report run_loo(const TrainConfig& cfg, const Dataset& data, const ExperimentOptions& opts, const std::string& arm = "run");
/// Every arm under shared seeds and holdouts. Runs are independent, ordered (arm, holdout, seed).
Report run_ablation(const TrainConfig& base, const std::vector<Arm>& arms, const Dataset& data,
                    const ExperimentOptions& opts);

/**
 * Writes metrics.csv, metrics.json, roc_<arm>.svg and loss_<arm>.svg.
 * CSV: one row per run, then one "mean" row per arm.
 */
void emit_outputs(const Report& r, const std::filesystem::path& out_dir);

std::string metrics_csv(const Report& r);
nlohmann::json metrics_json(const Report& r);

struct Series {
	std::string name;
	std::vector<std::pair<double, double>> points;
};
/// Standalone SVG line chart.
std::string svg_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                      const std::vector<Series>& series);
std::string roc_svg(const std::string& title, const std::vector<const RunRecord*>& runs);
std::string loss_svg(const std::string& title, const std::vector<EpochLog>& history);
std::string loss_svg(const std::string& title, const std::vector<const RunRecord*>& runs);

}  // namespace iadg

#endif  // IADG_EXPERIMENTS_HPP_
