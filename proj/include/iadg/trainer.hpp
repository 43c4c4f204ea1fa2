#ifndef IADG_TRAINER_HPP_
#define IADG_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "iadg/model.hpp"
#include "iadg/synthdata.hpp"
#include "iadg/whitening.hpp"

namespace iadg {

struct TrainConfig {
	double lr = 1e-4;
	double beta1 = 0.9;
	double beta2 = 0.999;
	double eps_adam = 1e-8;
	double lambda = 0.1;
	std::size_t L = 16;
	double k_real = 0.003;
	double k_spoof = 0.0006;
	std::size_t epochs = 30;
	std::size_t batch_size = 16;
	/// Batches per epoch; 0 means one class-balanced pass over the smaller class.
	std::size_t steps_per_epoch = 0;
	std::uint64_t seed = 1;
	DkgMode dkg = DkgMode::full;
	AugMode csa = AugMode::csa;
	WhiteningMode whitening = WhiteningMode::asymmetric;
	/// Held-out diagnostics run at epoch 1, the last epoch and every this many epochs (0: only those two).
	std::size_t monitor_every = 1;
	ModelConfig model;

	void validate() const;
	WhiteningConfig whitening_config() const { return {whitening, k_real, k_spoof}; }
	/// Hash of every field except `epochs`, so a run may be resumed with a longer schedule.
	std::uint64_t hash() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct AdamState {
	std::vector<Tensor> m;
	std::vector<Tensor> v;
	std::uint64_t t = 0;
};

AdamState adam_init(const std::vector<Tensor>& params);
/// One bias-corrected Adam update; t is incremented first. Non-finite gradients abort before any write.
void adam_step(std::vector<Tensor>& params, std::span<const Tensor> grads, AdamState& state, const TrainConfig& cfg,
               const std::vector<std::string>* names = nullptr);

struct EpochLog {
	std::size_t epoch = 0;  // 1-based
	std::size_t steps = 0;
	double cls = 0.0;
	double dep = 0.0;
	double aiaw = 0.0;
	double total = 0.0;
	/// Median per-sample masked |Σ_org| over the epoch's training batches (NaN without whitening).
	double train_masked_abs = 0.0;
	/// Median per-sample masked |Σ_org| on the monitor set (NaN when not computed).
	double heldout_masked_abs = 0.0;
	long bank_stamp = -1;
};

nlohmann::json to_json(const EpochLog& e);
EpochLog epoch_log_from_json(const nlohmann::json& j);

struct Checkpoint {
	TrainConfig config;
	std::uint64_t config_hash = 0;
	std::size_t epoch = 0;  // completed epochs
	std::vector<std::string> names;
	std::vector<Tensor> params;
	AdamState adam;
	StyleBank bank;
	Rng::State rng;
	std::vector<EpochLog> history;
};

/// Initial state for a config: fresh model, zero moments, empty bank.
Checkpoint initial_checkpoint(const TrainConfig& cfg);
/// Model with the checkpoint's parameter values.
Model restore_model(const Checkpoint& ckpt);

// ---- checkpoint file ----------------------------------------------------------
//   "IADGCKPT" | u16 version | u32 manifest length | UTF-8 JSON manifest | f64 LE tensors

inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Raised when the loss becomes non-finite; carries the state at the start of the failing epoch.
class DivergenceError : public std::runtime_error {
public:
	DivergenceError(const std::string& what, Checkpoint last_good)
	    : std::runtime_error(what), last_good_(std::move(last_good)) {}
	const Checkpoint& last_good() const { return last_good_; }

private:
	Checkpoint last_good_;
};

/// Stage-1 style statistics of every sample, FPS per class, stamped with `epoch`.
StyleBank refresh_bank(std::span<const SyntheticSample> data, const Model& model, std::size_t L, long epoch,
                       DkgMode dkg = DkgMode::full);

/**
 * Median over samples of the mean |Σ_org| on the class mask, with masks
 * chosen from the org/aug variance on `data` itself at ratios (k_r, k_s).
 * The aug branch uses CSA styles from `bank` under a fixed stream of `seed`.
 */
double heldout_masked_abs(const Model& model, const StyleBank& bank, std::span<const SyntheticSample> data,
                          const TrainConfig& cfg);

struct TrainOptions {
	/// When set, last.ckpt is written after every epoch and final.ckpt at the end.
	std::filesystem::path out_dir;
	/// Samples used for the held-out diagnostics; never trained on.
	std::span<const SyntheticSample> monitor;
	std::function<void(const EpochLog&)> on_epoch;
};

/// Trains from `start` (an initial_checkpoint or a loaded one) up to cfg.epochs.
Checkpoint train(const TrainConfig& cfg, std::span<const SyntheticSample> data, Checkpoint start,
                 const TrainOptions& opts = {});
Checkpoint train(const TrainConfig& cfg, std::span<const SyntheticSample> data, const TrainOptions& opts = {});

}  // namespace iadg

#endif  // IADG_TRAINER_HPP_
