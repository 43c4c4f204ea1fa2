#include "iadg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace iadg {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t fnv1a(const std::string& s) {
	std::uint64_t h = 0xcbf29ce484222325ull;
	for (unsigned char ch : s) h = (h ^ ch) * 0x100000001b3ull;
	return h;
}

double median(std::vector<double> v) {
	std::erase_if(v, [](double x) { return std::isnan(x); });
	if (v.empty()) return kNaN;
	std::sort(v.begin(), v.end());
	const std::size_t n = v.size();
	return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_or_nan(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

}  // namespace

void TrainConfig::validate() const {
	if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
	if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
		throw std::invalid_argument("Adam betas must lie in [0, 1)");
	if (!(eps_adam > 0.0)) throw std::invalid_argument("eps_adam must be positive");
	if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
	if (L == 0) throw std::invalid_argument("L must be at least 1");
	if (batch_size < 2 || batch_size % 2 != 0)
		throw std::invalid_argument("batch_size must be even and at least 2 (half real, half spoof), got " +
		                            std::to_string(batch_size));
	whitening_config().validate();
	if (csa == AugMode::off && (whitening == WhiteningMode::symmetric || whitening == WhiteningMode::asymmetric))
		throw std::invalid_argument("whitening '" + to_string(whitening) +
		                            "' selects entries from the augmented branch; it needs csa != off");
	if (model.channels.size() < 2 || model.channels.front() != 3)
		throw std::invalid_argument("model.channels must start with 3 input channels and list at least one stage");
}

std::uint64_t TrainConfig::hash() const {
	json j = to_json(*this);
	j.erase("epochs");
	return fnv1a(j.dump());
}

json to_json(const TrainConfig& c) {
	return {{"lr", c.lr},
	        {"beta1", c.beta1},
	        {"beta2", c.beta2},
	        {"eps_adam", c.eps_adam},
	        {"lambda", c.lambda},
	        {"L", c.L},
	        {"k_real", c.k_real},
	        {"k_spoof", c.k_spoof},
	        {"epochs", c.epochs},
	        {"batch_size", c.batch_size},
	        {"steps_per_epoch", c.steps_per_epoch},
	        {"seed", c.seed},
	        {"dkg", to_string(c.dkg)},
	        {"csa", to_string(c.csa)},
	        {"whitening", to_string(c.whitening)},
	        {"monitor_every", c.monitor_every},
	        {"model",
	         {{"channels", c.model.channels},
	          {"image_size", c.model.image_size},
	          {"kernel", c.model.kernel},
	          {"depth_hidden", c.model.depth_hidden}}}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
	if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
	for (const auto& [key, v] : j.items()) {
		try {
			if (key == "lr") c.lr = v.get<double>();
			else if (key == "beta1") c.beta1 = v.get<double>();
			else if (key == "beta2") c.beta2 = v.get<double>();
			else if (key == "eps_adam") c.eps_adam = v.get<double>();
			else if (key == "lambda") c.lambda = v.get<double>();
			else if (key == "L") c.L = v.get<std::size_t>();
			else if (key == "k_real") c.k_real = v.get<double>();
			else if (key == "k_spoof") c.k_spoof = v.get<double>();
			else if (key == "epochs") c.epochs = v.get<std::size_t>();
			else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
			else if (key == "steps_per_epoch") c.steps_per_epoch = v.get<std::size_t>();
			else if (key == "seed") c.seed = v.get<std::uint64_t>();
			else if (key == "dkg") c.dkg = parse_dkg_mode(v.get<std::string>());
			else if (key == "csa") c.csa = parse_aug_mode(v.get<std::string>());
			else if (key == "whitening") c.whitening = parse_whitening_mode(v.get<std::string>());
			else if (key == "monitor_every") c.monitor_every = v.get<std::size_t>();
			else if (key == "model") {
				for (const auto& [mk, mv] : v.items()) {
					if (mk == "channels") c.model.channels = mv.get<std::vector<std::size_t>>();
					else if (mk == "image_size") c.model.image_size = mv.get<std::size_t>();
					else if (mk == "kernel") c.model.kernel = mv.get<std::size_t>();
					else if (mk == "depth_hidden") c.model.depth_hidden = mv.get<std::size_t>();
					else throw std::invalid_argument("unknown model config key '" + mk + "'");
				}
			} else {
				throw std::invalid_argument("unknown train config key '" + key + "'");
			}
		} catch (const json::exception& e) {
			throw std::invalid_argument("train config key '" + key + "': " + e.what());
		}
	}
	return c;
}

json to_json(const EpochLog& e) {
	return {{"epoch", e.epoch},
	        {"steps", e.steps},
	        {"cls", number_or_null(e.cls)},
	        {"dep", number_or_null(e.dep)},
	        {"aiaw", number_or_null(e.aiaw)},
	        {"total", number_or_null(e.total)},
	        {"train_masked_abs", number_or_null(e.train_masked_abs)},
	        {"heldout_masked_abs", number_or_null(e.heldout_masked_abs)},
	        {"bank_stamp", e.bank_stamp}};
}

EpochLog epoch_log_from_json(const json& j) {
	EpochLog e;
	e.epoch = j.at("epoch").get<std::size_t>();
	e.steps = j.at("steps").get<std::size_t>();
	e.cls = number_or_nan(j.at("cls"));
	e.dep = number_or_nan(j.at("dep"));
	e.aiaw = number_or_nan(j.at("aiaw"));
	e.total = number_or_nan(j.at("total"));
	e.train_masked_abs = number_or_nan(j.at("train_masked_abs"));
	e.heldout_masked_abs = number_or_nan(j.at("heldout_masked_abs"));
	e.bank_stamp = j.at("bank_stamp").get<long>();
	return e;
}

// ---- optimizer -----------------------------------------------------------------

AdamState adam_init(const std::vector<Tensor>& params) {
	AdamState s;
	for (const Tensor& p : params) {
		s.m.emplace_back(p.shape(), 0.0);
		s.v.emplace_back(p.shape(), 0.0);
	}
	return s;
}

void adam_step(std::vector<Tensor>& params, std::span<const Tensor> grads, AdamState& st, const TrainConfig& cfg,
               const std::vector<std::string>* names) {
	if (grads.size() != params.size() || st.m.size() != params.size() || st.v.size() != params.size())
		throw std::invalid_argument("adam_step: " + std::to_string(params.size()) + " parameters, " +
		                            std::to_string(grads.size()) + " gradients, " + std::to_string(st.m.size()) +
		                            " moment slots");
	for (std::size_t i = 0; i < params.size(); ++i) {
		if (grads[i].shape() != params[i].shape() || st.m[i].shape() != params[i].shape())
			throw std::invalid_argument("adam_step: shape mismatch for parameter " + std::to_string(i));
		if (!grads[i].all_finite()) {
			const std::string who = names ? (*names)[i] : "#" + std::to_string(i);
			throw std::runtime_error("adam_step: non-finite gradient for parameter " + who + "; step aborted");
		}
	}
	++st.t;
	const double t = static_cast<double>(st.t);
	const double c1 = 1.0 - std::pow(cfg.beta1, t), c2 = 1.0 - std::pow(cfg.beta2, t);
	for (std::size_t i = 0; i < params.size(); ++i) {
		double* p = params[i].ptr();
		double* m = st.m[i].ptr();
		double* v = st.v[i].ptr();
		const double* g = grads[i].ptr();
		for (std::size_t k = 0; k < params[i].size(); ++k) {
			m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
			v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
			const double mh = m[k] / c1, vh = v[k] / c2;
			p[k] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps_adam);
		}
	}
}

// ---- state -------------------------------------------------------------------------

Checkpoint initial_checkpoint(const TrainConfig& cfg) {
	cfg.validate();
	Model m = Model::create(cfg.model, cfg.seed);
	Checkpoint c;
	c.config = cfg;
	c.config_hash = cfg.hash();
	c.names = m.params.names();
	c.params = m.params.values();
	c.adam = adam_init(c.params);
	c.rng = Rng(cfg.seed).split(0xE90C).state();
	return c;
}

Model restore_model(const Checkpoint& ckpt) {
	Model m = Model::create(ckpt.config.model, ckpt.config.seed);
	if (m.params.size() != ckpt.params.size())
		throw std::invalid_argument("checkpoint holds " + std::to_string(ckpt.params.size()) +
		                            " tensors, model expects " + std::to_string(m.params.size()));
	for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
		Tensor& dst = m.params[m.params.find(ckpt.names[i])];
		if (dst.shape() != ckpt.params[i].shape())
			throw std::invalid_argument("checkpoint tensor " + ckpt.names[i] + " has shape " +
			                            shape_str(ckpt.params[i].shape()) + ", model expects " + shape_str(dst.shape()));
		dst = ckpt.params[i];
	}
	return m;
}

// ---- bank and diagnostics -----------------------------------------------------------

namespace {

constexpr std::size_t kChunk = 32;

std::vector<std::size_t> iota_range(std::size_t begin, std::size_t end) {
	std::vector<std::size_t> v(end - begin);
	std::iota(v.begin(), v.end(), begin);
	return v;
}

Tensor label_targets(std::span<const ClassLabel> labels) {
	Tensor y({labels.size()});
	for (std::size_t i = 0; i < labels.size(); ++i) y[i] = label_value(labels[i]);
	return y;
}

}  // namespace

StyleBank refresh_bank(std::span<const SyntheticSample> data, const Model& model, std::size_t L, long epoch,
                       DkgMode dkg) {
	if (data.empty()) throw std::invalid_argument("refresh_bank: empty dataset");
	std::vector<StyleStats> pool;
	pool.reserve(data.size());
	for (std::size_t b = 0; b < data.size(); b += kChunk) {
		const std::vector<std::size_t> idx = iota_range(b, std::min(data.size(), b + kChunk));
		Tape tape(false);
		BoundParams p(tape, model.params, false);
		Var s1 = run_stage(tape.constant(stack_images(data, idx)), p, model.backbone.stages.front(), dkg);
		const std::vector<ClassLabel> labels = gather_labels(data, idx);
		for (StyleStats& s : compute_style_stats(s1.value(), labels)) pool.push_back(std::move(s));
	}
	return build_bank(pool, L, epoch);
}

double heldout_masked_abs(const Model& model, const StyleBank& bank, std::span<const SyntheticSample> data,
                          const TrainConfig& cfg) {
	if (data.empty() || !bank.populated()) return kNaN;
	Rng rng = Rng(cfg.seed).split(0xD1A6);
	const std::size_t c = model.config.channels.back();
	std::vector<Tensor> org, aug;
	std::vector<ClassLabel> labels;
	for (std::size_t b = 0; b < data.size(); b += kChunk) {
		const std::vector<std::size_t> idx = iota_range(b, std::min(data.size(), b + kChunk));
		const std::vector<ClassLabel> lab = gather_labels(data, idx);
		Tape tape(false);
		BoundParams p(tape, model.params, false);
		DualOutputs out = forward_dual(tape.constant(stack_images(data, idx)), p, model, lab, AugMode::csa, &bank, rng,
		                               cfg.dkg);
		const Tensor so = covariance(out.org.final_feat).value();
		const Tensor sa = covariance(out.aug->final_feat).value();
		for (std::size_t i = 0; i < idx.size(); ++i) {
			Tensor a({c, c}), s({c, c});
			std::copy_n(so.ptr() + i * c * c, c * c, a.ptr());
			std::copy_n(sa.ptr() + i * c * c, c * c, s.ptr());
			org.push_back(std::move(a));
			aug.push_back(std::move(s));
		}
		labels.insert(labels.end(), lab.begin(), lab.end());
	}
	std::vector<double> per_sample;
	for (ClassLabel cls : {ClassLabel::real, ClassLabel::spoof}) {
		std::vector<std::pair<Tensor, Tensor>> pairs;
		std::vector<std::size_t> members;
		for (std::size_t i = 0; i < labels.size(); ++i)
			if (labels[i] == cls) {
				pairs.emplace_back(org[i], aug[i]);
				members.push_back(i);
			}
		if (pairs.empty()) continue;
		const double k = cls == ClassLabel::real ? cfg.k_real : cfg.k_spoof;
		const SelectiveMask mask = selective_mask(variance_matrix(pairs), k);
		if (mask.count() == 0) continue;
		for (std::size_t i : members) per_sample.push_back(masked_abs_mean(org[i], mask));
	}
	return median(std::move(per_sample));
}

// ---- training loop -------------------------------------------------------------------

Checkpoint train(const TrainConfig& cfg, std::span<const SyntheticSample> data, const TrainOptions& opts) {
	return train(cfg, data, initial_checkpoint(cfg), opts);
}

Checkpoint train(const TrainConfig& cfg, std::span<const SyntheticSample> data, Checkpoint state,
                 const TrainOptions& opts) {
	cfg.validate();
	if (state.config_hash != cfg.hash())
		throw std::invalid_argument("checkpoint was produced under a different configuration (hash " +
		                            std::to_string(state.config_hash) + " vs " + std::to_string(cfg.hash()) + ")");
	state.config = cfg;
	if (state.epoch >= cfg.epochs) return state;

	std::vector<std::size_t> reals, spoofs;
	for (std::size_t i = 0; i < data.size(); ++i) (data[i].y_cls == ClassLabel::real ? reals : spoofs).push_back(i);
	if (reals.empty() || spoofs.empty()) throw std::invalid_argument("train: dataset must contain both classes");
	for (const SyntheticSample& s : data)
		if (s.image.dim(1) != cfg.model.image_size)
			throw std::invalid_argument("train: sample size " + std::to_string(s.image.dim(1)) +
			                            " does not match model.image_size " + std::to_string(cfg.model.image_size));

	const std::size_t half = cfg.batch_size / 2;
	const std::size_t steps =
	    cfg.steps_per_epoch ? cfg.steps_per_epoch : std::max<std::size_t>(1, std::min(reals.size(), spoofs.size()) / half);
	const WhiteningConfig wcfg = cfg.whitening_config();
	Model model = restore_model(state);

	while (state.epoch < cfg.epochs) {
		const Checkpoint last_good = state;
		const std::size_t epoch = state.epoch + 1;
		Rng rng = Rng::from_state(state.rng);

		StyleBank bank = refresh_bank(data, model, cfg.L, static_cast<long>(epoch), cfg.dkg);

		std::vector<std::size_t> r = reals, s = spoofs;
		std::shuffle(r.begin(), r.end(), rng);
		std::shuffle(s.begin(), s.end(), rng);

		EpochLog log;
		log.epoch = epoch;
		log.steps = steps;
		log.bank_stamp = bank.epoch_stamp;
		std::vector<double> masked;
		for (std::size_t step = 0; step < steps; ++step) {
			std::vector<std::size_t> idx;
			for (std::size_t j = 0; j < half; ++j) idx.push_back(r[(step * half + j) % r.size()]);
			for (std::size_t j = 0; j < half; ++j) idx.push_back(s[(step * half + j) % s.size()]);
			const std::vector<ClassLabel> labels = gather_labels(data, idx);

			Tape tape;
			BoundParams p(tape, model.params, true);
			DualOutputs out = forward_dual(tape.constant(stack_images(data, idx)), p, model, labels, cfg.csa, &bank, rng,
			                               cfg.dkg);
			Var logits_aug, dep_aug;
			if (out.aug) {
				logits_aug = cls_logits(out.aug->final_feat, p, model.heads);
				dep_aug = depth_map(out.aug->final_feat, p, model.heads);
			}
			Var lc = cls_loss(cls_logits(out.org.final_feat, p, model.heads), logits_aug, label_targets(labels));
			Var ld = depth_loss(depth_map(out.org.final_feat, p, model.heads), dep_aug, stack_depth(data, idx));
			Var la;
			if (cfg.whitening != WhiteningMode::off) {
				Var sa = out.aug ? covariance(out.aug->final_feat) : Var();
				AiawResult res = aiaw_loss(covariance(out.org.final_feat), sa, labels, wcfg);
				la = res.loss;
				masked.insert(masked.end(), res.masked_abs_org.begin(), res.masked_abs_org.end());
			}
			Var total = total_loss(lc, ld, la, cfg.lambda);
			const double tv = total.value().item();
			if (!std::isfinite(tv))
				throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
				                          std::to_string(step + 1) + " (loss " + std::to_string(tv) + ")",
				                      last_good);

			Gradients g = tape.backward(total);
			std::vector<Tensor> grads;
			grads.reserve(p.vars().size());
			for (Var v : p.vars()) grads.push_back(g[v]);
			try {
				adam_step(model.params.values(), grads, state.adam, cfg, &state.names);
			} catch (const std::runtime_error& e) {
				throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
				                          std::to_string(step + 1) + ": " + e.what(),
				                      last_good);
			}

			log.cls += lc.value().item();
			log.dep += ld.value().item();
			log.aiaw += la.valid() ? la.value().item() : 0.0;
			log.total += tv;
		}
		const double n = static_cast<double>(steps);
		log.cls /= n;
		log.dep /= n;
		log.aiaw = cfg.whitening == WhiteningMode::off ? kNaN : log.aiaw / n;
		log.total /= n;
		log.train_masked_abs = median(std::move(masked));

		const bool monitor_now = epoch == 1 || epoch == cfg.epochs || (cfg.monitor_every && epoch % cfg.monitor_every == 0);
		log.heldout_masked_abs = monitor_now ? heldout_masked_abs(model, bank, opts.monitor, cfg) : kNaN;

		state.params = model.params.values();
		state.bank = std::move(bank);
		state.rng = rng.state();
		state.epoch = epoch;
		state.history.push_back(log);
		if (!opts.out_dir.empty()) save_checkpoint(opts.out_dir / "last.ckpt", state);
		if (opts.on_epoch) opts.on_epoch(log);
	}
	if (!opts.out_dir.empty()) save_checkpoint(opts.out_dir / "final.ckpt", state);
	return state;
}

}  // namespace iadg
