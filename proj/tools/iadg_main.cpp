// iadg command line.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "iadg/experiments.hpp"
#include "iadg/gradsuite.hpp"

using namespace iadg;
using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& p) {
	std::ifstream in(p);
	if (!in) throw std::runtime_error("cannot open " + p.string());
	try {
		return json::parse(in);
	} catch (const json::exception& e) {
		throw std::runtime_error(p.string() + ": " + e.what());
	}
}

void write_file(const std::filesystem::path& p, const std::string& text) {
	if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
	std::ofstream out(p, std::ios::binary | std::ios::trunc);
	if (!out) throw std::runtime_error("cannot write " + p.string());
	out << text;
}

std::vector<std::string> split_list(const std::string& s) {
	std::vector<std::string> out;
	std::stringstream ss(s);
	for (std::string item; std::getline(ss, item, ',');)
		if (!item.empty()) out.push_back(item);
	return out;
}

// Base config: defaults, then --config, then an image size matching the data.
TrainConfig load_config(const std::string& path, const DatasetInfo& info) {
	TrainConfig cfg;
	if (!path.empty()) cfg = train_config_from_json(read_json(path));
	if (cfg.model.image_size != info.image_size) {
		if (!path.empty() && read_json(path).contains("model") && read_json(path)["model"].contains("image_size"))
			throw std::invalid_argument("config image_size " + std::to_string(cfg.model.image_size) +
			                            " does not match the dataset (" + std::to_string(info.image_size) + ")");
		cfg.model.image_size = info.image_size;
	}
	return cfg;
}

std::vector<SyntheticSample> domain_samples(const Dataset& ds, const std::string& id, bool keep) {
	std::vector<SyntheticSample> out;
	for (const SyntheticSample& s : ds.samples)
		if ((s.domain_id == id) == keep) out.push_back(s);
	return out;
}

void require_domain(const Dataset& ds, const std::string& id) {
	for (const DomainSpec& d : ds.domains)
		if (d.id == id) return;
	throw std::invalid_argument("holdout '" + id + "' is not a domain of this dataset");
}

void print_log(const EpochLog& e) {
	std::printf("epoch %3zu  total %.5f  cls %.5f  dep %.5f  aiaw %.5f  masked|S| train %.5f heldout %.5f\n", e.epoch,
	            e.total, e.cls, e.dep, e.aiaw, e.train_masked_abs, e.heldout_masked_abs);
	std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
	CLI::App app{"Instance-aware domain generalization on synthetic anti-spoofing data"};
	app.require_subcommand(1);

	// gen-data
	std::size_t n_domains = 4, per_class = 200, size = 64, depth = 8;
	std::uint64_t data_seed = 17;
	std::string data_out = "data";
	auto* gen = app.add_subcommand("gen-data", "Generate the procedural multi-domain dataset");
	gen->add_option("--domains", n_domains, "Number of domains")->check(CLI::Range(2, 64));
	gen->add_option("--per-class", per_class, "Samples per class per domain")->check(CLI::PositiveNumber);
	gen->add_option("--size", size, "Image size S")->check(CLI::Range(16, 1024));
	gen->add_option("--depth", depth, "Depth label size D")->check(CLI::PositiveNumber);
	gen->add_option("--seed", data_seed, "Dataset seed");
	gen->add_option("--out", data_out, "Output directory or file");

	// train
	std::string config_path, data_path = "data", holdout = "D3", run_out = "runs/r1", resume;
	std::optional<std::size_t> epochs_override;
	std::optional<std::uint64_t> seed_override;
	auto* tr = app.add_subcommand("train", "Train on every domain except the holdout");
	tr->add_option("--config", config_path, "Train config JSON (schema in README)");
	tr->add_option("--data", data_path, "Dataset directory or file");
	tr->add_option("--holdout", holdout, "Held-out domain id");
	tr->add_option("--out", run_out, "Run directory");
	tr->add_option("--epochs", epochs_override, "Override config epochs");
	tr->add_option("--seed", seed_override, "Override config seed");
	tr->add_option("--resume", resume, "Continue from this checkpoint");

	// eval
	std::string ckpt_path, eval_out;
	auto* ev = app.add_subcommand("eval", "Score a checkpoint on a held-out domain");
	ev->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
	ev->add_option("--data", data_path, "Dataset directory or file");
	ev->add_option("--holdout", holdout, "Domain to evaluate");
	ev->add_option("--out", eval_out, "Write metrics.csv/json and roc SVG here");

	// loo
	std::size_t n_seeds = 1;
	std::string holdout_list, sources, exp_out = "runs/loo";
	std::size_t threads = 0, monitor_limit = 64;
	auto* loo = app.add_subcommand("loo", "Leave-one-domain-out protocol (or limited sources)");
	loo->add_option("--config", config_path, "Train config JSON");
	loo->add_option("--data", data_path, "Dataset directory or file");
	loo->add_option("--seeds", n_seeds, "Seeds config.seed, config.seed+1, ...")->check(CLI::PositiveNumber);
	loo->add_option("--holdouts", holdout_list, "Comma-separated subset of holdouts");
	loo->add_option("--sources", sources, "Comma-separated source domains (limited-source mode)");
	loo->add_option("--threads", threads, "Concurrent runs (default: IADG_THREADS or hardware)");
	loo->add_option("--out", exp_out, "Output directory");

	// ablate
	std::string matrix = "components";
	auto* ab = app.add_subcommand("ablate", "Train every arm of an ablation matrix under shared seeds");
	ab->add_option("--matrix", matrix, "Matrix JSON file or preset: components|whitening|dkg|augmentation|all");
	ab->add_option("--config", config_path, "Base train config JSON");
	ab->add_option("--data", data_path, "Dataset directory or file");
	ab->add_option("--seeds", n_seeds, "Number of seeds")->check(CLI::PositiveNumber);
	ab->add_option("--holdouts", holdout_list, "Comma-separated subset of holdouts");
	ab->add_option("--threads", threads, "Concurrent runs (default: IADG_THREADS or hardware)");
	ab->add_option("--monitor", monitor_limit, "Held-out samples for masked-covariance diagnostics");
	ab->add_option("--out", exp_out, "Output directory");

	// grad-check
	std::size_t gc_seeds = 5;
	auto* gc = app.add_subcommand("grad-check", "Finite-difference check of every primitive and composed loss");
	gc->add_option("--seeds", gc_seeds, "Seeds per case")->check(CLI::PositiveNumber);

	// plot
	std::string run_dir;
	auto* pl = app.add_subcommand("plot", "Render loss (and ROC, when metrics exist) SVGs for a run directory");
	pl->add_option("--run", run_dir, "Run directory")->required();

	CLI11_PARSE(app, argc, argv);

	try {
		if (*gen) {
			const std::vector<DomainSpec> domains = default_domains(n_domains);
			Dataset ds{size, depth, domains, generate_dataset(domains, per_class, data_seed, size, depth)};
			const std::filesystem::path file =
			    std::filesystem::path(data_out).extension() == ".iadg" ? std::filesystem::path(data_out) : std::filesystem::path(data_out) / "dataset.iadg";
			write_dataset(file, ds);
			std::printf("wrote %zu samples (%zu domains, S=%zu, D=%zu) to %s\n", ds.samples.size(), domains.size(), size,
			            depth, file.string().c_str());
			return 0;
		}

		if (*tr) {
			const Dataset ds = read_dataset(dataset_file(data_path));
			require_domain(ds, holdout);
			TrainConfig cfg = load_config(config_path, probe_dataset(dataset_file(data_path)));
			if (epochs_override) cfg.epochs = *epochs_override;
			if (seed_override) cfg.seed = *seed_override;
			const std::vector<SyntheticSample> train_set = domain_samples(ds, holdout, false);
			const std::vector<SyntheticSample> test_set = domain_samples(ds, holdout, true);
			std::vector<SyntheticSample> monitor;
			std::size_t r = 0, s = 0;
			for (const SyntheticSample& x : test_set)
				if ((x.y_cls == ClassLabel::real ? r : s)++ < 32) monitor.push_back(x);

			std::filesystem::create_directories(run_out);
			write_file(std::filesystem::path(run_out) / "config.json", to_json(cfg).dump(2) + "\n");
			TrainOptions opts;
			opts.out_dir = run_out;
			opts.monitor = monitor;
			opts.on_epoch = print_log;
			const auto t0 = std::chrono::steady_clock::now();
			Checkpoint start = resume.empty() ? initial_checkpoint(cfg) : load_checkpoint(resume);
			const Checkpoint ckpt = train(cfg, train_set, std::move(start), opts);
			const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

			const ScoreSet scores = score_samples(restore_model(ckpt), test_set, cfg.dkg);
			Report rep;
			std::string train_ids;
			for (const DomainSpec& d : ds.domains)
				if (d.id != holdout) train_ids += (train_ids.empty() ? "" : "+") + d.id;
			rep.runs.push_back({"run", train_ids, holdout, cfg.seed, auc(scores), eer_hter(scores), roc_curve(scores), ckpt.history});
			emit_outputs(rep, run_out);
			write_file(std::filesystem::path(run_out) / "loss.svg", loss_svg("Training loss", ckpt.history));
			std::printf("holdout %s: AUC %.4f  HTER %.4f  (%.1f s)\n", holdout.c_str(), rep.runs[0].auc,
			            rep.runs[0].eer.hter, secs);
			return 0;
		}

		if (*ev) {
			const Checkpoint ckpt = load_checkpoint(ckpt_path);
			const Dataset ds = read_dataset(dataset_file(data_path));
			require_domain(ds, holdout);
			const std::vector<SyntheticSample> test_set = domain_samples(ds, holdout, true);
			const ScoreSet scores = score_samples(restore_model(ckpt), test_set, ckpt.config.dkg);
			const EerResult e = eer_hter(scores);
			const double a = auc(scores);
			std::printf("holdout %s: AUC %.6f  HTER %.6f  EER %.6f  threshold %.6f  (n=%zu)\n", holdout.c_str(), a, e.hter,
			            e.eer, e.threshold, scores.scores.size());
			if (!eval_out.empty()) {
				Report rep;
				rep.runs.push_back({"eval", "", holdout, ckpt.config.seed, a, e, roc_curve(scores), ckpt.history});
				emit_outputs(rep, eval_out);
			}
			return 0;
		}

		if (*loo || *ab) {
			const Dataset ds = read_dataset(dataset_file(data_path));
			json base_delta = json::object();
			std::vector<Arm> arms;
			if (*ab) {
				if (std::filesystem::exists(matrix))
					arms = parse_matrix(read_json(matrix), &base_delta);
				else
					arms = preset_arms(matrix);
			}
			TrainConfig cfg = load_config(config_path, probe_dataset(dataset_file(data_path)));
			cfg = train_config_from_json(base_delta, cfg);
			ExperimentOptions opts;
			opts.seeds.clear();
			for (std::size_t i = 0; i < n_seeds; ++i) opts.seeds.push_back(cfg.seed + i);
			opts.holdouts = split_list(holdout_list);
			opts.sources = split_list(sources);
			opts.threads = threads;
			opts.monitor_limit = monitor_limit;
			opts.out_dir = std::filesystem::path(exp_out) / "runs";
			opts.progress = [](const std::string& line) {
				std::printf("%s\n", line.c_str());
				std::fflush(stdout);
			};
			const Report rep = *ab ? run_ablation(cfg, arms, ds, opts) : run_loo(cfg, ds, opts);
			emit_outputs(rep, exp_out);
			std::printf("\n%-28s %6s %8s %8s\n", "arm", "runs", "AUC", "HTER");
			for (const ArmMean& m : arm_means(rep)) std::printf("%-28s %6zu %8.4f %8.4f\n", m.arm.c_str(), m.runs, m.auc, m.hter);
			return 0;
		}

		if (*gc) {
			std::vector<std::uint64_t> seeds;
			for (std::size_t i = 0; i < gc_seeds; ++i) seeds.push_back(i + 1);
			const auto t0 = std::chrono::steady_clock::now();
			double worst = 0.0;
			for (const GradCase& c : gradient_cases()) {
				double w = 0.0;
				for (std::uint64_t s : seeds) w = std::max(w, c.run(s));
				worst = std::max(worst, w);
				std::printf("%-28s max_rel_err %.3e\n", c.name.c_str(), w);
			}
			const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
			std::printf("worst %.3e over %zu seeds in %.1f s\n", worst, seeds.size(), secs);
			return worst < 1e-4 ? 0 : 1;
		}

		if (*pl) {
			const std::filesystem::path dir(run_dir);
			std::filesystem::path ck = dir / "final.ckpt";
			if (!std::filesystem::exists(ck)) ck = dir / "last.ckpt";
			if (!std::filesystem::exists(ck)) throw std::runtime_error("no final.ckpt or last.ckpt in " + dir.string());
			const Checkpoint c = load_checkpoint(ck);
			write_file(dir / "loss.svg", loss_svg("Training loss", c.history));
			std::printf("wrote %s\n", (dir / "loss.svg").string().c_str());
			if (std::filesystem::exists(dir / "metrics.json")) {
				const json m = read_json(dir / "metrics.json");
				std::vector<RunRecord> runs;
				for (const json& r : m.at("runs")) {
					RunRecord rec;
					rec.arm = r.at("arm").get<std::string>();
					rec.holdout = r.at("holdout").get<std::string>();
					rec.seed = r.at("seed").get<std::uint64_t>();
					for (const json& p : r.at("roc")) rec.roc.push_back({p[0].get<double>(), p[1].get<double>()});
					runs.push_back(std::move(rec));
				}
				std::vector<const RunRecord*> ptrs;
				for (const RunRecord& r : runs) ptrs.push_back(&r);
				write_file(dir / "roc.svg", roc_svg("ROC", ptrs));
				std::printf("wrote %s\n", (dir / "roc.svg").string().c_str());
			}
			return 0;
		}
	} catch (const std::exception& e) {
		std::fprintf(stderr, "iadg: %s\n", e.what());
		return 1;
	}
	return 0;
}
