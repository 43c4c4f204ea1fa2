#include "iadg/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace iadg {

using nlohmann::json;

ScoreSet score_samples(const Model& model, std::span<const SyntheticSample> samples, DkgMode dkg) {
	ScoreSet s;
	constexpr std::size_t chunk = 32;
	for (std::size_t b = 0; b < samples.size(); b += chunk) {
		std::vector<std::size_t> idx;
		for (std::size_t i = b; i < std::min(samples.size(), b + chunk); ++i) idx.push_back(i);
		const std::vector<double> p = predict(model, stack_images(samples, idx), dkg);
		s.scores.insert(s.scores.end(), p.begin(), p.end());
		for (std::size_t i : idx) s.labels.push_back(samples[i].y_cls);
	}
	return s;
}

std::vector<ArmMean> arm_means(const Report& r) {
	std::vector<ArmMean> out;
	for (const RunRecord& run : r.runs) {
		auto it = std::find_if(out.begin(), out.end(), [&](const ArmMean& m) { return m.arm == run.arm; });
		if (it == out.end()) {
			out.push_back({run.arm});
			it = out.end() - 1;
		}
		it->runs++;
		it->auc += run.auc;
		it->hter += run.eer.hter;
		it->eer += run.eer.eer;
	}
	for (ArmMean& m : out) {
		const double n = static_cast<double>(m.runs);
		m.auc /= n;
		m.hter /= n;
		m.eer /= n;
	}
	return out;
}

// ---- arm presets ----------------------------------------------------------------------

std::vector<Arm> component_arms() {
	return {
	    {"baseline", {{"dkg", "static"}, {"csa", "off"}, {"whitening", "off"}}},
	    {"dkg", {{"dkg", "dkg"}, {"csa", "off"}, {"whitening", "off"}}},
	    {"dkg+csa", {{"dkg", "dkg"}, {"csa", "csa"}, {"whitening", "off"}}},
	    {"dkg+csa+aiaw", {{"dkg", "dkg"}, {"csa", "csa"}, {"whitening", "asymmetric"}}},
	};
}

std::vector<Arm> whitening_arms(double k_real) {
	std::vector<Arm> arms = {
	    {"full_iw", {{"whitening", "full_iw"}}},
	    {"symmetric", {{"whitening", "symmetric"}, {"k_real", k_real}, {"k_spoof", k_real}}},
	};
	for (const auto& [label, r] : std::vector<std::pair<std::string, double>>{
	         {"1:1", 1.0}, {"1:0.8", 0.8}, {"1:0.5", 0.5}, {"1:0.2", 0.2}, {"1:0.1", 0.1}})
		arms.push_back({"asymmetric_" + label, {{"whitening", "asymmetric"}, {"k_real", k_real}, {"k_spoof", k_real * r}}});
	for (Arm& a : arms) {
		a.delta["dkg"] = "dkg";
		a.delta["csa"] = "csa";
	}
	return arms;
}

std::vector<Arm> dkg_arms() {
	std::vector<Arm> arms = {{"static_only", {{"dkg", "static"}}},
	                         {"dynamic_only", {{"dkg", "dynamic"}}},
	                         {"static+dynamic", {{"dkg", "dkg"}}}};
	for (Arm& a : arms) {
		a.delta["csa"] = "csa";
		a.delta["whitening"] = "asymmetric";
	}
	return arms;
}

std::vector<Arm> augmentation_arms() {
	std::vector<Arm> arms = {{"random_mix", {{"csa", "random_mix"}}}, {"csa", {{"csa", "csa"}}}};
	for (Arm& a : arms) {
		a.delta["dkg"] = "dkg";
		a.delta["whitening"] = "asymmetric";
	}
	return arms;
}

std::vector<Arm> preset_arms(const std::string& name) {
	if (name == "components") return component_arms();
	if (name == "whitening") return whitening_arms();
	if (name == "dkg") return dkg_arms();
	if (name == "augmentation") return augmentation_arms();
	if (name == "all") {
		std::vector<Arm> all;
		for (const char* group : {"components", "whitening", "dkg", "augmentation"}) {
			std::vector<Arm> g = preset_arms(group);
			for (Arm& a : g) a.name = std::string(group) + "/" + a.name;
			all.insert(all.end(), g.begin(), g.end());
		}
		return all;
	}
	throw std::invalid_argument("unknown arm preset '" + name + "' (expected components|whitening|dkg|augmentation|all)");
}

std::vector<Arm> parse_matrix(const json& j, json* base_out) {
	if (!j.is_object()) throw std::invalid_argument("ablation matrix must be a JSON object");
	if (base_out) *base_out = j.value("base", json::object());
	std::vector<Arm> arms;
	if (j.contains("preset")) arms = preset_arms(j.at("preset").get<std::string>());
	if (j.contains("arms"))
		for (const json& a : j.at("arms")) arms.push_back({a.at("name").get<std::string>(), a.value("delta", json::object())});
	if (arms.empty()) throw std::invalid_argument("ablation matrix lists no arms");
	std::set<std::string> names;
	for (const Arm& a : arms)
		if (!names.insert(a.name).second) throw std::invalid_argument("duplicate arm name '" + a.name + "'");
	return arms;
}

// ---- runs ----------------------------------------------------------------------------------

std::size_t thread_budget(std::size_t requested) {
	if (requested) return requested;
	if (const char* env = std::getenv("IADG_THREADS")) {
		char* end = nullptr;
		const unsigned long v = std::strtoul(env, &end, 10);
		if (end != env && *end == '\0' && v > 0) return v;
		throw std::invalid_argument(std::string("IADG_THREADS must be a positive integer, got '") + env + "'");
	}
	return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct Job {
	std::string arm;
	TrainConfig cfg;
	std::vector<std::string> train_domains;
	std::vector<std::string> eval_domains;
};

std::string join(const std::vector<std::string>& v) {
	std::string s;
	for (const std::string& x : v) s += (s.empty() ? "" : "+") + x;
	return s;
}

std::vector<SyntheticSample> select(const Dataset& data, const std::set<std::string>& domains) {
	std::vector<SyntheticSample> out;
	for (const SyntheticSample& s : data.samples)
		if (domains.count(s.domain_id)) out.push_back(s);
	return out;
}

std::vector<SyntheticSample> balanced_subset(const std::vector<SyntheticSample>& v, std::size_t limit) {
	std::vector<SyntheticSample> out;
	std::size_t r = 0, s = 0;
	for (const SyntheticSample& x : v) {
		std::size_t& n = x.y_cls == ClassLabel::real ? r : s;
		if (n < limit / 2) {
			out.push_back(x);
			++n;
		}
	}
	return out;
}

std::vector<Job> protocol_jobs(const TrainConfig& cfg, const Dataset& data, const ExperimentOptions& opts,
                               const std::string& arm) {
	std::vector<std::string> ids;
	for (const DomainSpec& d : data.domains) ids.push_back(d.id);
	if (ids.size() < 2) throw std::invalid_argument("leave-one-out needs at least 2 domains");
	auto require = [&](const std::string& id) {
		if (std::find(ids.begin(), ids.end(), id) == ids.end())
			throw std::invalid_argument("domain '" + id + "' is not in the dataset");
	};
	if (opts.seeds.empty()) throw std::invalid_argument("at least one seed is required");

	std::vector<Job> jobs;
	for (std::uint64_t seed : opts.seeds) {
		TrainConfig c = cfg;
		c.seed = seed;
		if (!opts.sources.empty()) {
			for (const std::string& s : opts.sources) require(s);
			std::vector<std::string> targets;
			for (const std::string& id : ids)
				if (std::find(opts.sources.begin(), opts.sources.end(), id) == opts.sources.end()) targets.push_back(id);
			if (targets.empty()) throw std::invalid_argument("limited-source mode leaves no target domain");
			jobs.push_back({arm, c, opts.sources, targets});
			continue;
		}
		const std::vector<std::string> holdouts = opts.holdouts.empty() ? ids : opts.holdouts;
		for (const std::string& h : holdouts) {
			require(h);
			std::vector<std::string> train;
			for (const std::string& id : ids)
				if (id != h) train.push_back(id);
			jobs.push_back({arm, c, train, {h}});
		}
	}
	return jobs;
}

std::vector<RunRecord> execute(const Job& job, const Dataset& data, const ExperimentOptions& opts) {
	const std::vector<SyntheticSample> train_set =
	    select(data, std::set<std::string>(job.train_domains.begin(), job.train_domains.end()));
	const std::vector<SyntheticSample> first_target = select(data, {job.eval_domains.front()});
	const std::vector<SyntheticSample> monitor = balanced_subset(first_target, opts.monitor_limit);

	TrainOptions topts;
	topts.monitor = monitor;
	if (!opts.out_dir.empty()) {
		std::string arm_dir = job.arm;
		std::replace(arm_dir.begin(), arm_dir.end(), '/', '_');
		topts.out_dir = opts.out_dir / arm_dir / join(job.eval_domains) / ("s" + std::to_string(job.cfg.seed));
	}
	const auto t0 = std::chrono::steady_clock::now();
	const Checkpoint ckpt = train(job.cfg, train_set, topts);
	const Model model = restore_model(ckpt);

	std::vector<RunRecord> out;
	for (const std::string& target : job.eval_domains) {
		const std::vector<SyntheticSample> test = select(data, {target});
		const ScoreSet scores = score_samples(model, test, job.cfg.dkg);
		out.push_back({job.arm, join(job.train_domains), target, job.cfg.seed, auc(scores), eer_hter(scores),
		               roc_curve(scores), ckpt.history});
	}
	const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
	for (RunRecord& r : out) r.seconds = seconds;
	return out;
}

Report run_jobs(const std::vector<Job>& jobs, const Dataset& data, const ExperimentOptions& opts) {
	std::vector<std::vector<RunRecord>> results(jobs.size());
	std::vector<std::exception_ptr> errors(jobs.size());
	std::atomic<std::size_t> next{0};
	std::mutex log_mu;
	auto worker = [&] {
		for (std::size_t i = next++; i < jobs.size(); i = next++) {
			try {
				results[i] = execute(jobs[i], data, opts);
				if (opts.progress) {
					std::lock_guard lock(log_mu);
					for (const RunRecord& r : results[i]) {
						char line[256];
						std::snprintf(line, sizeof line, "%s  train=%s  test=%s  seed=%llu  auc=%.4f  hter=%.4f", r.arm.c_str(),
						              r.train_domains.c_str(), r.holdout.c_str(), static_cast<unsigned long long>(r.seed),
						              r.auc, r.eer.hter);
						opts.progress(line);
					}
				}
			} catch (...) {
				errors[i] = std::current_exception();
			}
		}
	};
	const std::size_t n = std::min(thread_budget(opts.threads), jobs.size());
	if (n <= 1) {
		worker();
	} else {
		std::vector<std::thread> pool;
		for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
		for (std::thread& t : pool) t.join();
	}
	for (const std::exception_ptr& e : errors)
		if (e) std::rethrow_exception(e);
	Report r;
	for (auto& v : results)
		for (RunRecord& rec : v) r.runs.push_back(std::move(rec));
	return r;
}

}  // namespace

Report run_loo(const TrainConfig& cfg, const Dataset& data, const ExperimentOptions& opts, const std::string& arm) {
	return run_jobs(protocol_jobs(cfg, data, opts, arm), data, opts);
}

Report run_ablation(const TrainConfig& base, const std::vector<Arm>& arms, const Dataset& data,
                    const ExperimentOptions& opts) {
	std::vector<Job> jobs;
	for (const Arm& a : arms) {
		const TrainConfig cfg = train_config_from_json(a.delta, base);
		cfg.validate();
		for (Job& j : protocol_jobs(cfg, data, opts, a.name)) jobs.push_back(std::move(j));
	}
	return run_jobs(jobs, data, opts);
}

// ---- outputs -------------------------------------------------------------------------------

namespace {

std::string fmt(double v, int prec = 6) {
	if (std::isnan(v)) return "nan";
	char buf[64];
	std::snprintf(buf, sizeof buf, "%.*f", prec, v);
	return buf;
}

std::string csv_field(const std::string& s) {
	if (s.find_first_of(",\"\n") == std::string::npos) return s;
	std::string out = "\"";
	for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
	return out + "\"";
}

std::string xml_escape(const std::string& s) {
	std::string out;
	for (char c : s) {
		switch (c) {
			case '&': out += "&amp;"; break;
			case '<': out += "&lt;"; break;
			case '>': out += "&gt;"; break;
			case '"': out += "&quot;"; break;
			default: out += c;
		}
	}
	return out;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
	std::ofstream out(p, std::ios::binary | std::ios::trunc);
	if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
	out << text;
	if (!out) throw std::runtime_error("write failed for " + p.string());
}

std::string file_stem(std::string arm) {
	for (char& c : arm)
		if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.' && c != '+') c = '_';
	return arm;
}

}  // namespace

std::string metrics_csv(const Report& r) {
	std::string out = "arm,train_domains,holdout,seed,auc,hter,eer,threshold\n";
	for (const RunRecord& run : r.runs)
		out += csv_field(run.arm) + "," + csv_field(run.train_domains) + "," + csv_field(run.holdout) + "," +
		       std::to_string(run.seed) + "," + fmt(run.auc) + "," + fmt(run.eer.hter) + "," + fmt(run.eer.eer) + "," +
		       fmt(run.eer.threshold) + "\n";
	for (const ArmMean& m : arm_means(r))
		out += csv_field(m.arm) + ",,mean,mean," + fmt(m.auc) + "," + fmt(m.hter) + "," + fmt(m.eer) + ",\n";
	return out;
}

json metrics_json(const Report& r) {
	json runs = json::array();
	for (const RunRecord& run : r.runs) {
		json roc = json::array();
		for (const RocPoint& p : run.roc) roc.push_back({p.fpr, p.tpr});
		json hist = json::array();
		for (const EpochLog& e : run.history) hist.push_back(to_json(e));
		runs.push_back({{"arm", run.arm},
		                {"train_domains", run.train_domains},
		                {"holdout", run.holdout},
		                {"seed", run.seed},
		                {"auc", run.auc},
		                {"hter", run.eer.hter},
		                {"eer", run.eer.eer},
		                {"threshold", run.eer.threshold},
		                {"far", run.eer.far},
		                {"frr", run.eer.frr},
		                {"roc", roc},
		                {"history", hist}});
	}
	json means = json::array();
	for (const ArmMean& m : arm_means(r))
		means.push_back({{"arm", m.arm}, {"runs", m.runs}, {"auc", m.auc}, {"hter", m.hter}, {"eer", m.eer}});
	return {{"runs", runs}, {"means", means}};
}

std::string svg_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                      const std::vector<Series>& series) {
	constexpr double W = 560, H = 400, ml = 60, mr = 150, mt = 36, mb = 48;
	double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
	bool first = true;
	for (const Series& s : series)
		for (const auto& [x, y] : s.points) {
			if (!std::isfinite(x) || !std::isfinite(y)) continue;
			if (first) {
				x0 = x1 = x;
				y0 = y1 = y;
				first = false;
			}
			x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
		}
	if (x1 - x0 < 1e-12) x1 = x0 + 1;
	if (y1 - y0 < 1e-12) y1 = y0 + 1;
	auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
	auto py = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };
	static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
	                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

	std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
	s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(W, 0) + "\" height=\"" + fmt(H, 0) +
	     "\" viewBox=\"0 0 " + fmt(W, 0) + " " + fmt(H, 0) + "\">\n";
	s += "<rect x=\"0\" y=\"0\" width=\"" + fmt(W, 0) + "\" height=\"" + fmt(H, 0) + "\" fill=\"white\"/>\n";
	s += "<text x=\"" + fmt(W / 2, 1) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
	     xml_escape(title) + "</text>\n";
	s += "<g stroke=\"black\" stroke-width=\"1\">\n";
	s += "<line x1=\"" + fmt(ml, 1) + "\" y1=\"" + fmt(H - mb, 1) + "\" x2=\"" + fmt(W - mr, 1) + "\" y2=\"" +
	     fmt(H - mb, 1) + "\"/>\n";
	s += "<line x1=\"" + fmt(ml, 1) + "\" y1=\"" + fmt(mt, 1) + "\" x2=\"" + fmt(ml, 1) + "\" y2=\"" + fmt(H - mb, 1) +
	     "\"/>\n</g>\n";
	s += "<g font-family=\"sans-serif\" font-size=\"10\">\n";
	for (int t = 0; t <= 4; ++t) {
		const double fx = x0 + (x1 - x0) * t / 4, fy = y0 + (y1 - y0) * t / 4;
		s += "<text x=\"" + fmt(px(fx), 1) + "\" y=\"" + fmt(H - mb + 14, 1) + "\" text-anchor=\"middle\">" +
		     fmt(fx, 3) + "</text>\n";
		s += "<text x=\"" + fmt(ml - 4, 1) + "\" y=\"" + fmt(py(fy) + 3, 1) + "\" text-anchor=\"end\">" + fmt(fy, 3) +
		     "</text>\n";
	}
	s += "<text x=\"" + fmt((ml + W - mr) / 2, 1) + "\" y=\"" + fmt(H - 12, 1) + "\" text-anchor=\"middle\">" +
	     xml_escape(xlabel) + "</text>\n";
	s += "<text x=\"14\" y=\"" + fmt((mt + H - mb) / 2, 1) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
	     fmt((mt + H - mb) / 2, 1) + ")\">" + xml_escape(ylabel) + "</text>\n";
	s += "</g>\n";
	for (std::size_t i = 0; i < series.size(); ++i) {
		const char* color = palette[i % std::size(palette)];
		std::string pts;
		for (const auto& [x, y] : series[i].points)
			if (std::isfinite(x) && std::isfinite(y)) pts += (pts.empty() ? "" : " ") + fmt(px(x), 2) + "," + fmt(py(y), 2);
		s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
		     "\"/>\n";
		if (i < 24)
			s += "<text x=\"" + fmt(W - mr + 8, 1) + "\" y=\"" + fmt(mt + 12 + 13.0 * static_cast<double>(i), 1) +
			     "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"" + color + "\">" + xml_escape(series[i].name) +
			     "</text>\n";
	}
	s += "</svg>\n";
	return s;
}

std::string roc_svg(const std::string& title, const std::vector<const RunRecord*>& runs) {
	std::vector<Series> series;
	for (const RunRecord* r : runs) {
		Series s{r->holdout + " s" + std::to_string(r->seed), {}};
		for (const RocPoint& p : r->roc) s.points.emplace_back(p.fpr, p.tpr);
		series.push_back(std::move(s));
	}
	return svg_chart(title, "false accept rate", "true accept rate", series);
}

std::string loss_svg(const std::string& title, const std::vector<EpochLog>& history) {
	Series total{"total", {}}, cls{"cls", {}}, dep{"dep", {}}, aiaw{"aiaw", {}};
	for (const EpochLog& e : history) {
		const double x = static_cast<double>(e.epoch);
		total.points.emplace_back(x, e.total);
		cls.points.emplace_back(x, e.cls);
		dep.points.emplace_back(x, e.dep);
		aiaw.points.emplace_back(x, e.aiaw);
	}
	return svg_chart(title, "epoch", "loss", {total, cls, dep, aiaw});
}

std::string loss_svg(const std::string& title, const std::vector<const RunRecord*>& runs) {
	std::vector<Series> series;
	for (const RunRecord* r : runs) {
		Series s{r->holdout + " s" + std::to_string(r->seed), {}};
		for (const EpochLog& e : r->history) s.points.emplace_back(static_cast<double>(e.epoch), e.total);
		series.push_back(std::move(s));
	}
	return svg_chart(title, "epoch", "total loss", series);
}

void emit_outputs(const Report& r, const std::filesystem::path& out_dir) {
	std::filesystem::create_directories(out_dir);
	write_text(out_dir / "metrics.csv", metrics_csv(r));
	write_text(out_dir / "metrics.json", metrics_json(r).dump(1) + "\n");
	std::map<std::string, std::vector<const RunRecord*>> by_arm;
	std::vector<std::string> order;
	for (const RunRecord& run : r.runs) {
		if (!by_arm.count(run.arm)) order.push_back(run.arm);
		by_arm[run.arm].push_back(&run);
	}
	for (const std::string& arm : order) {
		write_text(out_dir / ("roc_" + file_stem(arm) + ".svg"), roc_svg("ROC: " + arm, by_arm[arm]));
		write_text(out_dir / ("loss_" + file_stem(arm) + ".svg"), loss_svg("Training loss: " + arm, by_arm[arm]));
	}
}

}  // namespace iadg
