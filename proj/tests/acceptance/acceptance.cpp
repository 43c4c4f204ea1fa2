// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include <CLI11.hpp>

#include "helpers.hpp"
#include "iadg/experiments.hpp"
#include "iadg/gradsuite.hpp"
#include "iadg/whitening.hpp"
#include "oracles.hpp"

using namespace iadg;
using namespace iadg::test;

namespace {

struct Outcome {
	bool pass = true;
	std::string detail;
};

// Collects the first few failure messages of a criterion.
class Checker {
public:
	void require(bool ok, const std::string& what) {
		if (ok) return;
		if (failures_++ < 5) notes_ += (notes_.empty() ? "" : "; ") + what;
	}
	bool ok() const { return failures_ == 0; }
	std::string failures() const {
		return std::to_string(failures_) + " failed check(s): " + notes_ + (failures_ > 5 ? "; ..." : "");
	}

private:
	std::size_t failures_ = 0;
	std::string notes_;
};

std::string fmt(const char* f, auto... args) {
	char buf[512];
	std::snprintf(buf, sizeof buf, f, args...);
	return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
	return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const std::filesystem::path& p) {
	std::ifstream in(p, std::ios::binary);
	return {std::istreambuf_iterator<char>(in), {}};
}

void spill(const std::filesystem::path& p, const std::string& bytes) {
	std::ofstream out(p, std::ios::binary | std::ios::trunc);
	out << bytes;
}

// ---- desk profile --------------------------------------------------------------------------

// Shared by every criterion that trains.
struct Desk {
	std::size_t per_class = 100;
	std::uint64_t data_seed = 17;
	std::vector<std::uint64_t> seeds{1, 2, 3};
	TrainConfig cfg;

	Desk() {
		cfg.model.channels = {3, 8, 16, 64};
		cfg.model.image_size = 64;
		cfg.model.depth_hidden = 8;
		cfg.epochs = 30;
		cfg.batch_size = 16;
		cfg.steps_per_epoch = 4;
		cfg.lr = 1e-3;
		cfg.monitor_every = 0;
	}
	Dataset data() const {
		const auto domains = default_domains(4);
		const std::size_t d = final_spatial(cfg.model);
		return {cfg.model.image_size, d, domains,
		        generate_dataset(domains, per_class, data_seed, cfg.model.image_size, d)};
	}
};

// ---- criteria ------------------------------------------------------------------------------

Outcome gradient_integrity() {
	const auto t0 = std::chrono::steady_clock::now();
	const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
	const auto results = run_gradient_suite(seeds);
	const double secs = seconds_since(t0);
	Checker ck;
	double worst = 0;
	std::string worst_name;
	for (const GradResult& r : results) {
		ck.require(r.max_rel_err < 1e-4, fmt("%s seed %llu rel_err %.3g", r.name.c_str(),
		                                      static_cast<unsigned long long>(r.seed), r.max_rel_err));
		if (!(r.max_rel_err <= worst)) {
			worst = r.max_rel_err;
			worst_name = r.name;
		}
	}
	for (const char* composed : {"L_cls", "L_dep", "L_aiaw"})
		ck.require(std::any_of(results.begin(), results.end(), [&](const GradResult& r) { return r.name == composed; }),
		           std::string("missing case ") + composed);
	ck.require(secs < 60.0, fmt("runtime %.1f s", secs));
	const std::string summary = fmt("%zu cases x %zu seeds, worst %.3g (%s), %.1f s", results.size() / seeds.size(),
	                                seeds.size(), worst, worst_name.c_str(), secs);
	return {ck.ok(), ck.ok() ? summary : summary + "; " + ck.failures()};
}

Outcome covariance_suite() {
	Rng rng(1001);
	Checker ck;
	double worst_sym = 0, worst_diag = 0, min_eig = INFINITY;
	for (int trial = 0; trial < 100; ++trial) {
		// Unit-scale features: IN's eps moves the diagonal by about eps / variance.
		const std::size_t c = 2 + rng.below(63), h = 4 + rng.below(9), w = 4 + rng.below(9);
		const Tensor f = randn({c, h, w}, rng, rng.uniform(0.5, 3.0), rng.uniform(-3, 3));
		const Tensor s = covariance(f);
		Eigen::MatrixXd m(c, c);
		for (std::size_t i = 0; i < c; ++i) {
			worst_diag = std::max(worst_diag, std::abs(s[i * c + i] - 1.0));
			for (std::size_t j = 0; j < c; ++j) {
				worst_sym = std::max(worst_sym, std::abs(s[i * c + j] - s[j * c + i]));
				m(static_cast<long>(i), static_cast<long>(j)) = s[i * c + j];
			}
		}
		min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly)
		                                .eigenvalues()
		                                .minCoeff());

		const std::vector<std::pair<Tensor, Tensor>> same{{s, s}};
		const Tensor v0 = variance_matrix(same);
		ck.require(std::all_of(v0.data().begin(), v0.data().end(), [](double x) { return x == 0.0; }),
		           "V(S,S) != 0");

		const Tensor v = randu({c, c}, rng, 0.0, 1.0);
		const double k = trial % 10 == 0 ? 1.0 : rng.uniform(0.0, 0.5);
		const SelectiveMask mask = selective_mask(v, k);
		const std::size_t u = c * (c - 1) / 2;
		const auto expect = static_cast<std::size_t>(std::floor(static_cast<double>(u) * k));
		std::size_t pop = 0;
		bool upper = true;
		for (std::size_t i = 0; i < c; ++i)
			for (std::size_t j = 0; j < c; ++j)
				if (mask.m[i * c + j] != 0.0) {
					++pop;
					upper &= j > i && mask.m[i * c + j] == 1.0;
				}
		ck.require(pop == expect, fmt("popcount %zu, expected %zu (C=%zu k=%g)", pop, expect, c, k));
		ck.require(upper, "mask entry outside the strict upper triangle");
	}
	ck.require(worst_sym < 1e-9, fmt("asymmetry %.3g", worst_sym));
	ck.require(min_eig >= -1e-8, fmt("eigmin %.3g", min_eig));
	ck.require(worst_diag <= 1e-3, fmt("diagonal error %.3g", worst_diag));
	const std::string summary =
	    fmt("100 features: asym %.2g, eigmin %.2g, diag err %.2g; V(S,S)=0 and popcounts exact", worst_sym, min_eig,
	        worst_diag);
	return {ck.ok(), ck.ok() ? summary : ck.failures()};
}

Outcome csa_suite() {
	Rng rng(2002);
	Checker ck;

	double identity = 0, target = 0;
	for (int trial = 0; trial < 50; ++trial) {
		const std::size_t n = 1 + rng.below(4), c = 1 + rng.below(8), hw = 2 + rng.below(9);
		const Tensor x = randn({n, c, hw, hw}, rng, rng.uniform(0.2, 4.0), rng.uniform(-3, 3));
		const auto st = compute_style_stats(x, std::vector<ClassLabel>(n, ClassLabel::real));
		Tensor mu({n, c}), sigma({n, c});
		for (std::size_t i = 0; i < n; ++i)
			for (std::size_t k = 0; k < c; ++k) {
				mu[i * c + k] = st[i].mu[k];
				sigma[i * c + k] = st[i].sigma[k];
			}
		Tape tape(false);
		identity = std::max(identity,
		                    max_abs_diff(x, reassemble(tape.constant(x), tape.constant(mu), tape.constant(sigma)).value()));

		const Tensor tmu = randn({n, c}, rng, 2.0), tsig = randu({n, c}, rng, 0.05, 3.0);
		const Tensor y = reassemble(tape.constant(x), tape.constant(tmu), tape.constant(tsig)).value();
		const auto got = compute_style_stats(y, std::vector<ClassLabel>(n, ClassLabel::real), 0.0);
		for (std::size_t i = 0; i < n; ++i)
			for (std::size_t k = 0; k < c; ++k)
				target = std::max({target, std::abs(got[i].mu[k] - tmu[i * c + k]),
				                   std::abs(got[i].sigma[k] - tsig[i * c + k])});
	}
	ck.require(identity <= 1e-12, fmt("AdaIN identity error %.3g", identity));
	ck.require(target <= 1e-6, fmt("target stats error %.3g", target));

	// Real styles around mu=+1, spoof around mu=-1: an own-class convex mix keeps the sign.
	std::vector<StyleStats> pool(80);
	for (std::size_t i = 0; i < pool.size(); ++i) {
		pool[i].label = i % 2 ? ClassLabel::spoof : ClassLabel::real;
		for (int k = 0; k < 6; ++k) {
			pool[i].mu.push_back(rng.normal(pool[i].label == ClassLabel::real ? 1.0 : -1.0, 0.2));
			pool[i].sigma.push_back(rng.uniform(0.5, 1.5));
		}
	}
	const StyleBank bank = build_bank(pool, 16, 1);
	std::size_t preserved = 0, total = 0;
	while (total < 10000) {
		std::vector<ClassLabel> labels(16);
		for (ClassLabel& l : labels) l = rng.below(2) ? ClassLabel::real : ClassLabel::spoof;
		const StyleTargets t = csa_targets(labels, bank, rng);
		for (std::size_t i = 0; i < labels.size(); ++i, ++total) {
			bool ok = t.style_class[i] == labels[i];
			for (std::size_t k = 0; k < 6; ++k) ok &= (labels[i] == ClassLabel::real) == (t.mu[i * 6 + k] > 0.0);
			preserved += ok;
		}
	}
	ck.require(preserved == total, fmt("labels preserved in %zu of %zu", preserved, total));

	std::size_t fps_cases = 0, fps_match = 0;
	for (int trial = 0; trial < 400; ++trial) {
		const std::size_t n = 1 + rng.below(64), dim = 1 + rng.below(8), L = 1 + rng.below(n + 4);
		std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
		const bool grid = trial % 2 == 0;
		for (auto& p : pts)
			for (double& v : p) v = grid ? static_cast<double>(rng.below(3)) : rng.normal();
		++fps_cases;
		fps_match += fps_select(pts, L) == fps_oracle(pts, L);
	}
	ck.require(fps_match == fps_cases, fmt("fps matched the oracle on %zu of %zu", fps_match, fps_cases));

	double simplex = 0, mean_err = 0;
	bool nonneg = true;
	for (std::size_t L : {1u, 2u, 4u, 16u, 64u}) {
		std::vector<double> mean(L, 0.0);
		for (int d = 0; d < 10000; ++d) {
			const auto w = sample_weights(L, rng);
			double s = 0;
			for (std::size_t l = 0; l < L; ++l) {
				nonneg &= w[l] >= 0.0;
				s += w[l];
				mean[l] += w[l] / 10000.0;
			}
			simplex = std::max(simplex, std::abs(s - 1.0));
		}
		for (double m : mean) mean_err = std::max(mean_err, std::abs(m - 1.0 / static_cast<double>(L)));
	}
	ck.require(nonneg && simplex <= 1e-12, fmt("simplex error %.3g", simplex));
	ck.require(mean_err <= 0.02, fmt("Dirichlet mean error %.3g", mean_err));

	const std::string summary =
	    fmt("identity %.2g, target %.2g, labels %zu/%zu, fps %zu/%zu, simplex %.2g, mean err %.3f", identity, target,
	        preserved, total, fps_match, fps_cases, simplex, mean_err);
	return {ck.ok(), ck.ok() ? summary : summary + "; " + ck.failures()};
}

Outcome dkg_suite() {
	Rng rng(3003);
	Checker ck;
	std::size_t checks = 0;
	for (int trial = 0; trial < 10; ++trial) {
		ParamSet ps;
		const std::size_t c = 2 * (1 + rng.below(5));
		DkgParams d = add_dkg(ps, "dkg", c, rng);
		for (double& v : ps[d.generator.weight].data()) v = rng.normal(0, 0.3);
		for (double& v : ps[d.generator.bias].data()) v = rng.normal(0, 0.1);
		const std::size_t n = 2 + rng.below(6);
		const Tensor x = randn({n, c, 4 + rng.below(5), 4 + rng.below(5)}, rng);
		std::vector<std::size_t> perm(n);
		std::iota(perm.begin(), perm.end(), 0);
		std::shuffle(perm.begin(), perm.end(), rng);
		for (DkgMode mode : {DkgMode::full, DkgMode::static_only, DkgMode::dynamic_only}) {
			Tape tape(false);
			BoundParams p(tape, ps, false);
			const Tensor y = dkg_forward(tape.constant(x), p, d, mode).value();
			const Tensor yp = dkg_forward(tape.constant(permute_batch(x, perm)), p, d, mode).value();
			ck.require(bit_equal(yp, permute_batch(y, perm)), "block output not permutation equivariant");
			++checks;
		}
	}

	ModelConfig mc;
	mc.channels = {3, 8, 16, 32};
	mc.image_size = 32;
	mc.depth_hidden = 8;
	for (std::uint64_t seed : {1, 2, 3}) {
		Model m = Model::create(mc, seed);
		const Tensor images = randu({6, 3, 32, 32}, rng, 0.0, 1.0);
		// Fresh generators are zero: the full model equals the static-only arm.
		ck.require(predict(m, images, DkgMode::full) == predict(m, images, DkgMode::static_only),
		           "zero generator differs from static-only");
		++checks;
		// With live generators, predictions follow a batch permutation exactly.
		for (std::size_t i = 0; i < m.params.size(); ++i)
			if (m.params.name(i).find("generator") != std::string::npos)
				for (double& v : m.params.values()[i].data()) v = rng.normal(0, 0.05);
		const std::vector<std::size_t> perm{5, 2, 0, 4, 1, 3};
		const auto a = predict(m, images, DkgMode::full), b = predict(m, permute_batch(images, perm), DkgMode::full);
		for (std::size_t i = 0; i < perm.size(); ++i) ck.require(b[i] == a[perm[i]], "model not permutation equivariant");
		++checks;
		// Zeroing the generators again restores the static-only outputs bit for bit.
		for (std::size_t i = 0; i < m.params.size(); ++i)
			if (m.params.name(i).find("generator") != std::string::npos) m.params.values()[i].fill(0.0);
		ck.require(predict(m, images, DkgMode::full) == predict(m, images, DkgMode::static_only),
		           "re-zeroed generator differs from static-only");
		++checks;
	}
	return {ck.ok(), ck.ok() ? fmt("%zu bitwise comparisons exact", checks) : ck.failures()};
}

Outcome metrics_suite() {
	Rng rng(4004);
	Checker ck;
	double hter_err = 0;
	std::size_t exact = 0, invariant = 0;
	for (int trial = 0; trial < 100; ++trial) {
		const ScoreSet s = random_score_set(rng);
		exact += auc(s) == auc_oracle(s);
		hter_err = std::max(hter_err, std::abs(eer_hter(s).hter - eer_oracle(s).hter));
		ScoreSet t = s;
		const double a = rng.uniform(0.5, 3.0), b = rng.uniform(-2, 2);
		for (double& v : t.scores) v = std::exp(a * v) + b;
		invariant += auc(t) == auc(s);
	}
	ck.require(exact == 100, fmt("auc exact on %zu of 100", exact));
	ck.require(hter_err <= 1e-12, fmt("hter error %.3g", hter_err));
	ck.require(invariant == 100, fmt("auc invariant on %zu of 100", invariant));
	const std::string summary =
	    fmt("auc exact %zu/100, hter max err %.2g, monotone invariance %zu/100", exact, hter_err, invariant);
	return {ck.ok(), ck.ok() ? summary : ck.failures()};
}

struct TrainingOutcomes {
	Outcome whitening;
	Outcome ablation;
};

TrainingOutcomes training_criteria(const Desk& desk, const std::filesystem::path& out, std::size_t threads) {
	const Dataset data = desk.data();
	ExperimentOptions o;
	o.seeds = desk.seeds;
	o.threads = threads;
	o.progress = [](const std::string& line) {
		std::fprintf(stderr, "  %s\n", line.c_str());
		std::fflush(stderr);
	};
	const auto arms = component_arms();
	const Report r = run_ablation(desk.cfg, arms, data, o);
	emit_outputs(r, out / "ablation");

	std::printf("  %-14s %-10s %-8s %-5s %-7s %-7s %-9s %-9s %-6s\n", "arm", "train", "holdout", "seed", "auc", "hter",
	            "heldM@1", "heldM@end", "sec");
	double max_secs = 0;
	for (const RunRecord& run : r.runs) {
		max_secs = std::max(max_secs, run.seconds);
		std::printf("  %-14s %-10s %-8s %-5llu %-7.4f %-7.4f %-9.4f %-9.4f %-6.0f\n", run.arm.c_str(),
		            run.train_domains.c_str(), run.holdout.c_str(), static_cast<unsigned long long>(run.seed), run.auc,
		            run.eer.hter, run.history.front().heldout_masked_abs, run.history.back().heldout_masked_abs,
		            run.seconds);
	}
	const auto means = arm_means(r);
	for (const ArmMean& m : means)
		std::printf("  mean %-14s runs %zu  auc %.4f  hter %.4f  eer %.4f\n", m.arm.c_str(), m.runs, m.auc, m.hter, m.eer);
	std::fflush(stdout);

	TrainingOutcomes t;
	const std::string full = arms.back().name;
	std::size_t lower = 0, runs = 0;
	for (const RunRecord& run : r.runs)
		if (run.arm == full) {
			++runs;
			lower += run.history.back().heldout_masked_abs < run.history.front().heldout_masked_abs;
		}
	const bool fast = max_secs < 600.0;
	t.whitening.pass = runs == 12 && lower >= 10 && fast;
	t.whitening.detail = fmt("held-out masked |S| lower at epoch %zu than at epoch 1 in %zu of %zu runs (need >= 10); "
	                         "slowest run %.0f s (limit 600)",
	                         desk.cfg.epochs, lower, runs, max_secs);

	double base = NAN, iadg = NAN;
	for (const ArmMean& m : means) {
		if (m.arm == arms.front().name) base = m.auc;
		if (m.arm == full) iadg = m.auc;
	}
	t.ablation.pass = means.size() == arms.size() && iadg >= base + 0.02;
	t.ablation.detail = fmt("mean AUC %s %.4f vs %s %.4f (delta %+.2f points, need >= +2.00); %zu arm tables in %s",
	                        full.c_str(), iadg, arms.front().name.c_str(), base, 100 * (iadg - base), means.size(),
	                        (out / "ablation").string().c_str());
	return t;
}

Outcome determinism(const Desk& desk, const std::filesystem::path& out) {
	const Dataset data = desk.data();
	std::vector<SyntheticSample> train_set;
	for (const SyntheticSample& s : data.samples)
		if (s.domain_id != "D3") train_set.push_back(s);
	TrainConfig cfg = desk.cfg;
	cfg.epochs = 4;
	Checker ck;

	TrainOptions a, b, c;
	a.out_dir = out / "det_a";
	b.out_dir = out / "det_b";
	c.out_dir = out / "det_resume";
	const Checkpoint ca = train(cfg, train_set, a);
	const Checkpoint cb = train(cfg, train_set, b);
	ck.require(slurp(a.out_dir / "final.ckpt") == slurp(b.out_dir / "final.ckpt"), "repeat run checkpoint bytes differ");
	for (std::size_t i = 0; i < ca.params.size(); ++i)
		ck.require(bit_equal(ca.params[i], cb.params[i]), "repeat run tensor " + ca.names[i] + " differs");

	TrainConfig half = cfg;
	half.epochs = 2;
	train(half, train_set, c);
	const Checkpoint resumed = train(cfg, train_set, load_checkpoint(c.out_dir / "last.ckpt"), c);
	ck.require(slurp(a.out_dir / "final.ckpt") == slurp(c.out_dir / "final.ckpt"), "resumed checkpoint bytes differ");
	for (std::size_t i = 0; i < ca.params.size(); ++i) {
		ck.require(bit_equal(ca.params[i], resumed.params[i]), "resumed tensor " + ca.names[i] + " differs");
		ck.require(bit_equal(ca.adam.m[i], resumed.adam.m[i]) && bit_equal(ca.adam.v[i], resumed.adam.v[i]),
		           "resumed moments of " + ca.names[i] + " differ");
	}
	ck.require(ca.rng.key == resumed.rng.key && ca.rng.counter == resumed.rng.counter, "resumed rng state differs");
	const std::string summary = fmt("%zu tensors over %zu epochs: repeat and 2+2 resume are bit-identical to the "
	                                "straight run (checkpoint bytes equal)",
	                                ca.params.size(), cfg.epochs);
	return {ck.ok(), ck.ok() ? summary : ck.failures()};
}

// Every prefix cut must be rejected with a format error.
template <typename Load>
std::size_t truncations_rejected(const std::string& bytes, const std::filesystem::path& p, Load load,
                                 std::size_t& tried) {
	std::vector<std::size_t> cuts{0, 1, 4, 8, 9, 10, 13, 14, 100, bytes.size() / 2, bytes.size() - 8, bytes.size() - 1};
	std::size_t rejected = 0;
	for (std::size_t cut : cuts) {
		if (cut >= bytes.size()) continue;
		++tried;
		spill(p, bytes.substr(0, cut));
		try {
			load(p);
		} catch (const FormatError&) {
			++rejected;
		}
	}
	return rejected;
}

Outcome data_integrity(const Desk& desk, const std::filesystem::path& out) {
	Checker ck;
	const Dataset ds = desk.data();
	const auto dpath = out / "integrity.iadg";
	write_dataset(dpath, ds);
	const Dataset back = read_dataset(dpath);
	bool same = back.image_size == ds.image_size && back.depth_size == ds.depth_size &&
	            back.samples.size() == ds.samples.size() && back.domains.size() == ds.domains.size();
	for (std::size_t i = 0; same && i < ds.samples.size(); ++i) {
		const SyntheticSample &a = ds.samples[i], &b = back.samples[i];
		same = bit_equal(a.image, b.image) && bit_equal(a.y_dep, b.y_dep) && a.y_cls == b.y_cls &&
		       a.domain_id == b.domain_id && a.seed == b.seed;
	}
	ck.require(same, "dataset round trip differs");
	std::string bytes = slurp(dpath);
	std::size_t tried = 0;
	const std::size_t data_rejected = truncations_rejected(bytes, out / "cut.iadg", read_dataset, tried);

	TrainConfig cfg = desk.cfg;
	cfg.epochs = 1;
	std::vector<SyntheticSample> few(ds.samples.begin(), ds.samples.begin() + 40);
	few.insert(few.end(), ds.samples.end() - 40, ds.samples.end());
	Checkpoint ck1 = train(cfg, few);
	const auto cpath = out / "integrity.ckpt";
	save_checkpoint(cpath, ck1);
	const Checkpoint ck2 = load_checkpoint(cpath);
	bool csame = ck2.params.size() == ck1.params.size() && ck2.names == ck1.names && ck2.epoch == ck1.epoch &&
	             ck2.adam.t == ck1.adam.t && ck2.config_hash == ck1.config_hash &&
	             bit_equal(ck2.bank.real.mu, ck1.bank.real.mu) && bit_equal(ck2.bank.spoof.sigma, ck1.bank.spoof.sigma);
	for (std::size_t i = 0; csame && i < ck1.params.size(); ++i)
		csame = bit_equal(ck1.params[i], ck2.params[i]) && bit_equal(ck1.adam.m[i], ck2.adam.m[i]) &&
		        bit_equal(ck1.adam.v[i], ck2.adam.v[i]);
	ck.require(csame, "checkpoint round trip differs");
	save_checkpoint(out / "integrity2.ckpt", ck2);
	ck.require(slurp(cpath) == slurp(out / "integrity2.ckpt"), "checkpoint re-save changes bytes");
	const std::string cbytes = slurp(cpath);
	const std::size_t ckpt_rejected = truncations_rejected(cbytes, out / "cut.ckpt", load_checkpoint, tried);

	ck.require(data_rejected + ckpt_rejected == tried,
	           fmt("%zu of %zu truncated files rejected", data_rejected + ckpt_rejected, tried));
	const std::string summary = fmt("dataset (%zu samples) and checkpoint (%zu tensors) round-trip bit-exactly; %zu "
	                                "of %zu truncated files rejected",
	                                ds.samples.size(), ck1.params.size(), data_rejected + ckpt_rejected, tried);
	return {ck.ok(), ck.ok() ? summary : ck.failures()};
}

}  // namespace

int main(int argc, char** argv) {
	CLI::App app{"Acceptance checks: one PASS/FAIL line per criterion"};
	std::string only;
	std::filesystem::path out = std::filesystem::temp_directory_path() / "iadg_acceptance";
	std::size_t threads = 1;
	app.add_option("--only", only, "Comma-separated criteria (default: all)");
	app.add_option("--out", out, "Directory for ablation tables and scratch files");
	app.add_option("--threads", threads, "Concurrent training runs (0: IADG_THREADS or hardware)");
	CLI11_PARSE(app, argc, argv);
	std::filesystem::remove_all(out);
	std::filesystem::create_directories(out);

	std::vector<std::string> wanted;
	std::stringstream ss(only);
	for (std::string item; std::getline(ss, item, ',');)
		if (!item.empty()) wanted.push_back(item);
	auto enabled = [&](const std::string& name) {
		return wanted.empty() || std::find(wanted.begin(), wanted.end(), name) != wanted.end();
	};

	const Desk desk;
	bool all_pass = true;
	auto report = [&](const std::string& name, const Outcome& o, double secs) {
		all_pass &= o.pass;
		std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
		std::fflush(stdout);
	};
	auto run = [&](const std::string& name, const std::function<Outcome()>& f) {
		if (!enabled(name)) return;
		const auto t0 = std::chrono::steady_clock::now();
		Outcome o;
		try {
			o = f();
		} catch (const std::exception& e) {
			o = {false, std::string("exception: ") + e.what()};
		}
		report(name, o, seconds_since(t0));
	};

	run("gradient-integrity", gradient_integrity);
	run("covariance-suite", covariance_suite);
	run("csa-suite", csa_suite);
	run("dkg-suite", dkg_suite);
	run("metrics-oracle", metrics_suite);
	if (enabled("whitening-effect") || enabled("ablation-trend")) {
		const auto t0 = std::chrono::steady_clock::now();
		TrainingOutcomes t;
		try {
			t = training_criteria(desk, out, threads);
		} catch (const std::exception& e) {
			t.whitening = t.ablation = {false, std::string("exception: ") + e.what()};
		}
		const double secs = seconds_since(t0);
		if (enabled("whitening-effect")) report("whitening-effect", t.whitening, secs);
		if (enabled("ablation-trend")) report("ablation-trend", t.ablation, secs);
	}
	run("determinism", [&] { return determinism(desk, out); });
	run("data-integrity", [&] { return data_integrity(desk, out); });
	return all_pass ? 0 : 1;
}
