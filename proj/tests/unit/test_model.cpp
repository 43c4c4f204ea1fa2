#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "oracles.hpp"
#include "iadg/heads.hpp"
#include "iadg/model.hpp"
#include "iadg/style.hpp"
#include "iadg/whitening.hpp"

using namespace iadg;
using iadg::test::randn;
using iadg::test::randu;
using iadg::test::bit_equal;
using iadg::test::fps_oracle;
using iadg::test::permute_batch;

namespace {

std::vector<StyleStats> random_pool(std::size_t n, std::size_t c, Rng& rng) {
	std::vector<StyleStats> pool(n);
	for (std::size_t i = 0; i < n; ++i) {
		pool[i].label = i % 2 == 0 ? ClassLabel::real : ClassLabel::spoof;
		for (std::size_t k = 0; k < c; ++k) {
			// Real styles sit around mu=+1, spoof around mu=-1 so the classes are distinguishable.
			pool[i].mu.push_back(rng.normal(pool[i].label == ClassLabel::real ? 1.0 : -1.0, 0.2));
			pool[i].sigma.push_back(rng.uniform(0.5, 1.5));
		}
	}
	return pool;
}

struct ChannelStats {
	double mean, std;
};
ChannelStats channel_stats(const Tensor& x, std::size_t n, std::size_t c) {
	const std::size_t hw = x.dim(2) * x.dim(3);
	const double* p = x.ptr() + (n * x.dim(1) + c) * hw;
	double m = 0, v = 0;
	for (std::size_t i = 0; i < hw; ++i) m += p[i];
	m /= static_cast<double>(hw);
	for (std::size_t i = 0; i < hw; ++i) v += (p[i] - m) * (p[i] - m);
	return {m, std::sqrt(v / static_cast<double>(hw))};
}

}  // namespace

TEST_SUITE("dkg") {

TEST_CASE("dkg output is equivariant to batch permutation") {
	Rng rng(21);
	ParamSet ps;
	DkgParams d = add_dkg(ps, "dkg", 6, rng);
	for (double& v : ps[d.generator.weight].data()) v = rng.normal(0, 0.3);
	for (double& v : ps[d.generator.bias].data()) v = rng.normal(0, 0.1);
	const Tensor x = randn({5, 6, 7, 7}, rng);
	const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
	for (DkgMode mode : {DkgMode::full, DkgMode::static_only, DkgMode::dynamic_only}) {
		Tape tape(false);
		BoundParams p(tape, ps, false);
		const Tensor y = dkg_forward(tape.constant(x), p, d, mode).value();
		const Tensor yp = dkg_forward(tape.constant(permute_batch(x, perm)), p, d, mode).value();
		CHECK(bit_equal(yp, permute_batch(y, perm)));
	}
}

TEST_CASE("a zero generator reproduces the static-only block bit for bit") {
	Rng rng(22);
	ParamSet ps;
	DkgParams d = add_dkg(ps, "dkg", 8, rng);
	CHECK(std::all_of(ps[d.generator.weight].data().begin(), ps[d.generator.weight].data().end(),
	                  [](double v) { return v == 0.0; }));
	const Tensor x = randn({3, 8, 6, 6}, rng);
	Tape tape(false);
	BoundParams p(tape, ps, false);
	CHECK(bit_equal(dkg_forward(tape.constant(x), p, d, DkgMode::full).value(),
	                dkg_forward(tape.constant(x), p, d, DkgMode::static_only).value()));
}

TEST_CASE("dkg kernels depend on each instance") {
	Rng rng(23);
	ParamSet ps;
	DkgParams d = add_dkg(ps, "dkg", 4, rng);
	for (double& v : ps[d.generator.weight].data()) v = rng.normal(0, 0.3);
	Tape tape(false);
	BoundParams p(tape, ps, false);
	const Tensor k = generate_kernels(tape.constant(randn({2, 2, 5, 5}, rng)), p, d).value();
	CHECK(k.shape() == Shape{2, 2, 3, 3});
	bool differs = false;
	for (std::size_t i = 0; i < 18; ++i) differs |= k[i] != k[18 + i];
	CHECK(differs);
}

TEST_CASE("dkg rejects odd channel counts") {
	Rng rng(1);
	ParamSet ps;
	CHECK_THROWS_AS(add_dkg(ps, "dkg", 5, rng), std::invalid_argument);
	Tape tape(false);
	CHECK_THROWS_AS(split_channels(tape.constant(Tensor({1, 3, 2, 2}))), std::invalid_argument);
}

}  // TEST_SUITE

TEST_SUITE("style") {

TEST_CASE("style stats match a direct computation") {
	Rng rng(31);
	const Tensor x = randn({3, 4, 5, 5}, rng, 2.0, 0.5);
	const std::vector<ClassLabel> labels{ClassLabel::real, ClassLabel::spoof, ClassLabel::real};
	const auto st = compute_style_stats(x, labels, 0.0);
	for (std::size_t n = 0; n < 3; ++n) {
		CHECK(st[n].label == labels[n]);
		for (std::size_t c = 0; c < 4; ++c) {
			const ChannelStats cs = channel_stats(x, n, c);
			CHECK(st[n].mu[c] == doctest::Approx(cs.mean).epsilon(1e-13));
			CHECK(st[n].sigma[c] == doctest::Approx(cs.std).epsilon(1e-13));
		}
	}
}

TEST_CASE("reassembling with the input's own statistics is the identity") {
	Rng rng(32);
	for (int trial = 0; trial < 20; ++trial) {
		const Tensor x = randn({2, 5, 6, 6}, rng, rng.uniform(0.2, 3.0), rng.uniform(-2.0, 2.0));
		const std::vector<ClassLabel> labels(2, ClassLabel::real);
		const auto st = compute_style_stats(x, labels);
		Tensor mu({2, 5}), sigma({2, 5});
		for (std::size_t n = 0; n < 2; ++n)
			for (std::size_t c = 0; c < 5; ++c) {
				mu[n * 5 + c] = st[n].mu[c];
				sigma[n * 5 + c] = st[n].sigma[c];
			}
		Tape tape(false);
		const Tensor y = reassemble(tape.constant(x), tape.constant(mu), tape.constant(sigma)).value();
		CHECK(max_abs_diff(x, y) < 1e-12);
	}
}

TEST_CASE("reassembled features carry the target statistics") {
	Rng rng(33);
	for (int trial = 0; trial < 20; ++trial) {
		const Tensor x = randn({3, 4, 8, 8}, rng, rng.uniform(0.1, 4.0), rng.uniform(-3.0, 3.0));
		const Tensor mu = randn({3, 4}, rng, 2.0), sigma = randu({3, 4}, rng, 0.05, 3.0);
		Tape tape(false);
		const Tensor y = reassemble(tape.constant(x), tape.constant(mu), tape.constant(sigma)).value();
		for (std::size_t n = 0; n < 3; ++n)
			for (std::size_t c = 0; c < 4; ++c) {
				const ChannelStats cs = channel_stats(y, n, c);
				CHECK(std::abs(cs.mean - mu[n * 4 + c]) < 1e-6);
				CHECK(std::abs(cs.std - sigma[n * 4 + c]) < 1e-6);
			}
	}
}

TEST_CASE("fps matches the brute-force greedy oracle") {
	Rng rng(34);
	for (int trial = 0; trial < 300; ++trial) {
		const std::size_t n = 1 + rng.below(64), dim = 1 + rng.below(6), L = 1 + rng.below(n + 4);
		std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
		// Half the trials use a coarse integer grid, which produces many exact ties.
		const bool grid = trial % 2 == 0;
		for (auto& p : pts)
			for (double& v : p) v = grid ? static_cast<double>(rng.below(3)) : rng.normal();
		CAPTURE(n);
		CAPTURE(L);
		CHECK(fps_select(pts, L) == fps_oracle(pts, L));
	}
}

TEST_CASE("fps returns every index when L covers the pool") {
	const std::vector<std::vector<double>> pts{{0.0}, {1.0}, {2.0}};
	CHECK(fps_select(pts, 3) == std::vector<std::size_t>{0, 1, 2});
	CHECK(fps_select(pts, 10) == std::vector<std::size_t>{0, 1, 2});
	CHECK_THROWS_AS(fps_select({}, 2), std::invalid_argument);
	CHECK_THROWS_AS(fps_select(pts, 0), std::invalid_argument);
}

TEST_CASE("dirichlet weights lie on the simplex with mean 1/L") {
	Rng rng(35);
	for (std::size_t L : {1u, 2u, 5u, 16u}) {
		std::vector<double> mean(L, 0.0);
		const int draws = 10000;
		for (int i = 0; i < draws; ++i) {
			const auto w = sample_weights(L, rng);
			REQUIRE(w.size() == L);
			double s = 0;
			for (std::size_t l = 0; l < L; ++l) {
				CHECK(w[l] >= 0.0);
				s += w[l];
				mean[l] += w[l];
			}
			CHECK(std::abs(s - 1.0) < 1e-12);
		}
		for (double m : mean) CHECK(std::abs(m / draws - 1.0 / static_cast<double>(L)) < 0.02);
	}
}

TEST_CASE("csa assembles every style from the sample's own class") {
	Rng rng(36);
	const auto pool = random_pool(80, 6, rng);
	const StyleBank bank = build_bank(pool, 16, 1);
	REQUIRE(bank.populated());
	std::size_t checked = 0;
	while (checked < 10000) {
		std::vector<ClassLabel> labels(16);
		for (auto& l : labels) l = rng.below(2) ? ClassLabel::real : ClassLabel::spoof;
		const StyleTargets t = csa_targets(labels, bank, rng);
		for (std::size_t i = 0; i < labels.size(); ++i, ++checked) {
			REQUIRE(t.style_class[i] == labels[i]);
			// Own-class basis means are all positive for real, negative for spoof.
			for (std::size_t c = 0; c < 6; ++c)
				REQUIRE((labels[i] == ClassLabel::real) == (t.mu[i * 6 + c] > 0.0));
		}
	}
	CHECK(checked == 10000);
}

TEST_CASE("the bank keeps at most L styles per class and needs both classes") {
	Rng rng(37);
	auto pool = random_pool(10, 3, rng);
	const StyleBank bank = build_bank(pool, 16, 4);
	CHECK(bank.real.size() == 5);
	CHECK(bank.spoof.size() == 5);
	CHECK(bank.epoch_stamp == 4);
	pool.erase(std::remove_if(pool.begin(), pool.end(), [](const StyleStats& s) { return s.label == ClassLabel::spoof; }),
	           pool.end());
	CHECK_THROWS_AS(build_bank(pool, 4, 1), std::invalid_argument);
	CHECK_THROWS_AS(csa_targets(std::vector<ClassLabel>{ClassLabel::real}, StyleBank{}, rng), std::invalid_argument);
}

TEST_CASE("assemble_style is the weighted basis combination") {
	StyleBank bank;
	bank.real = {Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({2, 2}, {1, 1, 3, 5})};
	const auto [mu, sigma] = assemble_style(std::vector<double>{0.25, 0.75}, bank, ClassLabel::real);
	CHECK(mu == std::vector<double>{2.5, 3.5});
	CHECK(sigma == std::vector<double>{2.5, 4.0});
	CHECK_THROWS_AS(assemble_style(std::vector<double>{1.0}, bank, ClassLabel::real), std::invalid_argument);
}

}  // TEST_SUITE

TEST_SUITE("whitening") {

TEST_CASE("covariance of random features is symmetric, PSD and unit-diagonal") {
	Rng rng(41);
	for (int trial = 0; trial < 100; ++trial) {
		const std::size_t c = 2 + rng.below(15), h = 2 + rng.below(7), w = 2 + rng.below(7);
		const Tensor f = randn({c, h, w}, rng, rng.uniform(0.5, 3.0), rng.uniform(-1, 1));
		const Tensor s = covariance(f);
		Eigen::MatrixXd m(c, c);
		for (std::size_t i = 0; i < c; ++i)
			for (std::size_t j = 0; j < c; ++j) {
				CHECK(std::abs(s[i * c + j] - s[j * c + i]) < 1e-9);
				m(static_cast<long>(i), static_cast<long>(j)) = s[i * c + j];
			}
		for (std::size_t i = 0; i < c; ++i) CHECK(std::abs(s[i * c + i] - 1.0) < 1e-3);
		const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
		CHECK(es.eigenvalues().minCoeff() >= -1e-8);
	}
}

TEST_CASE("variance of identical covariances is exactly zero") {
	Rng rng(42);
	for (int trial = 0; trial < 100; ++trial) {
		const Tensor s = covariance(randn({6, 4, 4}, rng));
		const std::vector<std::pair<Tensor, Tensor>> pairs{{s, s}, {s, s}};
		const Tensor v = variance_matrix(pairs);
		CHECK(std::all_of(v.data().begin(), v.data().end(), [](double x) { return x == 0.0; }));
	}
}

TEST_CASE("variance matrix is the per-entry variance of the two branches") {
	const std::vector<std::pair<Tensor, Tensor>> pairs{{Tensor::from({1, 2}, {1, 0}), Tensor::from({1, 2}, {3, 0})},
	                                                   {Tensor::from({1, 2}, {0, 2}), Tensor::from({1, 2}, {0, -2})}};
	const Tensor v = variance_matrix(pairs);
	CHECK(v[0] == doctest::Approx(0.5));  // (1 + 0) / 2
	CHECK(v[1] == doctest::Approx(2.0));  // (0 + 4) / 2
}

TEST_CASE("selective mask selects floor(U·k) strictly-upper entries") {
	Rng rng(43);
	for (int trial = 0; trial < 100; ++trial) {
		const std::size_t c = 2 + rng.below(40);
		const double k = rng.uniform();
		Tensor v = randu({c, c}, rng, 0, 1);
		const SelectiveMask m = selective_mask(v, k);
		const std::size_t upper = c * (c - 1) / 2;
		CHECK(m.count() == static_cast<std::size_t>(std::floor(static_cast<double>(upper) * k)));
		std::size_t pop = 0;
		for (std::size_t i = 0; i < c; ++i)
			for (std::size_t j = 0; j < c; ++j)
				if (m.m[i * c + j] != 0.0) {
					++pop;
					CHECK(j > i);
				}
		CHECK(pop == m.count());
	}
	CHECK(mask_count(64, 0.0003) == 0);
	CHECK(mask_count(64, 0.003) == 6);
}

TEST_CASE("selective mask picks the largest variances with row-major tie order") {
	Rng rng(44);
	for (int trial = 0; trial < 100; ++trial) {
		const std::size_t c = 2 + rng.below(12);
		Tensor v({c, c});
		for (double& x : v.data()) x = static_cast<double>(rng.below(4));  // many ties
		const double k = rng.uniform();
		std::vector<std::tuple<double, std::size_t, std::size_t>> ent;
		for (std::size_t i = 0; i < c; ++i)
			for (std::size_t j = i + 1; j < c; ++j) ent.emplace_back(-v[i * c + j], i, j);
		std::sort(ent.begin(), ent.end());
		const SelectiveMask m = selective_mask(v, k);
		REQUIRE(m.count() <= ent.size());
		for (std::size_t t = 0; t < m.count(); ++t)
			CHECK(m.positions[t] == std::pair{std::get<1>(ent[t]), std::get<2>(ent[t])});
	}
}

TEST_CASE("aiaw loss equals a hand-built per-class oracle") {
	Rng rng(45);
	const std::size_t n = 6, c = 8;
	const std::vector<ClassLabel> labels{ClassLabel::real, ClassLabel::spoof, ClassLabel::real,
	                                     ClassLabel::real, ClassLabel::spoof, ClassLabel::spoof};
	const Tensor so = randn({n, c, c}, rng), sa = randn({n, c, c}, rng);
	for (WhiteningMode mode : {WhiteningMode::full_iw, WhiteningMode::symmetric, WhiteningMode::asymmetric}) {
		const WhiteningConfig cfg{mode, 0.3, 0.1};
		Tape tape(false);
		const AiawResult r = aiaw_loss(tape.constant(so), tape.constant(sa), labels, cfg);
		double expect = 0.0;
		for (ClassLabel cls : {ClassLabel::real, ClassLabel::spoof}) {
			std::vector<std::size_t> mem;
			for (std::size_t i = 0; i < n; ++i)
				if (labels[i] == cls) mem.push_back(i);
			Tensor v({c, c}, 0.0);
			for (std::size_t i : mem)
				for (std::size_t e = 0; e < c * c; ++e) {
					const double d = so[i * c * c + e] - sa[i * c * c + e];
					v[e] += d * d / 4.0 / static_cast<double>(mem.size());
				}
			const SelectiveMask m = mode == WhiteningMode::full_iw ? full_mask(c) : selective_mask(v, cfg.ratio(cls));
			CHECK(m.count() == (mode == WhiteningMode::full_iw ? c * (c - 1) / 2 : mask_count(c, cfg.ratio(cls))));
			for (std::size_t i : mem)
				for (const auto& [a, b] : m.positions)
					expect += (std::abs(so[(i * c + a) * c + b]) + std::abs(sa[(i * c + a) * c + b])) /
					          static_cast<double>(m.count() * mem.size());
		}
		CHECK(r.loss.value().item() == doctest::Approx(expect).epsilon(1e-12));
	}
}

TEST_CASE("asymmetric masks whiten more real entries than spoof entries") {
	Rng rng(46);
	const std::vector<ClassLabel> labels{ClassLabel::real, ClassLabel::spoof};
	Tape tape(false);
	const AiawResult r = aiaw_loss(tape.constant(randn({2, 16, 16}, rng)), tape.constant(randn({2, 16, 16}, rng)),
	                               labels, WhiteningConfig{WhiteningMode::asymmetric, 0.1, 0.02});
	CHECK(r.real_mask.count() == 12);
	CHECK(r.spoof_mask.count() == 2);
	CHECK_THROWS_AS((WhiteningConfig{WhiteningMode::asymmetric, 0.01, 0.02}.validate()), std::invalid_argument);
}

TEST_CASE("empty masks and missing classes contribute zero") {
	Rng rng(47);
	const std::vector<ClassLabel> labels(3, ClassLabel::real);
	Tape tape(false);
	const AiawResult r = aiaw_loss(tape.constant(randn({3, 4, 4}, rng)), tape.constant(randn({3, 4, 4}, rng)), labels,
	                               WhiteningConfig{WhiteningMode::asymmetric, 0.1, 0.0});
	CHECK(r.loss.value().item() == 0.0);
	CHECK(std::isnan(r.masked_abs_org[0]));
}

}  // TEST_SUITE

TEST_SUITE("heads") {

TEST_CASE("forward_dual composes stage 1, restyling and the later stages") {
	ModelConfig cfg;
	cfg.channels = {3, 4, 8};
	cfg.image_size = 8;
	cfg.depth_hidden = 4;
	const Model m = Model::create(cfg, 5);
	Rng rng(51);
	const Tensor images = randu({4, 3, 8, 8}, rng, 0, 1);
	const std::vector<ClassLabel> labels{ClassLabel::real, ClassLabel::spoof, ClassLabel::real, ClassLabel::spoof};
	Tape tape(false);
	BoundParams p(tape, m.params, false);
	const BranchOutputs base = extract(tape.constant(images), p, m.backbone);
	const StyleBank bank = build_bank(compute_style_stats(base.stage1_feat.value(), labels), 2, 1);

	Rng a(9), b(9);
	const DualOutputs d = forward_dual(tape.constant(images), p, m, labels, AugMode::csa, &bank, a);
	REQUIRE(d.aug.has_value());
	CHECK(d.org.final_feat.value() == base.final_feat.value());
	const StyleTargets t = csa_targets(labels, bank, b);
	const Var restyled = reassemble(base.stage1_feat, tape.constant(t.mu), tape.constant(t.sigma));
	CHECK(d.aug->stage1_feat.value() == restyled.value());
	CHECK(d.aug->final_feat.value() == run_stages(restyled, p, m.backbone, 1, DkgMode::full).value());

	const DualOutputs off = forward_dual(tape.constant(images), p, m, labels, AugMode::off, nullptr, a);
	CHECK_FALSE(off.aug.has_value());
	CHECK_THROWS_AS(forward_dual(tape.constant(images), p, m, labels, AugMode::csa, nullptr, a), std::invalid_argument);
}

TEST_CASE("predict returns sigmoid of the original-branch logits") {
	ModelConfig cfg;
	cfg.channels = {3, 4, 8};
	cfg.image_size = 8;
	cfg.depth_hidden = 4;
	const Model m = Model::create(cfg, 6);
	Rng rng(52);
	const Tensor images = randu({3, 3, 8, 8}, rng, 0, 1);
	Tape tape(false);
	BoundParams p(tape, m.params, false);
	const Tensor logits = cls_logits(extract(tape.constant(images), p, m.backbone).final_feat, p, m.heads).value();
	const auto probs = predict(m, images);
	REQUIRE(probs.size() == 3);
	for (std::size_t i = 0; i < 3; ++i) CHECK(probs[i] == doctest::Approx(1.0 / (1.0 + std::exp(-logits[i]))));
}

TEST_CASE("depth head keeps the feature resolution") {
	ModelConfig cfg;
	cfg.channels = {3, 4, 8};
	cfg.image_size = 16;
	cfg.depth_hidden = 4;
	const Model m = Model::create(cfg, 7);
	Rng rng(53);
	Tape tape(false);
	BoundParams p(tape, m.params, false);
	const Var f = extract(tape.constant(randu({2, 3, 16, 16}, rng, 0, 1)), p, m.backbone).final_feat;
	CHECK(depth_map(f, p, m.heads).shape() == Shape{2, 1, final_spatial(cfg), final_spatial(cfg)});
	CHECK(final_spatial(cfg) == 4);
}

TEST_CASE("losses match their closed forms") {
	Tape tape(false);
	const Tensor y = Tensor::from({2}, {1, 0});
	const Var lo = tape.constant(Tensor::from({2}, {0.0, 0.0}));
	CHECK(cls_loss(lo, Var{}, y).value().item() == doctest::Approx(std::log(2.0)));
	CHECK(cls_loss(lo, lo, y).value().item() == doctest::Approx(2 * std::log(2.0)));
	const Var d = tape.constant(Tensor({1, 1, 2, 2}, 0.5));
	CHECK(depth_loss(d, d, Tensor({1, 1, 2, 2}, 0.0)).value().item() == doctest::Approx(0.5));
	const Var one = tape.constant(Tensor::scalar(1.0));
	CHECK(total_loss(one, one, one, 0.1).value().item() == doctest::Approx(2.1));
	CHECK(total_loss(one, one, Var{}, 0.1).value().item() == doctest::Approx(1.1));
	CHECK_THROWS_AS(cls_loss(lo, Var{}, Tensor({3})), std::invalid_argument);
}

}  // TEST_SUITE
