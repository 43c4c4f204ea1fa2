#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "helpers.hpp"
#include "iadg/trainer.hpp"

using namespace iadg;
using iadg::test::TempDir;

namespace {

TrainConfig tiny_config() {
	TrainConfig c;
	c.model.channels = {3, 4, 8};
	c.model.image_size = 16;
	c.model.depth_hidden = 4;
	c.epochs = 2;
	c.batch_size = 4;
	c.steps_per_epoch = 2;
	c.L = 3;
	c.k_real = 0.2;
	c.k_spoof = 0.1;
	c.lr = 1e-3;
	return c;
}

const std::vector<SyntheticSample>& tiny_data() {
	static const std::vector<SyntheticSample> d = [] {
		const auto domains = default_domains(2);
		return generate_dataset(domains, 4, 3, 16, 4);
	}();
	return d;
}

bool same_tensors(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
	if (a.size() != b.size()) return false;
	for (std::size_t i = 0; i < a.size(); ++i)
		if (a[i].shape() != b[i].shape() || std::memcmp(a[i].ptr(), b[i].ptr(), 8 * a[i].size()) != 0) return false;
	return true;
}

void same_checkpoint(const Checkpoint& a, const Checkpoint& b) {
	CHECK(a.epoch == b.epoch);
	CHECK(a.names == b.names);
	CHECK(same_tensors(a.params, b.params));
	CHECK(same_tensors(a.adam.m, b.adam.m));
	CHECK(same_tensors(a.adam.v, b.adam.v));
	CHECK(a.adam.t == b.adam.t);
	CHECK(a.rng == b.rng);
	CHECK(a.bank.epoch_stamp == b.bank.epoch_stamp);
	CHECK(a.bank.real.mu == b.bank.real.mu);
	CHECK(a.bank.spoof.sigma == b.bank.spoof.sigma);
	CHECK(a.config_hash == b.config_hash);
	REQUIRE(a.history.size() == b.history.size());
	for (std::size_t i = 0; i < a.history.size(); ++i) {
		CHECK(std::memcmp(&a.history[i].total, &b.history[i].total, sizeof(double)) == 0);
		CHECK(a.history[i].bank_stamp == b.history[i].bank_stamp);
	}
}

std::string slurp(const std::filesystem::path& p) {
	std::ifstream in(p, std::ios::binary);
	return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
	std::ofstream out(p, std::ios::binary | std::ios::trunc);
	out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("adam leaves parameters alone on zero gradient while moments decay") {
	TrainConfig cfg;
	std::vector<Tensor> p{Tensor::from({2}, {1.0, -2.0})};
	AdamState st = adam_init(p);
	const std::vector<Tensor> g{Tensor::from({2}, {0.5, -0.25})};
	adam_step(p, g, st, cfg);
	const Tensor after = p[0], m = st.m[0], v = st.v[0];
	adam_step(p, std::vector<Tensor>{Tensor({2}, 0.0)}, st, cfg);
	for (std::size_t i = 0; i < 2; ++i) {
		CHECK(st.m[0][i] == doctest::Approx(0.9 * m[i]));
		CHECK(st.v[0][i] == doctest::Approx(0.999 * v[i]));
	}
	// With fresh moments the zero step moves nothing at all.
	std::vector<Tensor> q{Tensor::from({2}, {1.0, -2.0})};
	AdamState fresh = adam_init(q);
	adam_step(q, std::vector<Tensor>{Tensor({2}, 0.0)}, fresh, cfg);
	CHECK(q[0] == Tensor::from({2}, {1.0, -2.0}));
	CHECK(after != p[0]);  // the decaying first moment still moves the first run
}

TEST_CASE("adam's first step is lr·g/(|g|+eps)") {
	TrainConfig cfg;
	cfg.lr = 0.01;
	const Tensor g = Tensor::from({4}, {0.3, -2.0, 1e-9, 5.0});
	std::vector<Tensor> p{Tensor({4}, 0.0)};
	AdamState st = adam_init(p);
	adam_step(p, std::vector<Tensor>{g}, st, cfg);
	CHECK(st.t == 1);
	for (std::size_t i = 0; i < 4; ++i)
		CHECK(p[0][i] == doctest::Approx(-cfg.lr * g[i] / (std::abs(g[i]) + cfg.eps_adam)).epsilon(1e-12));
}

TEST_CASE("adam steps tend to lr·sign(g) under a constant gradient") {
	TrainConfig cfg;
	cfg.lr = 0.001;
	const Tensor g = Tensor::from({3}, {0.02, -7.0, 1.5});
	std::vector<Tensor> p{Tensor({3}, 0.0)};
	AdamState st = adam_init(p);
	Tensor prev = p[0];
	for (int i = 0; i < 5000; ++i) {
		prev = p[0];
		adam_step(p, std::vector<Tensor>{g}, st, cfg);
	}
	for (std::size_t i = 0; i < 3; ++i) CHECK(prev[i] - p[0][i] == doctest::Approx(cfg.lr * (g[i] > 0 ? 1 : -1)).epsilon(1e-6));
}

TEST_CASE("a non-finite gradient aborts the step before any write") {
	TrainConfig cfg;
	std::vector<Tensor> p{Tensor({2}, 1.0), Tensor({1}, 2.0)};
	AdamState st = adam_init(p);
	const std::vector<std::string> names{"a", "b"};
	const std::vector<Tensor> g{Tensor({2}, 0.1), Tensor({1}, std::numeric_limits<double>::quiet_NaN())};
	CHECK_THROWS_WITH_AS(adam_step(p, g, st, cfg, &names), doctest::Contains("parameter b"), std::runtime_error);
	CHECK(p[0] == Tensor({2}, 1.0));
	CHECK(st.t == 0);
	CHECK(st.m[0] == Tensor({2}, 0.0));
}

TEST_CASE("zero epochs return the initialization") {
	TrainConfig cfg = tiny_config();
	cfg.epochs = 0;
	const Checkpoint init = initial_checkpoint(cfg);
	const Checkpoint out = train(cfg, tiny_data());
	CHECK(out.epoch == 0);
	CHECK(same_tensors(out.params, init.params));
	CHECK(out.history.empty());
}

TEST_CASE("training is deterministic and refreshes the bank every epoch") {
	TrainConfig cfg = tiny_config();
	cfg.epochs = 3;
	const Checkpoint a = train(cfg, tiny_data()), b = train(cfg, tiny_data());
	same_checkpoint(a, b);
	REQUIRE(a.history.size() == 3);
	for (std::size_t e = 0; e < 3; ++e) {
		CHECK(a.history[e].epoch == e + 1);
		CHECK(a.history[e].bank_stamp == static_cast<long>(e + 1));
		CHECK(std::isfinite(a.history[e].total));
	}
	CHECK_FALSE(same_tensors(a.params, initial_checkpoint(cfg).params));
	cfg.seed = 2;
	CHECK_FALSE(same_tensors(train(cfg, tiny_data()).params, a.params));
}

TEST_CASE("resuming from a saved checkpoint equals the uninterrupted run") {
	TempDir dir("resume");
	TrainConfig full = tiny_config();
	full.epochs = 4;
	const Checkpoint straight = train(full, tiny_data());

	TrainConfig half = full;
	half.epochs = 2;
	TrainOptions opts;
	opts.out_dir = dir.path;
	train(half, tiny_data(), opts);
	const Checkpoint mid = load_checkpoint(dir.path / "last.ckpt");
	CHECK(mid.epoch == 2);
	same_checkpoint(train(full, tiny_data(), mid), straight);
	CHECK(std::filesystem::exists(dir.path / "final.ckpt"));
}

TEST_CASE("checkpoint files round-trip bit for bit") {
	TempDir dir("ckpt_rt");
	const Checkpoint c = train(tiny_config(), tiny_data());
	save_checkpoint(dir.path / "c.ckpt", c);
	same_checkpoint(load_checkpoint(dir.path / "c.ckpt"), c);
	const Checkpoint init = initial_checkpoint(tiny_config());  // empty bank
	save_checkpoint(dir.path / "i.ckpt", init);
	same_checkpoint(load_checkpoint(dir.path / "i.ckpt"), init);
}

TEST_CASE("damaged checkpoints are rejected") {
	TempDir dir("ckpt_bad");
	const std::filesystem::path f = dir.path / "c.ckpt";
	save_checkpoint(f, train(tiny_config(), tiny_data()));
	const std::string bytes = slurp(f);

	for (std::size_t cut : {std::size_t{4}, std::size_t{11}, std::size_t{200}, bytes.size() - 8, bytes.size() - 1}) {
		CAPTURE(cut);
		spit(f, bytes.substr(0, cut));
		CHECK_THROWS_AS(load_checkpoint(f), FormatError);
	}
	std::string bad = bytes;
	bad[10] = static_cast<char>(bad[10] + 1);  // manifest length field
	spit(f, bad);
	CHECK_THROWS_AS(load_checkpoint(f), FormatError);
	bad = bytes;
	bad[13] = '\x7f';
	spit(f, bad);
	CHECK_THROWS_AS(load_checkpoint(f), FormatError);
	bad = bytes;
	bad[8] = 2;  // version
	spit(f, bad);
	CHECK_THROWS_WITH_AS(load_checkpoint(f), doctest::Contains("unsupported checkpoint version 2"), FormatError);
	spit(f, bytes + "junk");
	CHECK_THROWS_AS(load_checkpoint(f), FormatError);
}

TEST_CASE("resuming under a different config is refused") {
	const Checkpoint c = train(tiny_config(), tiny_data());
	TrainConfig other = tiny_config();
	other.lr = 5e-4;
	CHECK_THROWS_WITH_AS(train(other, tiny_data(), c), doctest::Contains("different configuration"), std::invalid_argument);
	TrainConfig longer = tiny_config();
	longer.epochs = 3;
	CHECK(longer.hash() == tiny_config().hash());
}

TEST_CASE("a non-finite loss aborts with the last good state") {
	std::vector<SyntheticSample> data = tiny_data();
	for (auto& s : data) s.image[0] = std::numeric_limits<double>::quiet_NaN();
	try {
		train(tiny_config(), data);
		FAIL("expected divergence");
	} catch (const DivergenceError& e) {
		CHECK(e.last_good().epoch == 0);
		CHECK(same_tensors(e.last_good().params, initial_checkpoint(tiny_config()).params));
	}
}

TEST_CASE("config validation and json") {
	TrainConfig c;
	c.k_real = 0.001;
	c.k_spoof = 0.002;
	CHECK_THROWS_AS(c.validate(), std::invalid_argument);
	c = TrainConfig{};
	c.batch_size = 5;
	CHECK_THROWS_AS(c.validate(), std::invalid_argument);
	c = TrainConfig{};
	c.csa = AugMode::off;
	CHECK_THROWS_AS(c.validate(), std::invalid_argument);  // selective whitening needs the augmented branch
	c.whitening = WhiteningMode::full_iw;
	CHECK_NOTHROW(c.validate());

	const TrainConfig t = tiny_config();
	const TrainConfig back = train_config_from_json(to_json(t));
	CHECK(back.hash() == t.hash());
	CHECK(back.epochs == t.epochs);
	CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"learning_rate", 0.1}}), std::invalid_argument);
	CHECK(train_config_from_json(nlohmann::json{{"lr", 0.5}}).lr == 0.5);
	CHECK(TrainConfig{}.lr == 1e-4);
	CHECK(TrainConfig{}.lambda == 0.1);
	CHECK(TrainConfig{}.k_real == 0.003);
	CHECK(TrainConfig{}.k_spoof == 0.0006);
}

TEST_CASE("loss stays finite for the default model over five seeds") {
	const auto domains = default_domains();
	const auto data = generate_dataset(domains, 8, 4, 64, 8);
	for (std::uint64_t seed = 1; seed <= 5; ++seed) {
		TrainConfig cfg;
		cfg.seed = seed;
		cfg.epochs = 2;
		cfg.steps_per_epoch = 1;
		cfg.monitor_every = 0;
		const Checkpoint c = train(cfg, data);
		for (const EpochLog& e : c.history) {
			CHECK(std::isfinite(e.cls));
			CHECK(std::isfinite(e.dep));
			CHECK(std::isfinite(e.aiaw));
			CHECK(std::isfinite(e.total));
		}
	}
}

}  // TEST_SUITE
