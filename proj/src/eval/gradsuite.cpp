#include "iadg/gradsuite.hpp"

#include <algorithm>
#include <cmath>

#include "iadg/dkg.hpp"
#include "iadg/model.hpp"
#include "iadg/whitening.hpp"

namespace iadg {

double param_grad_check(ParamSet params, const std::vector<std::string>& names,
                        const std::function<Var(Tape&, const BoundParams&)>& loss, std::size_t max_coords,
                        double step) {
	std::vector<Tensor> analytic;
	{
		Tape tape;
		BoundParams p(tape, params, true);
		const Gradients g = tape.backward(loss(tape, p));
		for (const std::string& n : names) analytic.push_back(g[p[params.find(n)]]);
	}
	auto evaluate = [&] {
		Tape tape(false);
		BoundParams p(tape, params, false);
		return loss(tape, p).value().item();
	};
	double worst = 0.0;
	for (std::size_t k = 0; k < names.size(); ++k) {
		Tensor& t = params[params.find(names[k])];
		const std::size_t stride = std::max<std::size_t>(1, t.size() / max_coords);
		for (std::size_t i = 0; i < t.size(); i += stride) {
			const double x0 = t[i];
			const double numeric = numeric_derivative(
			    [&](double offset) {
				    t[i] = x0 + offset;
				    return evaluate();
			    },
			    x0, step);
			t[i] = x0;
			const double a = analytic[k][i];
			worst = std::max(worst, rel_err(a, numeric));
		}
	}
	return worst;
}

namespace {

Tensor normal(Shape s, Rng& rng, double sd = 1.0) {
	Tensor t(std::move(s));
	for (double& v : t.data()) v = rng.normal(0.0, sd);
	return t;
}

// Magnitudes in [0.1, 1] with random sign: keeps relu/abs kinks far from every probe.
Tensor off_kink(Shape s, Rng& rng) {
	Tensor t(std::move(s));
	for (double& v : t.data()) v = rng.uniform(0.1, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
	return t;
}

Tensor uniform(Shape s, Rng& rng, double lo, double hi) {
	Tensor t(std::move(s));
	for (double& v : t.data()) v = rng.uniform(lo, hi);
	return t;
}

// Contract with a fixed random weight so every output coordinate matters.
Var weighted(Var y, const Tensor& w) { return sum(mul(y, y.tape()->constant(w))); }

GradCase unary(std::string name, std::function<Var(Var)> op, Shape shape, bool kinked = false) {
	return {name, [=](std::uint64_t seed) {
		        Rng rng(seed);
		        const Tensor x = kinked ? off_kink(shape, rng) : normal(shape, rng);
		        const Tensor w = normal(op(Tape(false).constant(x)).shape(), rng);
		        return grad_check([&](Var v) { return weighted(op(v), w); }, x);
	        }};
}

GradCase multi(std::string name, std::function<Var(std::span<const Var>)> op,
               std::function<std::vector<Tensor>(Rng&)> inputs) {
	return {name, [=](std::uint64_t seed) {
		        Rng rng(seed);
		        const std::vector<Tensor> xs = inputs(rng);
		        Tape probe(false);
		        std::vector<Var> vs;
		        for (const Tensor& x : xs) vs.push_back(probe.constant(x));
		        const Shape out = op(vs).shape();
		        const Tensor w = normal(out, rng);
		        return grad_check([&](std::span<const Var> v) { return weighted(op(v), w); }, xs);
	        }};
}

// Tiny two-stage model with a live generator, a populated style bank and a balanced batch.
struct Toy {
	Model model;
	Tensor images;
	std::vector<ClassLabel> labels;
	Tensor y;
	Tensor y_dep;
	StyleBank bank;
	std::uint64_t seed;
};

Toy make_toy(std::uint64_t seed) {
	ModelConfig cfg;
	cfg.channels = {3, 6, 12};
	cfg.image_size = 8;
	cfg.depth_hidden = 4;
	Toy t{Model::create(cfg, seed), {}, {}, {}, {}, {}, seed};
	Rng rng = Rng(seed).split(7);
	for (std::size_t i = 0; i < t.model.params.size(); ++i)
		if (t.model.params.name(i).find("generator.weight") != std::string::npos)
			for (double& v : t.model.params.values()[i].data()) v = rng.uniform(-0.3, 0.3);
	t.images = uniform({4, 3, 8, 8}, rng, 0.0, 1.0);
	t.labels = {ClassLabel::real, ClassLabel::spoof, ClassLabel::real, ClassLabel::spoof};
	t.y = Tensor({4});
	for (std::size_t i = 0; i < 4; ++i) t.y[i] = label_value(t.labels[i]);
	t.y_dep = uniform({4, 1, 2, 2}, rng, 0.0, 1.0);
	for (std::size_t i : {1, 3})
		for (std::size_t j = 0; j < 4; ++j) t.y_dep[i * 4 + j] = 0.0;

	Tape tape(false);
	BoundParams p(tape, t.model.params, false);
	Var s1 = run_stage(tape.constant(t.images), p, t.model.backbone.stages.front(), DkgMode::full);
	t.bank = build_bank(compute_style_stats(s1.value(), t.labels), 2, 0);
	return t;
}

enum class Composed { cls, dep, aiaw, total };

Var composed_loss(const Toy& t, Var images, const BoundParams& p, Composed which) {
	Rng rng = Rng(t.seed).split(11);  // identical style draws on every evaluation
	DualOutputs out = forward_dual(images, p, t.model, t.labels, AugMode::csa, &t.bank, rng, DkgMode::full);
	const HeadParams& h = t.model.heads;
	const Var lc = cls_loss(cls_logits(out.org.final_feat, p, h), cls_logits(out.aug->final_feat, p, h), t.y);
	const Var ld = depth_loss(depth_map(out.org.final_feat, p, h), depth_map(out.aug->final_feat, p, h), t.y_dep);
	const WhiteningConfig w{WhiteningMode::asymmetric, 0.2, 0.1};  // 13 / 6 entries of the 66 off-diagonal pairs
	const Var la = aiaw_loss(covariance(out.org.final_feat), covariance(out.aug->final_feat), t.labels, w).loss;
	switch (which) {
		case Composed::cls: return lc;
		case Composed::dep: return ld;
		case Composed::aiaw: return la;
		case Composed::total: return total_loss(lc, ld, la, 0.1);
	}
	return lc;
}

GradCase composed(std::string name, Composed which) {
	return {name, [=](std::uint64_t seed) {
		        const Toy t = make_toy(seed);
		        const double wrt_images = grad_check(
		            [&](Var x) {
			            Tape& tape = *x.tape();
			            BoundParams p(tape, t.model.params, false);
			            return composed_loss(t, x, p, which);
		            },
		            t.images, 0.0, 96);
		        const std::vector<std::string> names = {"stage1.block.weight", "stage1.dkg.generator.weight",
		                                                "stage2.dkg.static.weight", "stage2.down.weight",
		                                                "head.cls.weight", "head.dep2.weight"};
		        const double wrt_params = param_grad_check(
		            t.model.params, names,
		            [&](Tape& tape, const BoundParams& p) { return composed_loss(t, tape.constant(t.images), p, which); });
		        return std::max(wrt_images, wrt_params);
	        }};
}

}  // namespace

std::vector<GradCase> gradient_cases() {
	std::vector<GradCase> c;
	const Shape s{2, 3, 4};
	auto two = [](Shape a, Shape b) {
		return [=](Rng& rng) { return std::vector<Tensor>{normal(a, rng), normal(b, rng)}; };
	};
	c.push_back(multi("add", [](auto v) { return add(v[0], v[1]); }, two(s, s)));
	c.push_back(multi("sub", [](auto v) { return sub(v[0], v[1]); }, two(s, s)));
	c.push_back(multi("mul", [](auto v) { return mul(v[0], v[1]); }, two(s, s)));
	c.push_back(unary("scale", [](Var x) { return scale(x, -1.7); }, s));
	c.push_back(unary("square", [](Var x) { return square(x); }, s));
	c.push_back(unary("abs", [](Var x) { return abs(x); }, s, true));
	c.push_back(unary("relu", [](Var x) { return relu(x); }, s, true));
	c.push_back(unary("sigmoid", [](Var x) { return sigmoid(x); }, s));
	c.push_back(unary("sum", [](Var x) { return scale(sum(square(x)), 0.5); }, s));
	c.push_back(unary("mean", [](Var x) { return mean(square(x)); }, s));
	c.push_back(unary("reshape", [](Var x) { return reshape(x, {4, 6}); }, s));
	c.push_back(multi("matmul", [](auto v) { return matmul(v[0], v[1]); }, two({3, 4}, {4, 5})));
	c.push_back(multi("linear", [](auto v) { return linear(v[0], v[1], v[2]); }, [](Rng& rng) {
		return std::vector<Tensor>{normal({3, 5}, rng), normal({4, 5}, rng), normal({4}, rng)};
	}));
	c.push_back(multi("bce_with_logits", [](auto v) { return bce_with_logits(v[0], v[1]); }, [](Rng& rng) {
		return std::vector<Tensor>{normal({6}, rng, 2.0), uniform({6}, rng, 0.0, 1.0)};
	}));
	c.push_back(multi("concat_channels", [](auto v) { return concat_channels(v[0], v[1]); },
	                  two({2, 2, 3, 3}, {2, 3, 3, 3})));
	c.push_back(unary("slice_channels", [](Var x) { return slice_channels(x, 1, 2); }, {2, 4, 3, 3}));
	for (const auto& [label, stride, pad, k] : std::vector<std::tuple<std::string, std::size_t, std::size_t, std::size_t>>{
	         {"conv2d_3x3_s1", 1, 1, 3}, {"conv2d_3x3_s2", 2, 1, 3}, {"conv2d_1x1", 1, 0, 1}, {"conv2d_3x3_valid", 1, 0, 3}}) {
		c.push_back(multi(label, [=](auto v) { return conv2d(v[0], v[1], v[2], stride, pad); }, [=](Rng& rng) {
			return std::vector<Tensor>{normal({2, 3, 6, 6}, rng), normal({4, 3, k, k}, rng), normal({4}, rng)};
		}));
	}
	c.push_back(multi("dynamic_depthwise_conv2d", [](auto v) { return dynamic_depthwise_conv2d(v[0], v[1]); },
	                  two({2, 3, 5, 5}, {2, 3, 3, 3})));
	c.push_back(unary("instance_norm", [](Var x) { return instance_norm(x); }, {2, 3, 4, 4}));
	c.push_back(unary("global_avg_pool", [](Var x) { return global_avg_pool(x); }, {2, 3, 4, 4}));
	c.push_back(unary("channel_gram", [](Var x) { return channel_gram(x); }, {2, 3, 4, 4}));
	c.push_back(multi("channel_affine", [](auto v) { return channel_affine(v[0], v[1], v[2]); }, [](Rng& rng) {
		return std::vector<Tensor>{normal({2, 3, 4, 4}, rng), normal({2, 3}, rng), normal({2, 3}, rng)};
	}));
	c.push_back(unary("covariance", [](Var x) { return covariance(x); }, {2, 4, 4, 4}));
	c.push_back(multi("reassemble", [](auto v) { return reassemble(v[0], v[1], v[2]); }, [](Rng& rng) {
		return std::vector<Tensor>{normal({2, 3, 4, 4}, rng), normal({2, 3}, rng), uniform({2, 3}, rng, 0.5, 1.5)};
	}));
	c.push_back({"dkg_forward", [](std::uint64_t seed) {
		             Rng rng(seed);
		             ParamSet ps;
		             const DkgParams d = add_dkg(ps, "dkg", 4, rng);
		             for (double& v : ps[d.generator.weight].data()) v = rng.uniform(-0.5, 0.5);
		             const Tensor x = normal({2, 4, 5, 5}, rng);
		             const Tensor w = normal({2, 4, 5, 5}, rng);
		             auto f = [&](Tape& tape, const BoundParams& p, Var in) {
			             (void)tape;
			             return weighted(dkg_forward(in, p, d), w);
		             };
		             const double ex = grad_check(
		                 [&](Var in) {
			                 BoundParams p(*in.tape(), ps, false);
			                 return f(*in.tape(), p, in);
		                 },
		                 x);
		             const double ep = param_grad_check(
		                 ps, ps.names(), [&](Tape& tape, const BoundParams& p) { return f(tape, p, tape.constant(x)); });
		             return std::max(ex, ep);
	             }});
	c.push_back(composed("L_cls", Composed::cls));
	c.push_back(composed("L_dep", Composed::dep));
	c.push_back(composed("L_aiaw", Composed::aiaw));
	c.push_back(composed("L_total", Composed::total));
	return c;
}

std::vector<GradResult> run_gradient_suite(std::span<const std::uint64_t> seeds) {
	std::vector<GradResult> out;
	for (const GradCase& gc : gradient_cases())
		for (std::uint64_t s : seeds) out.push_back({gc.name, s, gc.run(s)});
	return out;
}

}  // namespace iadg
