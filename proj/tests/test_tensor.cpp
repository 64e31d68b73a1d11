// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <unca/adam.hpp>

#include <doctest.h>

using namespace unca;
using unca::testing::gradient_error;
using unca::testing::probe;
using unca::testing::random_tensor;

TEST_CASE("conv2d with a centre-only kernel is the identity")
{
	Rng rng(1);
	const Tensor x = random_tensor( { 5, 4, 1 }, rng);
	Tensor k = Tensor::zeros( { 3, 3, 1, 1 });
	k.data()[4] = 1.0f;
	const Tensor y = ops::conv2d(x, k);
	CHECK(bitwise_equal(x, y));
}

TEST_CASE("conv2d all-ones kernel on a constant grid counts neighbours")
{
	const Tensor x = Tensor::full( { 3, 3, 1 }, 1.0f);
	const Tensor k = Tensor::full( { 3, 3, 1, 1 }, 1.0f);
	const Tensor yt = ops::conv2d(x, k);
	const auto y = yt.data();
	const std::vector<float> want { 4, 6, 4, 6, 9, 6, 4, 6, 4 };
	CHECK(std::vector<float>(y.begin(), y.end()) == want);

	const Tensor wt = ops::conv2d(x, k, Padding::Wrap);
	const auto w = wt.data();
	for (float v : w)
		CHECK(v == 9.0f);
}

TEST_CASE("conv2d matches a nested-loop oracle on multiple channels")
{
	Rng rng(2);
	const int h = 6, w = 5, ci = 3, co = 4;
	const Tensor x = random_tensor( { h, w, ci }, rng);
	const Tensor k = random_tensor( { 3, 3, ci, co }, rng);
	const Tensor yt = ops::conv2d(x, k);
	const auto y = yt.data();
	const auto xd = x.data(), kd = k.data();
	float worst = 0.0f;
	for (int r = 0; r < h; r++)
		for (int c = 0; c < w; c++)
			for (int o = 0; o < co; o++)
			{
				double s = 0.0;
				for (int dr = -1; dr <= 1; dr++)
					for (int dc = -1; dc <= 1; dc++)
					{
						const int rr = r + dr, cc = c + dc;
						if (rr < 0 || rr >= h || cc < 0 || cc >= w)
							continue;
						for (int i = 0; i < ci; i++)
							s += double(xd[(rr * w + cc) * ci + i]) * kd[(((dr + 1) * 3 + dc + 1) * ci + i) * co + o];
					}
				worst = std::max(worst, std::fabs(float(s) - y[(r * w + c) * co + o]));
			}
	CHECK(worst < 1e-5f);
}

TEST_CASE("conv2d gradients match finite differences")
{
	Rng rng(3);
	Tensor x = random_tensor( { 5, 5, 2 }, rng, -1, 1, true);
	Tensor k = random_tensor( { 3, 3, 2, 3 }, rng, -1, 1, true);
	const Tensor wts = random_tensor( { 5, 5, 3 }, rng);
	CHECK(gradient_error([&] { return ops::sum(ops::conv2d(x, k)); }, { x, k }) < 1e-3);
	CHECK(gradient_error([&] { return probe(ops::conv2d(x, k, Padding::Wrap), wts); }, { x, k }) < 1e-3);
}

TEST_CASE("matmul oracle values and shape errors")
{
	const Tensor a = Tensor::from( { 2, 2 }, { 1, 2, 3, 4 });
	const Tensor b = Tensor::from( { 2, 2 }, { 5, 6, 7, 8 });
	const Tensor ct = ops::matmul(a, b);
	const auto c = ct.data();
	CHECK(std::vector<float>(c.begin(), c.end()) == std::vector<float> { 19, 22, 43, 50 });

	Rng rng(4);
	const Tensor m = random_tensor( { 4, 4 }, rng);
	Tensor eye = Tensor::zeros( { 4, 4 });
	for (int i = 0; i < 4; i++)
		eye.data()[i * 5] = 1.0f;
	CHECK(bitwise_equal(ops::matmul(m, eye), m));

	CHECK_THROWS_AS(ops::matmul(Tensor::zeros( { 2, 3 }), Tensor::zeros( { 4, 2 })), ShapeError);
}

TEST_CASE("matmul gradients match finite differences")
{
	Rng rng(5);
	Tensor a = random_tensor( { 5, 7 }, rng, -1, 1, true);
	Tensor b = random_tensor( { 7, 3 }, rng, -1, 1, true);
	const Tensor w = random_tensor( { 5, 3 }, rng);
	CHECK(gradient_error([&] { return probe(ops::matmul(a, b), w); }, { a, b }) < 1e-3);
}

TEST_CASE("softmax_t closed forms")
{
	const Tensor ut = ops::softmax_t(Tensor::zeros( { 4 }), 0.37f);
	const auto u = ut.data();
	for (float v : u)
		CHECK(v == doctest::Approx(0.25f).epsilon(1e-6));

	const Tensor pt = ops::softmax_t(Tensor::from( { 2 }, { 1, 0 }), 1.0f);
	const auto p = pt.data();
	const double e = std::exp(1.0);
	CHECK(p[0] == doctest::Approx(e / (1 + e)).epsilon(1e-6));
	CHECK(p[1] == doctest::Approx(1 / (1 + e)).epsilon(1e-6));

	Rng rng(6);
	const Tensor l = random_tensor( { 3, 5 }, rng, -3, 3);
	Tensor shifted = l.clone();
	for (float &v : shifted.data())
		v += 2.5f;
	CHECK(unca::testing::max_abs_diff(ops::softmax_t(l, 0.7f), ops::softmax_t(shifted, 0.7f)) < 1e-6f);
}

TEST_CASE("softmax_t gradients match finite differences")
{
	Rng rng(7);
	Tensor l = random_tensor( { 3, 6 }, rng, -2, 2, true);
	const Tensor w = random_tensor( { 3, 6 }, rng);
	CHECK(gradient_error([&] { return probe(ops::softmax_t(l, 0.5f), w); }, { l }, 1e-3f) < 1e-3);
}

TEST_CASE("backward of simple reductions")
{
	Tensor x = Tensor::from( { 2, 3 }, { 1, 2, 3, 4, 5, 6 }, true);
	backward(ops::sum(x));
	for (float g : x.grad())
		CHECK(g == 1.0f);

	Tensor y = Tensor::from( { 3 }, { 1, 2, 3 }, true);
	backward(ops::sum(ops::mul(y, y)));
	const auto g = y.grad();
	CHECK(std::vector<float>(g.begin(), g.end()) == std::vector<float> { 2, 4, 6 });
}

TEST_CASE("three-layer composition gradients match finite differences")
{
	Rng rng(8);
	Tensor x = random_tensor( { 4, 5 }, rng, -1, 1, true);
	Tensor w1 = random_tensor( { 5, 6 }, rng, -1, 1, true);
	Tensor b1 = random_tensor( { 6 }, rng, -1, 1, true);
	Tensor w2 = random_tensor( { 6, 6 }, rng, -1, 1, true);
	Tensor w3 = random_tensor( { 6, 2 }, rng, -1, 1, true);
	const Tensor probe_w = random_tensor( { 4, 2 }, rng);
	auto f = [&] {
		Tensor h = ops::gelu(ops::add_row(ops::matmul(x, w1), b1));
		h = ops::tanh(ops::matmul(h, w2));
		return probe(ops::matmul(h, w3), probe_w);
	};
	CHECK(gradient_error(f, { x, w1, b1, w2, w3 }) < 1e-3);
}

TEST_CASE("shape ops gradients match finite differences")
{
	Rng rng(9);
	Tensor a = random_tensor( { 3, 4 }, rng, -1, 1, true);
	Tensor b = random_tensor( { 3, 2 }, rng, -1, 1, true);
	const Tensor w = random_tensor( { 3, 12 }, rng);
	auto f = [&] {
		Tensor c = ops::concat( { a, b }, 1);                      // [3,6]
		Tensor r = ops::repeat_cols(ops::slice(c, 1, 1, 4), 3);   // [3,12]
		return probe(ops::reshape(ops::reshape(r, { 36 }), { 3, 12 }), w);
	};
	CHECK(gradient_error(f, { a, b }) < 1e-3);
}

TEST_CASE("softmax cross-entropy gradient")
{
	Rng rng(10);
	Tensor l = random_tensor( { 4, 3 }, rng, -2, 2, true);
	const std::vector<int> labels { 0, 2, 1, 2 };
	CHECK(gradient_error([&] { return ops::softmax_cross_entropy(l, labels); }, { l }, 1e-3f) < 1e-3);
}

TEST_CASE("no-grad guard records nothing")
{
	Tensor x = Tensor::full( { 2 }, 1.0f, true);
	NoGradGuard guard;
	const Tensor y = ops::mul(x, x);
	CHECK_FALSE(y.requires_grad());
	CHECK(y.is_leaf());
}

TEST_CASE("finite check mode throws on NaN")
{
	set_finite_check(true);
	const Tensor x = Tensor::from( { 1 }, { std::numeric_limits<float>::infinity() });
	CHECK_THROWS_AS(ops::sub(x, x), NonFiniteError);
	set_finite_check(false);
}

TEST_CASE("adam: zero gradient is a fixed point")
{
	Tensor p = Tensor::from( { 3 }, { 1, -2, 3 });
	AdamState st = AdamState::for_param(p, {});
	const std::vector<float> g(3, 0.0f);
	adam_step(p, g, st);
	const auto d = p.data();
	CHECK(std::vector<float>(d.begin(), d.end()) == std::vector<float> { 1, -2, 3 });
	for (float v : st.m.data())
		CHECK(v == 0.0f);
	for (float v : st.v.data())
		CHECK(v == 0.0f);
}

TEST_CASE("adam: first step moves by about -lr * sign(g)")
{
	Tensor p = Tensor::from( { 2 }, { 0.3f, 0.3f });
	AdamState st = AdamState::for_param(p, { 1e-3f });
	const std::vector<float> g { 0.5f, -0.5f };
	adam_step(p, g, st);
	CHECK(p.data()[0] - 0.3f == doctest::Approx(-1e-3).epsilon(1e-3));
	CHECK(p.data()[1] - 0.3f == doctest::Approx(1e-3).epsilon(1e-3));
}

TEST_CASE("adam: minimizing theta^2 shrinks |theta| after warmup")
{
	Tensor p = Tensor::from( { 1 }, { 1.0f });
	AdamState st = AdamState::for_param(p, { 1e-2f });
	float prev = 1.0f;
	int increases = 0;
	for (int i = 0; i < 100; i++)
	{
		const std::vector<float> g { 2.0f * p.data()[0] };
		adam_step(p, g, st);
		const float now = std::fabs(p.data()[0]);
		if (i >= 5 && now > prev)
			increases++;
		prev = now;
	}
	CHECK(increases == 0);
	CHECK(prev < 0.5f);
}

TEST_CASE("adam: non-finite gradient is skipped, strict throws")
{
	Tensor p = Tensor::from( { 1 }, { 1.0f });
	AdamState st = AdamState::for_param(p, {});
	const std::vector<float> g { std::nanf("") };
	CHECK(adam_step(p, g, st) == AdamStatus::SkippedNonFinite);
	CHECK(p.data()[0] == 1.0f);
	CHECK(st.t == 0);
	CHECK_THROWS_AS(adam_step(p, g, st, true), NonFiniteError);
}

TEST_CASE("clip_grad_norm bounds the joint norm")
{
	Tensor a = Tensor::zeros( { 2 }, true), b = Tensor::zeros( { 1 }, true);
	a.mutable_grad()[0] = 3.0f;
	b.mutable_grad()[0] = 4.0f;
	std::vector<Tensor> ps { a, b };
	CHECK(clip_grad_norm(ps, 1.0f) == doctest::Approx(5.0f));
	CHECK(a.grad()[0] == doctest::Approx(0.6f));
	CHECK(b.grad()[0] == doctest::Approx(0.8f));
}
