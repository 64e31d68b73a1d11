// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include <unca/nca.hpp>

#include "kernels.hpp"

#include <algorithm>
#include <cmath>

namespace unca
{

namespace
{
	Tensor uniform_param(Shape shape, float bound, Rng &rng)
	{
		Tensor t = Tensor::zeros(std::move(shape), true);
		for (float &v : t.data())
			v = uniform(rng, -bound, bound);
		return t;
	}

	float activate(float x, Activation a)
	{
		if (a == Activation::Tanh)
			return kernels::tanh_fast(x);
		constexpr float c = 0.7978845608028654f;
		return 0.5f * x * (1.0f + kernels::tanh_fast(c * (x + 0.044715f * x * x * x)));
	}

	Tensor activate(const Tensor &x, Activation a)
	{
		return a == Activation::Tanh ? ops::tanh(x) : ops::gelu(x);
	}
}

void RuleConfig::validate() const
{
	if (mutable_channels < 1 || hardware_channels < 1 || perception_channels < 1 || hidden < 1)
		throw ValueError("rule: channel counts must be positive");
	if (pathways < 1)
		throw ValueError("rule: at least one pathway is required");
	if (kernel_size < 1 || kernel_size % 2 == 0)
		throw ValueError("rule: kernel size must be odd");
	if (!(temperature > 0.0f))
		throw ValueError("rule: temperature must be positive");
	if (!(fire_rate > 0.0f && fire_rate <= 1.0f))
		throw ValueError("rule: fire rate must lie in (0,1]");
}

RuleParams RuleParams::init(const RuleConfig &config, Rng &rng)
{
	config.validate();
	const int k = config.kernel_size, cm = config.mutable_channels, cp = config.perception_channels;
	const int n = config.pathways, hid = config.hidden, chw = config.hardware_channels;
	RuleParams p;
	p.config = config;
	p.perception = uniform_param( { k, k, cm, cp }, std::sqrt(3.0f / static_cast<float>(k * k * cm)), rng);
	p.hidden_w = uniform_param( { cp, n * hid }, std::sqrt(3.0f / static_cast<float>(cp)), rng);
	p.hidden_b = Tensor::zeros( { n * hid }, true);
	p.out_w = Tensor::zeros( { n * hid, cm }, true);
	p.out_b = Tensor::zeros( { n, cm }, true);
	p.embed = uniform_param( { chw, n }, std::sqrt(3.0f / static_cast<float>(chw)), rng);
	return p;
}

std::vector<std::pair<std::string, Tensor*>> RuleParams::named()
{
	return { { "rule/perception", &perception }, { "rule/hidden_w", &hidden_w }, { "rule/hidden_b", &hidden_b }, { "rule/out_w", &out_w }, {
			"rule/out_b", &out_b }, { "rule/embed", &embed } };
}

void RuleParams::set_trainable(bool trainable)
{
	for (auto &[name, t] : named())
		t->set_requires_grad(trainable);
}

RuleParams RuleParams::clone() const
{
	RuleParams c;
	c.config = config;
	c.perception = perception.clone_param();
	c.hidden_w = hidden_w.clone_param();
	c.hidden_b = hidden_b.clone_param();
	c.out_w = out_w.clone_param();
	c.out_b = out_b.clone_param();
	c.embed = embed.clone_param();
	return c;
}

void GridState::validate() const
{
	if (mutable_state.rank() != 3 || hardware.rank() != 3)
		throw ShapeError("grid: mutable and hardware fields must be [H,W,C]");
	if (mutable_state.dim(0) != hardware.dim(0) || mutable_state.dim(1) != hardware.dim(1))
		throw ShapeError("grid: mutable " + shape_str(mutable_state.shape()) + " and hardware " + shape_str(hardware.shape())
				+ " differ in spatial size");
}

GridState make_grid(int height, int width, const RuleConfig &config, Tensor hardware)
{
	GridState g { Tensor::zeros( { height, width, config.mutable_channels }), std::move(hardware) };
	g.validate();
	if (g.hardware.dim(2) != config.hardware_channels)
		throw ShapeError("grid: hardware has " + std::to_string(g.hardware.dim(2)) + " channels, rule expects "
				+ std::to_string(config.hardware_channels));
	return g;
}

Tensor perceive(const Tensor &state, const RuleParams &params)
{
	return ops::conv2d(state, params.perception, params.config.padding);
}

std::vector<float> attention_weights(std::span<const float> hardware, const RuleParams &params)
{
	const int chw = params.embed.dim(0), n = params.embed.dim(1);
	if (static_cast<int>(hardware.size()) != chw)
		throw ShapeError("attention: hardware vector has " + std::to_string(hardware.size()) + " entries, expected " + std::to_string(chw));
	const auto e = params.embed.data();
	std::vector<float> logits(n, 0.0f);
	for (int c = 0; c < chw; c++)
		for (int h = 0; h < n; h++)
			logits[h] += hardware[c] * e[c * n + h];
	Tensor a = ops::softmax_t(Tensor::from( { n }, logits), params.config.temperature);
	return { a.data().begin(), a.data().end() };
}

std::vector<float> pathway_output(std::span<const float> perception, int pathway, const RuleParams &params)
{
	const int cp = params.hidden_w.dim(0), width = params.hidden_w.dim(1), cm = params.out_w.dim(1);
	const int hid = params.config.hidden;
	if (static_cast<int>(perception.size()) != cp)
		throw ShapeError("pathway: perception vector has " + std::to_string(perception.size()) + " entries, expected " + std::to_string(cp));
	if (pathway < 0 || pathway >= params.config.pathways)
		throw ShapeError("pathway index out of range");
	const auto w1 = params.hidden_w.data(), b1 = params.hidden_b.data(), w2 = params.out_w.data(), b2 = params.out_b.data();
	std::vector<float> v(b2.begin() + pathway * cm, b2.begin() + (pathway + 1) * cm);
	for (int j = 0; j < hid; j++)
	{
		const int col = pathway * hid + j;
		float pre = b1[col];
		for (int i = 0; i < cp; i++)
			pre += perception[i] * w1[i * width + col];
		const float a = activate(pre, params.config.activation);
		for (int c = 0; c < cm; c++)
			v[c] += a * w2[col * cm + c];
	}
	return v;
}

Tensor update_cell(std::span<const float> perception, std::span<const float> hardware, const RuleParams &params)
{
	const auto alpha = attention_weights(hardware, params);
	const int cm = params.config.mutable_channels;
	Tensor delta = Tensor::zeros( { cm });
	auto d = delta.data();
	for (int h = 0; h < params.config.pathways; h++)
	{
		const auto v = pathway_output(perception, h, params);
		for (int c = 0; c < cm; c++)
			d[c] += alpha[h] * v[c];
	}
	return delta;
}

HardwareAttention attend(const Tensor &hardware, const RuleParams &params)
{
	if (hardware.rank() != 3 || hardware.dim(2) != params.embed.dim(0))
		throw ShapeError("attend: hardware field " + shape_str(hardware.shape()) + " does not match embedding " + shape_str(params.embed.shape()));
	const int cells = hardware.dim(0) * hardware.dim(1);
	HardwareAttention att;
	Tensor flat = ops::reshape(hardware, { cells, hardware.dim(2) });
	att.alpha = ops::softmax_t(ops::matmul(flat, params.embed), params.config.temperature);
	att.alpha_rep = ops::repeat_cols(att.alpha, params.config.hidden);
	att.alpha_bias = ops::matmul(att.alpha, params.out_b);
	return att;
}

GridState step(const GridState &grid, const RuleParams &params, Rng *rng)
{
	return step(grid, params, attend(grid.hardware, params), rng);
}

GridState step(const GridState &grid, const RuleParams &params, const HardwareAttention &attention, Rng *rng)
{
	grid.validate();
	const int h = grid.height(), w = grid.width(), cm = params.config.mutable_channels;
	if (grid.mutable_state.dim(2) != cm)
		throw ShapeError("step: grid has " + std::to_string(grid.mutable_state.dim(2)) + " mutable channels, rule expects " + std::to_string(cm));
	const int cells = h * w;
	Tensor p = ops::reshape(perceive(grid.mutable_state, params), { cells, params.config.perception_channels });
	Tensor hidden = activate(ops::add_row(ops::matmul(p, params.hidden_w), params.hidden_b), params.config.activation);
	Tensor mixed = ops::mul(hidden, attention.alpha_rep);
	Tensor delta = ops::add(ops::matmul(mixed, params.out_w), attention.alpha_bias);
	if (params.config.stochastic_update)
	{
		if (rng == nullptr)
			throw std::logic_error("step: stochastic update requires an rng");
		Tensor mask = Tensor::zeros( { cells, cm });
		auto md = mask.data();
		std::bernoulli_distribution fire(params.config.fire_rate);
		for (int c = 0; c < cells; c++)
			if (fire(*rng))
				std::fill_n(md.begin() + static_cast<std::ptrdiff_t>(c) * cm, cm, 1.0f);
		delta = ops::mul(delta, mask);
	}
	return GridState { ops::add(grid.mutable_state, ops::reshape(delta, { h, w, cm })), grid.hardware };
}

GridState run_steps(const GridState &grid, const RuleParams &params, int steps, Rng *rng)
{
	if (steps < 0)
		throw ValueError("run_steps: negative step count");
	const auto att = attend(grid.hardware, params);
	GridState g = grid;
	for (int i = 0; i < steps; i++)
		g = step(g, params, att, rng);
	return g;
}

int sample_eval_index(int steps, Rng &rng)
{
	if (steps < 1)
		throw ValueError("rollout: T_steps must be at least 1");
	return uniform_int(rng, steps - steps / 4, steps);
}

Rollout rollout(const GridState &grid, const RuleParams &params, int steps, Rng &rng)
{
	Rollout r;
	r.eval_index = sample_eval_index(steps, rng);
	const auto att = attend(grid.hardware, params);
	r.trajectory.reserve(static_cast<std::size_t>(steps) + 1);
	r.trajectory.push_back(grid);
	for (int i = 0; i < steps; i++)
		r.trajectory.push_back(step(r.trajectory.back(), params, att, &rng));
	return r;
}

}
