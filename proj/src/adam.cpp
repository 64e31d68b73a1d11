// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include <unca/adam.hpp>

#include <cmath>

namespace unca
{

AdamState AdamState::for_param(const Tensor &param, AdamHyper hyper)
{
	AdamState s;
	s.m = Tensor::zeros(param.shape());
	s.v = Tensor::zeros(param.shape());
	s.hyper = hyper;
	return s;
}

AdamStatus adam_step(Tensor &param, std::span<const float> grad, AdamState &state, bool strict)
{
	if (grad.size() != param.numel() || state.m.shape() != param.shape() || state.v.shape() != param.shape())
		throw ShapeError("adam_step: parameter, gradient and moment shapes differ");
	for (float g : grad)
		if (!std::isfinite(g))
		{
			if (strict)
				throw NonFiniteError("adam_step: non-finite gradient, step skipped");
			return AdamStatus::SkippedNonFinite;
		}

	const auto &h = state.hyper;
	state.t += 1;
	const float bc1 = static_cast<float>(1.0 - std::pow(static_cast<double>(h.beta1), static_cast<double>(state.t)));
	const float bc2 = static_cast<float>(1.0 - std::pow(static_cast<double>(h.beta2), static_cast<double>(state.t)));
	auto p = param.data();
	auto m = state.m.data();
	auto v = state.v.data();
	for (std::size_t i = 0; i < p.size(); i++)
	{
		const float g = grad[i];
		m[i] = h.beta1 * m[i] + (1.0f - h.beta1) * g;
		v[i] = h.beta2 * v[i] + (1.0f - h.beta2) * g * g;
		const float m_hat = m[i] / bc1;
		const float v_hat = v[i] / bc2;
		p[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
	}
	return AdamStatus::Applied;
}

float clip_grad_norm(std::span<Tensor> params, float max_norm)
{
	float sq = 0.0f;
	for (auto &p : params)
		for (float g : p.grad())
			sq += g * g;
	const float norm = std::sqrt(sq);
	if (norm > max_norm && norm > 0.0f)
	{
		const float s = max_norm / norm;
		for (auto &p : params)
			for (float &g : p.mutable_grad())
				g *= s;
	}
	return norm;
}

}
