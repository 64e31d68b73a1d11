// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unca/tensor.hpp>

#include <cstdint>
#include <span>

namespace unca
{

struct AdamHyper
{
	float lr = 1e-3f;
	float beta1 = 0.9f;
	float beta2 = 0.999f;
	float eps = 1e-8f;
};

/// Moments and step counter of one parameter tensor.
struct AdamState
{
	Tensor m;
	Tensor v;
	std::int64_t t = 0;
	AdamHyper hyper;

	static AdamState for_param(const Tensor &param, AdamHyper hyper);
};

enum class AdamStatus
{
	Applied,
	SkippedNonFinite
};

/// One bias-corrected Adam update of `param` in place. A non-finite gradient
/// leaves parameter and state untouched; in strict mode it also throws
/// NonFiniteError.
AdamStatus adam_step(Tensor &param, std::span<const float> grad, AdamState &state, bool strict = false);

/// Scales the gradients of `params` so their joint L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
float clip_grad_norm(std::span<Tensor> params, float max_norm);

}
