// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0
//
// Raw float kernels behind the tensor ops. Every reduction runs in a fixed
// ascending-index order so results are bitwise reproducible.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace unca::kernels
{

/// Rational tanh approximation, within a few float ulps of std::tanh and
/// vectorizable. Used by every activation so per-cell and batched paths agree.
inline float tanh_fast(float x)
{
	constexpr float a1 = 4.89352455891786e-03f, a3 = 6.37261928875436e-04f, a5 = 1.48572235717979e-05f;
	constexpr float a7 = 5.12229709037114e-08f, a9 = -8.60467152213735e-11f, a11 = 2.00018790482477e-13f;
	constexpr float a13 = -2.76076847742355e-16f;
	constexpr float b0 = 4.89352518554385e-03f, b2 = 2.26843463243900e-03f, b4 = 1.18534705686654e-04f;
	constexpr float b6 = 1.19825839466702e-06f;
	constexpr float clamp = 7.90531110763549805f;
	const float v = std::min(std::max(x, -clamp), clamp);
	const float v2 = v * v;
	float p = a13;
	p = p * v2 + a11;
	p = p * v2 + a9;
	p = p * v2 + a7;
	p = p * v2 + a5;
	p = p * v2 + a3;
	p = p * v2 + a1;
	p *= v;
	float q = b6;
	q = q * v2 + b4;
	q = q * v2 + b2;
	q = q * v2 + b0;
	const float r = p / q;
	return r;
}

/// y = gelu(x) with the tanh approximation; t receives the inner tanh.
void gelu_forward(const float *x, float *y, float *t, std::size_t n);

/// c[m,p] = a[m,n] * b[n,p]
void gemm(const float *a, const float *b, float *c, int m, int n, int p);
/// da[m,n] += dc[m,p] * b[n,p]^T
void gemm_nt_accumulate(const float *dc, const float *b, float *da, int m, int p, int n);
/// db[n,p] += a[m,n]^T * dc[m,p]
void gemm_tn_accumulate(const float *a, const float *dc, float *db, int m, int n, int p);

struct ConvGeometry
{
	int height, width, cin, cout, ksize;
	bool wrap;
};

void conv2d_forward(const ConvGeometry &g, const float *input, const float *kernels, float *out);
void conv2d_backward_input(const ConvGeometry &g, const float *dout, const float *kernels, float *dinput);
void conv2d_backward_kernels(const ConvGeometry &g, const float *dout, const float *input, float *dkernels);

}
