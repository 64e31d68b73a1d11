// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the unit tests and the acceptance runner.

#pragma once

#include <unca/random.hpp>
#include <unca/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace unca::testing
{

inline Tensor random_tensor(Shape shape, Rng &rng, float lo = -1.0f, float hi = 1.0f, bool requires_grad = false)
{
	Tensor t = Tensor::zeros(std::move(shape), requires_grad);
	for (float &v : t.data())
		v = uniform(rng, lo, hi);
	return t;
}

/// Relative L2 error between the analytic gradients of `loss` w.r.t.
/// `params` and central differences: |g - g_fd| / max(|g|, |g_fd|).
inline double gradient_error(const std::function<Tensor()> &loss, std::vector<Tensor> params, float eps = 1e-2f)
{
	for (auto &p : params)
		p.zero_grad();
	backward(loss());
	double diff = 0.0, na = 0.0, nf = 0.0;
	for (auto &p : params)
	{
		const std::vector<float> g(p.grad().begin(), p.grad().end());
		auto d = p.data();
		for (std::size_t i = 0; i < d.size(); i++)
		{
			const float orig = d[i];
			double fp, fm;
			{
				NoGradGuard guard;
				d[i] = orig + eps;
				fp = loss().item();
				d[i] = orig - eps;
				fm = loss().item();
			}
			d[i] = orig;
			const double fd = (fp - fm) / (2.0 * eps);
			diff += (g[i] - fd) * (g[i] - fd);
			na += double(g[i]) * g[i];
			nf += fd * fd;
		}
	}
	const double denom = std::max(std::sqrt(na), std::sqrt(nf));
	return denom > 0.0 ? std::sqrt(diff) / denom : 0.0;
}

inline float max_abs_diff(const Tensor &a, const Tensor &b)
{
	const auto x = a.data(), y = b.data();
	float m = 0.0f;
	for (std::size_t i = 0; i < x.size(); i++)
		m = std::max(m, std::fabs(x[i] - y[i]));
	return m;
}

/// Weighted sum with fixed random weights so every output entry matters.
inline Tensor probe(const Tensor &t, const Tensor &weights)
{
	return ops::sum(ops::mul(t, weights));
}

}
