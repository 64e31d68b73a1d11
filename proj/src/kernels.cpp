// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include "kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

namespace unca::kernels
{

namespace
{
	using std::size_t;

	// Inner loops are axpy over a contiguous output row so the compiler
	// vectorizes across outputs while each output still accumulates its terms
	// in ascending order.
	inline void axpy(float alpha, const float *__restrict x, float *__restrict y, int n)
	{
		for (int j = 0; j < n; j++)
			y[j] += alpha * x[j];
	}

	// Four output rows share each load of x.
	inline void axpy4(const float *alpha, size_t stride, const float *__restrict x, float *__restrict y0, float *__restrict y1,
			float *__restrict y2, float *__restrict y3, int n)
	{
		const float a0 = alpha[0], a1 = alpha[stride], a2 = alpha[2 * stride], a3 = alpha[3 * stride];
		for (int j = 0; j < n; j++)
		{
			const float v = x[j];
			y0[j] += a0 * v;
			y1[j] += a1 * v;
			y2[j] += a2 * v;
			y3[j] += a3 * v;
		}
	}

	std::vector<float> transpose(const float *src, int rows, int cols)
	{
		std::vector<float> t(static_cast<size_t>(rows) * cols);
		for (int r = 0; r < rows; r++)
			for (int c = 0; c < cols; c++)
				t[static_cast<size_t>(c) * rows + r] = src[static_cast<size_t>(r) * cols + c];
		return t;
	}

	// c[m,p] += a[m,n] * b[n,p], with a's rows `lda` apart. A 4-row tile of c
	// stays in registers across the whole k loop; every element still sums its
	// terms in ascending k after its initial value.
	constexpr int kTileRows = 4;

	// Eight-lane vector of the GCC/Clang extension; lanes stay independent so
	// the per-element accumulation order is unchanged.
	typedef float v8 __attribute__((vector_size(32)));

	inline v8 load8(const float *p)
	{
		v8 v;
		std::memcpy(&v, p, sizeof v);
		return v;
	}

	inline void store8(float *p, v8 v)
	{
		std::memcpy(p, &v, sizeof v);
	}

	template <int kVecs>
	void tile(const float *a, size_t lda, const float *b, float *c, int n, int p)
	{
		v8 acc[kTileRows][kVecs];
		for (int r = 0; r < kTileRows; r++)
			for (int v = 0; v < kVecs; v++)
				acc[r][v] = load8(c + static_cast<size_t>(r) * p + 8 * v);
		for (int k = 0; k < n; k++)
		{
			const float *brow = b + static_cast<size_t>(k) * p;
			v8 bv[kVecs];
			for (int v = 0; v < kVecs; v++)
				bv[v] = load8(brow + 8 * v);
			for (int r = 0; r < kTileRows; r++)
			{
				const float av = a[static_cast<size_t>(r) * lda + k];
				for (int v = 0; v < kVecs; v++)
					acc[r][v] += av * bv[v];
			}
		}
		for (int r = 0; r < kTileRows; r++)
			for (int v = 0; v < kVecs; v++)
				store8(c + static_cast<size_t>(r) * p + 8 * v, acc[r][v]);
	}

	void gemm_acc(const float *a, size_t lda, const float *b, float *c, int m, int n, int p)
	{
		int i = 0;
		for (; i + kTileRows <= m; i += kTileRows)
		{
			const float *arow = a + static_cast<size_t>(i) * lda;
			float *c0 = c + static_cast<size_t>(i) * p;
			int pt = 0;
			for (; pt + 32 <= p; pt += 32)
				tile<4>(arow, lda, b + pt, c0 + pt, n, p);
			for (; pt + 16 <= p; pt += 16)
				tile<2>(arow, lda, b + pt, c0 + pt, n, p);
			for (; pt + 8 <= p; pt += 8)
				tile<1>(arow, lda, b + pt, c0 + pt, n, p);
			if (pt < p)
				for (int k = 0; k < n; k++)
					axpy4(arow + k, lda, b + static_cast<size_t>(k) * p + pt, c0 + pt, c0 + p + pt, c0 + 2 * p + pt, c0 + 3 * p + pt,
							p - pt);
		}
		for (; i < m; i++)
		{
			float *crow = c + static_cast<size_t>(i) * p;
			const float *arow = a + static_cast<size_t>(i) * lda;
			for (int k = 0; k < n; k++)
				axpy(arow[k], b + static_cast<size_t>(k) * p, crow, p);
		}
	}

	// Maps a neighbour coordinate onto the grid; returns -1 when it falls
	// outside and padding is zero.
	inline int resolve(int v, int extent, bool wrap)
	{
		if (v >= 0 && v < extent)
			return v;
		if (!wrap)
			return -1;
		v %= extent;
		return v < 0 ? v + extent : v;
	}

	// [H*W, k*k*cin] patches; row order matches the kernel layout [k,k,cin].
	std::vector<float> im2col(const ConvGeometry &g, const float *input)
	{
		const int r = g.ksize / 2;
		const size_t row = static_cast<size_t>(g.ksize) * g.ksize * g.cin;
		std::vector<float> cols(static_cast<size_t>(g.height) * g.width * row, 0.0f);
		for (int y = 0; y < g.height; y++)
			for (int x = 0; x < g.width; x++)
			{
				float *dst = cols.data() + (static_cast<size_t>(y) * g.width + x) * row;
				for (int dy = 0; dy < g.ksize; dy++)
				{
					const int yy = resolve(y + dy - r, g.height, g.wrap);
					if (yy < 0)
						continue;
					for (int dx = 0; dx < g.ksize; dx++)
					{
						const int xx = resolve(x + dx - r, g.width, g.wrap);
						if (xx < 0)
							continue;
						std::copy_n(input + (static_cast<size_t>(yy) * g.width + xx) * g.cin, g.cin,
								dst + static_cast<size_t>(dy * g.ksize + dx) * g.cin);
					}
				}
			}
		return cols;
	}
}

void gelu_forward(const float *__restrict x, float *__restrict y, float *__restrict t, size_t n)
{
	constexpr float sqrt_2_over_pi = 0.7978845608028654f, cubic = 0.044715f;
	for (size_t i = 0; i < n; i++)
	{
		const float v = x[i];
		const float th = tanh_fast(sqrt_2_over_pi * (v + cubic * v * v * v));
		t[i] = th;
		y[i] = 0.5f * v * (1.0f + th);
	}
}

void gemm(const float *a, const float *b, float *c, int m, int n, int p)
{
	std::fill_n(c, static_cast<size_t>(m) * p, 0.0f);
	gemm_acc(a, n, b, c, m, n, p);
}

void gemm_nt_accumulate(const float *dc, const float *b, float *da, int m, int p, int n)
{
	const auto bt = transpose(b, n, p); // [p,n]
	gemm_acc(dc, p, bt.data(), da, m, p, n);
}

void gemm_tn_accumulate(const float *a, const float *dc, float *db, int m, int n, int p)
{
	// db[k,:] += sum_i a[i,k] dc[i,:]; rows of db are blocked by four.
	const auto at = transpose(a, m, n); // [n,m]
	gemm_acc(at.data(), m, dc, db, n, m, p);
}

void conv2d_forward(const ConvGeometry &g, const float *input, const float *kernels, float *out)
{
	const auto cols = im2col(g, input);
	gemm(cols.data(), kernels, out, g.height * g.width, g.ksize * g.ksize * g.cin, g.cout);
}

void conv2d_backward_input(const ConvGeometry &g, const float *dout, const float *kernels, float *dinput)
{
	const int r = g.ksize / 2;
	const int row = g.ksize * g.ksize * g.cin;
	std::vector<float> dcols(static_cast<size_t>(g.height) * g.width * row, 0.0f);
	gemm_nt_accumulate(dout, kernels, dcols.data(), g.height * g.width, g.cout, row);
	// scatter patches back in ascending cell, tap order
	for (int y = 0; y < g.height; y++)
		for (int x = 0; x < g.width; x++)
		{
			const float *src = dcols.data() + (static_cast<size_t>(y) * g.width + x) * row;
			for (int dy = 0; dy < g.ksize; dy++)
			{
				const int yy = resolve(y + dy - r, g.height, g.wrap);
				if (yy < 0)
					continue;
				for (int dx = 0; dx < g.ksize; dx++)
				{
					const int xx = resolve(x + dx - r, g.width, g.wrap);
					if (xx < 0)
						continue;
					float *dst = dinput + (static_cast<size_t>(yy) * g.width + xx) * g.cin;
					const float *s = src + static_cast<size_t>(dy * g.ksize + dx) * g.cin;
					for (int c = 0; c < g.cin; c++)
						dst[c] += s[c];
				}
			}
		}
}

void conv2d_backward_kernels(const ConvGeometry &g, const float *dout, const float *input, float *dkernels)
{
	const auto cols = im2col(g, input);
	gemm_tn_accumulate(cols.data(), dout, dkernels, g.height * g.width, g.ksize * g.ksize * g.cin, g.cout);
}

}
