// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0
//
// Running a linear MNIST classifier as a grid of 8x8 matrix products, each
// executed either exactly or by a trained rule on its own grid.

#pragma once

#include <unca/training.hpp>

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace unca
{

/// Malformed dataset files.
struct DataError : std::runtime_error
{
	using std::runtime_error::runtime_error;
};

inline constexpr int kMnistPixels = 28 * 28;
inline constexpr int kMnistClasses = 10;

struct MnistDataset
{
	Tensor images; // [n,784] in [0,1]
	std::vector<int> labels;

	int size() const { return static_cast<int>(labels.size()); }
	/// First `n` samples (all of them when n exceeds the size).
	MnistDataset head(int n) const;
};

/// Reads an IDX image/label pair; gzip-compressed files are detected by
/// their header and inflated transparently.
MnistDataset load_mnist(const std::filesystem::path &images, const std::filesystem::path &labels);

std::vector<int> argmax_rows(const Tensor &logits);
float accuracy(std::span<const int> predictions, std::span<const int> labels);

struct LinearClassifier
{
	Tensor weights; // [784,10], no bias

	Tensor logits(const Tensor &x) const;
	std::vector<int> predict(const Tensor &x) const { return argmax_rows(logits(x)); }
	float accuracy(const MnistDataset &data) const;
};

struct ClassifierSchedule
{
	int epochs = 5;
	int batch_size = 64;
	float lr = 1e-2f;
};

/// Minibatch Adam on softmax cross-entropy from W = 0. Throws
/// NonFiniteError if the loss diverges.
LinearClassifier train_linear_classifier(const MnistDataset &train, const ClassifierSchedule &schedule, Rng &rng);

inline constexpr int kBlock = 8;

struct BlockJob
{
	int id = 0;
	int i = 0, k = 0, j = 0; // row block of X, inner block, column block of W
	Tensor a;                // [8,8], scaled by 1/scale_a
	Tensor b;                // [8,8], scaled by 1/scale_b
	float scale_a = 1.0f;
	float scale_b = 1.0f;
};

struct BlockPlan
{
	int rows = 0, inner = 0, cols = 0; // unpadded X*W dimensions
	int row_blocks = 0, inner_blocks = 0, col_blocks = 0;
	std::vector<BlockJob> jobs; // ordered by (i, k, j)
};

/// Zero-pads X [b,n] and W [n,m] to multiples of 8 and emits one job per
/// (i,k,j). With `scale`, each block is divided by its max-abs value so the
/// entries lie in [-1,1]; all-zero blocks keep scale 1.
BlockPlan block_decompose(const Tensor &x, const Tensor &w, bool scale = false);

/// Where 8x8 products are computed. The NCA backend runs every job on a
/// fresh grid with the model's MatMul hardware in the fixed layout.
struct Backend
{
	BackendKind kind = BackendKind::Oracle;
	const Model *model = nullptr;
	int steps = 0;
	int height = 32;
	int width = 32;

	static Backend oracle() { return {}; }
	static Backend nca(const Model &model, int steps, int height = 32, int width = 32);
};

struct BlockResult
{
	int job_id = 0;
	Tensor product; // [8,8], unscaled
	float mse = 0.0f; // against the exact product, in the scaled block domain
};

std::vector<BlockResult> execute_blocks(std::span<const BlockJob> jobs, const Backend &backend);
BlockResult execute_block(const BlockJob &job, const Backend &backend);

/// Sums partial products per output block and drops the padding: [rows, cols].
/// Throws ValueError when a job is missing or duplicated.
Tensor aggregate(const BlockPlan &plan, std::span<const BlockResult> results);

struct EmulationMetrics
{
	int samples = 0;
	float emulated_accuracy = 0.0f;
	float reference_accuracy = 0.0f;
	float agreement = 0.0f; // emulated argmax equals reference argmax
	float mean_job_mse = 0.0f;
};

EmulationMetrics aggregate_and_evaluate(const BlockPlan &plan, std::span<const BlockResult> results, std::span<const int> labels,
		const Tensor &reference_logits);

/// One `job_id<TAB>mse` line per job.
void write_job_errors(std::ostream &os, std::span<const BlockResult> results);

}
