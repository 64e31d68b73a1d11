// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0
//
// Matrix task instances: sampling, symbolic targets, grid encoding and loss
// masks. Matrix entries live in mutable channel 0 (the value channel).

#pragma once

#include <unca/hardware.hpp>
#include <unca/nca.hpp>

#include <optional>
#include <span>
#include <vector>

namespace unca
{

inline constexpr int kValueChannel = 0;

struct Distribution
{
	enum class Kind
	{
		Uniform,
		Gaussian,
		SpatiallyCorrelated,
		Sparse
	};

	Kind kind = Kind::Uniform;
	float low = -1.0f;
	float high = 1.0f;
	float sigma = 0.5f;
	int correlation_width = 5;
	float sparsity = 0.9f; // fraction of zeroed entries

	void validate() const;
	static Distribution parse(const std::string &name);
};

std::string to_string(Distribution::Kind kind);

/// [rows, cols] sample; every value clamped to [-1, 1].
Tensor sample_matrix(const Distribution &dist, int rows, int cols, Rng &rng);

Tensor transpose(const Tensor &m);
/// Clockwise quarter turn: out[i][j] = m[rows-1-j][i].
Tensor rotate90(const Tensor &m);
Tensor matmul_exact(const Tensor &a, const Tensor &b);

/// Output shape of `kind` for the given input shapes (each [rows, cols]).
std::pair<int, int> output_shape(TaskKind kind, std::span<const std::pair<int, int>> inputs);
Tensor symbolic_target(TaskKind kind, std::span<const Tensor> inputs);

/// Copy of `grid` with `matrix` written into the value channel at `placement`.
GridState encode_region(const GridState &grid, const Tensor &matrix, const Placement &placement);
/// Writes in place into a [H,W,C] mutable field that is not part of a graph.
void encode_region_inplace(Tensor &mutable_state, const Tensor &matrix, const Placement &placement);
Tensor decode_region(const GridState &grid, const Placement &placement);
Tensor decode_region(const Tensor &field, const Placement &placement);

/// 1 on the union of output placements, 0 elsewhere.
Tensor build_mask(std::span<const Placement> placements, int height, int width);

enum class HardwareMode
{
	Monolithic,
	Modular
};

enum class PlacementMode
{
	Fixed,
	Random
};

struct PlacementPolicy
{
	PlacementMode mode = PlacementMode::Fixed;
	int matrix_size = 4;  // fixed mode, square matrices
	int margin = -1;      // fixed mode, distance from the grid edge; -1 = min(H,W)/8
	bool reversed = false; // fixed mode, swap the input and output sides
	int gap = 0;          // fixed mode, unary tasks: rows between input and output; -1 = opposite corners
	int min_size = 4;     // random mode, inclusive extent range
	int max_size = 8;
	int copies = 1;       // random mode, number of Identity outputs
	int max_retries = 1000;
};

/// Canonical placements for a fixed-layout instance.
std::vector<Placement> fixed_layout(TaskKind kind, int height, int width, int size, int margin = -1, bool reversed = false, int gap = 0);

struct HardwareBinding
{
	HardwareMode mode = HardwareMode::Modular;
	const ModularComponents *modular = nullptr;
	const MonolithicHardware *monolithic = nullptr;
};

struct TaskInstance
{
	TaskKind kind = TaskKind::Identity;
	GridState initial;
	Tensor target; // [H,W] expected value channel on output regions
	Tensor mask;   // [H,W]
	int steps = 0;
	std::vector<Placement> placements;
	std::vector<Tensor> inputs;
	Tensor expected;

	const Tensor &hardware() const { return initial.hardware; }
};

TaskInstance make_instance(TaskKind kind, const Distribution &dist, int height, int width, const PlacementPolicy &policy, int steps,
		const HardwareBinding &hardware, int mutable_channels, Rng &rng);

}
