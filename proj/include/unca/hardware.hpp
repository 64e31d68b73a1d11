// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0
//
// Immutable hardware fields. Monolithic hardware is a learned [H,W,C_hw]
// field bound to one task layout. Modular hardware is assembled per instance
// from learned input/output/task embedding vectors.

#pragma once

#include <unca/random.hpp>
#include <unca/tensor.hpp>

#include <map>
#include <span>
#include <string>
#include <vector>

namespace unca
{

enum class TaskKind
{
	Identity,
	MatMul,
	Transpose,
	Rotate90
};

inline constexpr TaskKind kAllTaskKinds[] = { TaskKind::Identity, TaskKind::MatMul, TaskKind::Transpose, TaskKind::Rotate90 };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string &text);
int arity(TaskKind kind);

enum class Role
{
	Input,
	Output
};

struct Placement
{
	Role role = Role::Input;
	int row = 0;
	int col = 0;
	int rows = 0;
	int cols = 0;
	std::string tag;

	bool contains(int r, int c) const { return r >= row && r < row + rows && c >= col && c < col + cols; }
	bool overlaps(const Placement &other) const;
	bool in_bounds(int height, int width) const;
};

struct OutOfBoundsError : std::out_of_range
{
	using std::out_of_range::out_of_range;
};

void check_in_bounds(const Placement &p, int height, int width);

struct MonolithicHardware
{
	std::string task_id;
	Tensor field; // [H,W,C_hw], learnable
};

/// Fresh learnable field initialized uniformly in [-init_scale, init_scale].
MonolithicHardware build_monolithic(const std::string &task_id, int height, int width, int channels, float init_scale, Rng &rng);

struct ModularComponents
{
	Tensor input_embed;  // [C_hw]
	Tensor output_embed; // [C_hw]
	std::map<TaskKind, Tensor> task_embeds;

	static ModularComponents init(int channels, std::span<const TaskKind> kinds, float init_scale, Rng &rng);
	int channels() const { return input_embed.dim(0); }
	ModularComponents clone() const;
};

/// task embedding on every cell, plus input_embed on each input placement and
/// output_embed on each output placement. Differentiable in the components.
Tensor assemble_modular(const ModularComponents &components, TaskKind kind, std::span<const Placement> placements, int height, int width);

}
