// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include <unca/hardware.hpp>

#include <algorithm>
#include <cctype>

namespace unca
{

std::string to_string(TaskKind kind)
{
	switch (kind)
	{
		case TaskKind::Identity:
			return "identity";
		case TaskKind::MatMul:
			return "matmul";
		case TaskKind::Transpose:
			return "transpose";
		case TaskKind::Rotate90:
			return "rotate";
	}
	return "?";
}

TaskKind parse_task_kind(const std::string &text)
{
	std::string t = text;
	std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
	if (t == "identity" || t == "copy" || t == "translate")
		return TaskKind::Identity;
	if (t == "matmul")
		return TaskKind::MatMul;
	if (t == "transpose")
		return TaskKind::Transpose;
	if (t == "rotate" || t == "rotate90")
		return TaskKind::Rotate90;
	throw ValueError("unknown task kind '" + text + "'");
}

int arity(TaskKind kind)
{
	return kind == TaskKind::MatMul ? 2 : 1;
}

bool Placement::overlaps(const Placement &o) const
{
	return row < o.row + o.rows && o.row < row + rows && col < o.col + o.cols && o.col < col + cols;
}

bool Placement::in_bounds(int height, int width) const
{
	return rows >= 1 && cols >= 1 && row >= 0 && col >= 0 && row + rows <= height && col + cols <= width;
}

void check_in_bounds(const Placement &p, int height, int width)
{
	if (!p.in_bounds(height, width))
		throw OutOfBoundsError("region '" + p.tag + "' at (" + std::to_string(p.row) + "," + std::to_string(p.col) + ") size "
				+ std::to_string(p.rows) + "x" + std::to_string(p.cols) + " does not fit a " + std::to_string(height) + "x"
				+ std::to_string(width) + " grid");
}

MonolithicHardware build_monolithic(const std::string &task_id, int height, int width, int channels, float init_scale, Rng &rng)
{
	if (height < 1 || width < 1 || channels < 1)
		throw ValueError("build_monolithic: dimensions must be positive");
	MonolithicHardware hw { task_id, Tensor::zeros( { height, width, channels }, true) };
	for (float &v : hw.field.data())
		v = uniform(rng, -init_scale, init_scale);
	return hw;
}

ModularComponents ModularComponents::init(int channels, std::span<const TaskKind> kinds, float init_scale, Rng &rng)
{
	auto vec = [&]() {
		Tensor t = Tensor::zeros( { channels }, true);
		for (float &v : t.data())
			v = uniform(rng, -init_scale, init_scale);
		return t;
	};
	ModularComponents c;
	c.input_embed = vec();
	c.output_embed = vec();
	for (TaskKind k : kinds)
		c.task_embeds[k] = vec();
	return c;
}

ModularComponents ModularComponents::clone() const
{
	ModularComponents c;
	c.input_embed = input_embed.clone_param();
	c.output_embed = output_embed.clone_param();
	for (const auto &[k, t] : task_embeds)
		c.task_embeds[k] = t.clone_param();
	return c;
}

Tensor assemble_modular(const ModularComponents &components, TaskKind kind, std::span<const Placement> placements, int height, int width)
{
	const auto it = components.task_embeds.find(kind);
	if (it == components.task_embeds.end())
		throw ValueError("assemble_modular: no task embedding for '" + to_string(kind) + "'");
	if (height < 1 || width < 1)
		throw ValueError("assemble_modular: grid dimensions must be positive");
	for (const auto &p : placements)
		check_in_bounds(p, height, width);

	// Per-cell coefficients of (task, input, output); the field is their
	// product with the stacked embedding vectors.
	const int cells = height * width;
	Tensor coeff = Tensor::zeros( { cells, 3 });
	auto cd = coeff.data();
	for (int c = 0; c < cells; c++)
		cd[c * 3] = 1.0f;
	for (const auto &p : placements)
	{
		const int slot = p.role == Role::Input ? 1 : 2;
		for (int r = p.row; r < p.row + p.rows; r++)
			for (int c = p.col; c < p.col + p.cols; c++)
				cd[(r * width + c) * 3 + slot] += 1.0f;
	}
	Tensor basis = ops::stack( { it->second, components.input_embed, components.output_embed });
	return ops::reshape(ops::matmul(coeff, basis), { height, width, components.channels() });
}

}
