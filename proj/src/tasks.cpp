// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include <unca/tasks.hpp>

#include <algorithm>
#include <cmath>

namespace unca
{

void Distribution::validate() const
{
	switch (kind)
	{
		case Kind::Uniform:
			if (!(low < high) || low < -1.0f || high > 1.0f)
				throw ValueError("uniform distribution needs -1 <= low < high <= 1");
			break;
		case Kind::Gaussian:
			if (!(sigma > 0.0f))
				throw ValueError("gaussian distribution needs sigma > 0");
			break;
		case Kind::SpatiallyCorrelated:
			if (correlation_width < 1)
				throw ValueError("correlated distribution needs correlation width >= 1");
			break;
		case Kind::Sparse:
			if (!(sparsity >= 0.0f && sparsity < 1.0f))
				throw ValueError("sparse distribution needs 0 <= sparsity < 1");
			break;
	}
}

Distribution Distribution::parse(const std::string &name)
{
	Distribution d;
	if (name == "uniform")
		d.kind = Kind::Uniform;
	else if (name == "gaussian")
		d.kind = Kind::Gaussian;
	else if (name == "correlated")
		d.kind = Kind::SpatiallyCorrelated;
	else if (name == "sparse")
		d.kind = Kind::Sparse;
	else
		throw ValueError("unknown distribution '" + name + "'");
	return d;
}

std::string to_string(Distribution::Kind kind)
{
	switch (kind)
	{
		case Distribution::Kind::Uniform:
			return "uniform";
		case Distribution::Kind::Gaussian:
			return "gaussian";
		case Distribution::Kind::SpatiallyCorrelated:
			return "correlated";
		case Distribution::Kind::Sparse:
			return "sparse";
	}
	return "?";
}

Tensor sample_matrix(const Distribution &dist, int rows, int cols, Rng &rng)
{
	dist.validate();
	if (rows < 1 || cols < 1)
		throw ValueError("sample_matrix: dimensions must be positive");
	Tensor m = Tensor::zeros( { rows, cols });
	auto d = m.data();
	switch (dist.kind)
	{
		case Distribution::Kind::Uniform:
			for (float &v : d)
				v = uniform(rng, dist.low, dist.high);
			break;
		case Distribution::Kind::Gaussian:
			for (float &v : d)
				v = gaussian(rng, 0.0f, dist.sigma);
			break;
		case Distribution::Kind::SpatiallyCorrelated:
		{
			// box-filtered white noise over a margin so every output sees a full window
			const int w = dist.correlation_width;
			const int nr = rows + w - 1, nc = cols + w - 1;
			std::vector<float> noise(static_cast<std::size_t>(nr) * nc);
			for (float &v : noise)
				v = uniform(rng, -1.0f, 1.0f);
			float peak = 0.0f;
			for (int r = 0; r < rows; r++)
				for (int c = 0; c < cols; c++)
				{
					float acc = 0.0f;
					for (int i = 0; i < w; i++)
						for (int j = 0; j < w; j++)
							acc += noise[(r + i) * nc + c + j];
					d[r * cols + c] = acc / static_cast<float>(w * w);
					peak = std::max(peak, std::abs(d[r * cols + c]));
				}
			if (peak > 0.0f)
				for (float &v : d)
					v /= peak;
			break;
		}
		case Distribution::Kind::Sparse:
		{
			std::bernoulli_distribution keep(1.0 - dist.sparsity);
			for (float &v : d)
			{
				const float value = uniform(rng, -1.0f, 1.0f);
				v = keep(rng) ? value : 0.0f;
			}
			break;
		}
	}
	for (float &v : d)
		v = std::clamp(v, -1.0f, 1.0f);
	return m;
}

namespace
{
	void require_matrix(const Tensor &m, const char *what)
	{
		if (m.rank() != 2)
			throw ShapeError(std::string(what) + ": expected a matrix, got shape " + shape_str(m.shape()));
	}
}

Tensor transpose(const Tensor &m)
{
	require_matrix(m, "transpose");
	const int r = m.dim(0), c = m.dim(1);
	Tensor out = Tensor::zeros( { c, r });
	auto s = m.data();
	auto d = out.data();
	for (int i = 0; i < c; i++)
		for (int j = 0; j < r; j++)
			d[i * r + j] = s[j * c + i];
	return out;
}

Tensor rotate90(const Tensor &m)
{
	require_matrix(m, "rotate90");
	const int r = m.dim(0), c = m.dim(1);
	Tensor out = Tensor::zeros( { c, r });
	auto s = m.data();
	auto d = out.data();
	for (int i = 0; i < c; i++)
		for (int j = 0; j < r; j++)
			d[i * r + j] = s[(r - 1 - j) * c + i];
	return out;
}

Tensor matmul_exact(const Tensor &a, const Tensor &b)
{
	require_matrix(a, "matmul");
	require_matrix(b, "matmul");
	return ops::matmul(a.clone(), b.clone());
}

std::pair<int, int> output_shape(TaskKind kind, std::span<const std::pair<int, int>> inputs)
{
	if (static_cast<int>(inputs.size()) != arity(kind))
		throw ShapeError(to_string(kind) + " expects " + std::to_string(arity(kind)) + " input(s), got " + std::to_string(inputs.size()));
	switch (kind)
	{
		case TaskKind::Identity:
			return inputs[0];
		case TaskKind::Transpose:
		case TaskKind::Rotate90:
			return { inputs[0].second, inputs[0].first };
		case TaskKind::MatMul:
			if (inputs[0].second != inputs[1].first)
				throw ShapeError("matmul: inner dimensions differ (" + std::to_string(inputs[0].second) + " vs " + std::to_string(inputs[1].first) + ")");
			return { inputs[0].first, inputs[1].second };
	}
	throw ShapeError("unknown task kind");
}

Tensor symbolic_target(TaskKind kind, std::span<const Tensor> inputs)
{
	std::vector<std::pair<int, int>> shapes;
	for (const auto &m : inputs)
	{
		require_matrix(m, "symbolic_target");
		shapes.emplace_back(m.dim(0), m.dim(1));
	}
	output_shape(kind, shapes);
	switch (kind)
	{
		case TaskKind::Identity:
			return inputs[0].clone();
		case TaskKind::Transpose:
			return transpose(inputs[0]);
		case TaskKind::Rotate90:
			return rotate90(inputs[0]);
		case TaskKind::MatMul:
			return matmul_exact(inputs[0], inputs[1]);
	}
	throw ShapeError("unknown task kind");
}

void encode_region_inplace(Tensor &field, const Tensor &matrix, const Placement &p)
{
	require_matrix(matrix, "encode_region");
	if (field.rank() != 3)
		throw ShapeError("encode_region: field must be [H,W,C]");
	check_in_bounds(p, field.dim(0), field.dim(1));
	if (matrix.dim(0) != p.rows || matrix.dim(1) != p.cols)
		throw ShapeError("encode_region: matrix " + shape_str(matrix.shape()) + " does not match region '" + p.tag + "' of size "
				+ std::to_string(p.rows) + "x" + std::to_string(p.cols));
	const int w = field.dim(1), ch = field.dim(2);
	auto d = field.data();
	auto m = matrix.data();
	for (int r = 0; r < p.rows; r++)
		for (int c = 0; c < p.cols; c++)
			d[((p.row + r) * w + p.col + c) * ch + kValueChannel] = m[r * p.cols + c];
}

GridState encode_region(const GridState &grid, const Tensor &matrix, const Placement &placement)
{
	GridState out { grid.mutable_state.clone(), grid.hardware };
	encode_region_inplace(out.mutable_state, matrix, placement);
	return out;
}

Tensor decode_region(const Tensor &field, const Placement &p)
{
	if (field.rank() != 3)
		throw ShapeError("decode_region: field must be [H,W,C]");
	check_in_bounds(p, field.dim(0), field.dim(1));
	const int w = field.dim(1), ch = field.dim(2);
	Tensor m = Tensor::zeros( { p.rows, p.cols });
	auto d = field.data();
	auto out = m.data();
	for (int r = 0; r < p.rows; r++)
		for (int c = 0; c < p.cols; c++)
			out[r * p.cols + c] = d[((p.row + r) * w + p.col + c) * ch + kValueChannel];
	return m;
}

Tensor decode_region(const GridState &grid, const Placement &placement)
{
	return decode_region(grid.mutable_state, placement);
}

Tensor build_mask(std::span<const Placement> placements, int height, int width)
{
	Tensor mask = Tensor::zeros( { height, width });
	auto d = mask.data();
	bool any = false;
	for (const auto &p : placements)
	{
		if (p.role != Role::Output)
			continue;
		check_in_bounds(p, height, width);
		any = true;
		for (int r = p.row; r < p.row + p.rows; r++)
			for (int c = p.col; c < p.col + p.cols; c++)
				d[r * width + c] = 1.0f;
	}
	if (!any)
		throw ValueError("build_mask: no output placements, the loss mask would be empty");
	return mask;
}

std::vector<Placement> fixed_layout(TaskKind kind, int height, int width, int size, int margin, bool reversed, int gap)
{
	const int q = margin >= 0 ? margin : std::max(1, std::min(height, width) / 8);
	const int n = size;
	std::vector<Placement> ps;
	if (kind == TaskKind::MatMul)
	{
		ps.push_back( { Role::Input, q, q, n, n, "a" });
		ps.push_back( { Role::Input, q, width - q - n, n, n, "b" });
		ps.push_back( { Role::Output, height - q - n, (width - n) / 2, n, n, "c" });
		if (reversed)
			for (auto &p : ps)
				p.row = height - p.row - p.rows;
	}
	else
	{
		// input in the top-right corner; output either mirrored across the
		// main diagonal or stacked below the input
		Placement in { Role::Input, q, width - q - n, n, n, "in" };
		Placement out = gap < 0 ? Placement { Role::Output, height - q - n, q, n, n, "out" }
				: Placement { Role::Output, q + n + gap, width - q - n, n, n, "out" };
		if (reversed)
			std::swap(in.row, out.row), std::swap(in.col, out.col);
		ps = { in, out };
	}
	for (const auto &p : ps)
		check_in_bounds(p, height, width);
	for (std::size_t i = 0; i < ps.size(); i++)
		for (std::size_t j = i + 1; j < ps.size(); j++)
			if (ps[i].overlaps(ps[j]))
				throw ValueError("fixed_layout: grid too small for " + std::to_string(n) + "x" + std::to_string(n) + " regions");
	return ps;
}

namespace
{
	std::vector<std::pair<int, int>> random_shapes(TaskKind kind, const PlacementPolicy &policy, Rng &rng)
	{
		auto extent = [&]() { return uniform_int(rng, policy.min_size, policy.max_size); };
		if (kind == TaskKind::MatMul)
		{
			const int m = extent(), k = extent(), p = extent();
			return { { m, k }, { k, p } };
		}
		return { { extent(), extent() } };
	}

	std::vector<Placement> random_layout(TaskKind kind, int height, int width, const PlacementPolicy &policy, Rng &rng)
	{
		if (policy.min_size < 1 || policy.max_size < policy.min_size)
			throw ValueError("placement policy: need 1 <= min_size <= max_size");
		if (policy.copies < 1 || (policy.copies > 1 && kind != TaskKind::Identity))
			throw ValueError("placement policy: multiple outputs are only defined for identity");
		for (int attempt = 0; attempt < policy.max_retries; attempt++)
		{
			const auto in_shapes = random_shapes(kind, policy, rng);
			const auto out_shape = output_shape(kind, in_shapes);
			std::vector<Placement> ps;
			auto place = [&](Role role, std::pair<int, int> shape, std::string tag) {
				if (shape.first > height || shape.second > width)
					return false;
				Placement p { role, uniform_int(rng, 0, height - shape.first), uniform_int(rng, 0, width - shape.second), shape.first,
					shape.second, std::move(tag) };
				for (const auto &q : ps)
					if (q.overlaps(p))
						return false;
				ps.push_back(std::move(p));
				return true;
			};
			bool ok = true;
			for (std::size_t i = 0; ok && i < in_shapes.size(); i++)
				ok = place(Role::Input, in_shapes[i], "in" + std::to_string(i));
			for (int i = 0; ok && i < policy.copies; i++)
				ok = place(Role::Output, out_shape, "out" + std::to_string(i));
			if (ok)
				return ps;
		}
		throw ValueError("make_instance: no non-overlapping placement found after " + std::to_string(policy.max_retries) + " attempts");
	}
}

TaskInstance make_instance(TaskKind kind, const Distribution &dist, int height, int width, const PlacementPolicy &policy, int steps,
		const HardwareBinding &hardware, int mutable_channels, Rng &rng)
{
	if (steps < 1)
		throw ValueError("make_instance: T_steps must be at least 1");
	if (hardware.mode == HardwareMode::Monolithic && policy.mode == PlacementMode::Random)
		throw ValueError("make_instance: randomized placement requires modular hardware; monolithic hardware is bound to a fixed layout");

	TaskInstance inst;
	inst.kind = kind;
	inst.steps = steps;
	inst.placements = policy.mode == PlacementMode::Fixed ? fixed_layout(kind, height, width, policy.matrix_size, policy.margin, policy.reversed, policy.gap)
			: random_layout(kind, height, width, policy, rng);

	Tensor field = Tensor::zeros( { height, width, mutable_channels });
	for (const auto &p : inst.placements)
		if (p.role == Role::Input)
		{
			inst.inputs.push_back(sample_matrix(dist, p.rows, p.cols, rng));
			encode_region_inplace(field, inst.inputs.back(), p);
		}
	inst.expected = symbolic_target(kind, inst.inputs);

	Tensor target3 = Tensor::zeros( { height, width, 1 });
	for (const auto &p : inst.placements)
		if (p.role == Role::Output)
			encode_region_inplace(target3, inst.expected, p);
	inst.target = ops::reshape(target3, { height, width });
	inst.mask = build_mask(inst.placements, height, width);

	Tensor hw;
	if (hardware.mode == HardwareMode::Modular)
	{
		if (hardware.modular == nullptr)
			throw ValueError("make_instance: modular mode without components");
		hw = assemble_modular(*hardware.modular, kind, inst.placements, height, width);
	}
	else
	{
		if (hardware.monolithic == nullptr)
			throw ValueError("make_instance: monolithic mode without a hardware field");
		hw = hardware.monolithic->field;
		if (hw.dim(0) != height || hw.dim(1) != width)
			throw ShapeError("make_instance: monolithic hardware " + shape_str(hw.shape()) + " does not match the grid");
	}
	inst.initial = GridState { field, hw };
	inst.initial.validate();
	return inst;
}

}
