// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include <unca/export.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace unca
{

namespace
{

std::uint8_t to_byte(float unit)
{
	return static_cast<std::uint8_t>(std::lround(std::clamp(unit, 0.0f, 1.0f) * 255.0f));
}

std::ofstream open(const std::filesystem::path &path)
{
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out)
		throw std::runtime_error("cannot write '" + path.string() + "'");
	return out;
}

}

void write_value_pgm(std::ostream &os, const GridState &grid)
{
	const int h = grid.height(), w = grid.width(), c = grid.mutable_state.dim(2);
	const auto s = grid.mutable_state.data();
	os << "P5\n" << w << ' ' << h << "\n255\n";
	for (int i = 0; i < h * w; i++)
		os.put(static_cast<char>(to_byte((s[static_cast<std::size_t>(i) * c + kValueChannel] + 1.0f) * 0.5f)));
}

void write_value_csv(std::ostream &os, const GridState &grid)
{
	const int h = grid.height(), w = grid.width(), c = grid.mutable_state.dim(2);
	const auto s = grid.mutable_state.data();
	os << std::setprecision(9);
	for (int r = 0; r < h; r++)
	{
		for (int col = 0; col < w; col++)
			os << (col ? "," : "") << s[(static_cast<std::size_t>(r) * w + col) * c + kValueChannel];
		os << '\n';
	}
}

Tensor project_hardware(const Tensor &hardware, const Tensor &projection)
{
	if (hardware.rank() != 3 || projection.shape() != Shape { hardware.dim(2), 3 })
		throw ShapeError("project_hardware: expected [H,W,C] field and [C,3] projection, got " + shape_str(hardware.shape()) + " and "
				+ shape_str(projection.shape()));
	const int h = hardware.dim(0), w = hardware.dim(1);
	NoGradGuard guard;
	return ops::reshape(ops::matmul(ops::reshape(hardware, { h * w, hardware.dim(2) }), projection), { h, w, 3 });
}

void write_hardware_ppm(std::ostream &os, const Tensor &projected)
{
	const int h = projected.dim(0), w = projected.dim(1);
	const auto p = projected.data();
	float lo[3], hi[3];
	for (int k = 0; k < 3; k++)
	{
		lo[k] = hi[k] = p[k];
		for (int i = 0; i < h * w; i++)
		{
			lo[k] = std::min(lo[k], p[static_cast<std::size_t>(i) * 3 + k]);
			hi[k] = std::max(hi[k], p[static_cast<std::size_t>(i) * 3 + k]);
		}
	}
	os << "P6\n" << w << ' ' << h << "\n255\n";
	for (int i = 0; i < h * w; i++)
		for (int k = 0; k < 3; k++)
		{
			const float v = p[static_cast<std::size_t>(i) * 3 + k];
			os.put(static_cast<char>(hi[k] > lo[k] ? to_byte((v - lo[k]) / (hi[k] - lo[k])) : std::uint8_t { 128 }));
		}
}

void write_hardware_csv(std::ostream &os, const Tensor &projected)
{
	const int h = projected.dim(0), w = projected.dim(1);
	const auto p = projected.data();
	os << "row,col,p0,p1,p2\n" << std::setprecision(9);
	for (int r = 0; r < h; r++)
		for (int c = 0; c < w; c++)
		{
			const std::size_t i = (static_cast<std::size_t>(r) * w + c) * 3;
			os << r << ',' << c << ',' << p[i] << ',' << p[i + 1] << ',' << p[i + 2] << '\n';
		}
}

SnapshotFiles export_grid(const Model &model, const TrainConfig &config, TaskKind kind, std::uint64_t instance_seed, int step,
		const std::filesystem::path &prefix)
{
	if (step < 0)
		throw ValueError("export-grid: step must be non-negative");
	if (config.hardware_mode == HardwareMode::Monolithic && !model.monolithic.contains(monolithic_task_id(kind, config.placement)))
		throw ValueError("export-grid: model has no monolithic hardware for '" + monolithic_task_id(kind, config.placement) + "'");
	NoGradGuard guard;
	Rng rng = derive_rng(instance_seed, 0);
	const TaskInstance inst = make_instance(kind, config.distribution, config.height, config.width, config.placement, config.steps,
			model.binding(kind, config.placement), model.rule.config.mutable_channels, rng);
	const GridState grid = run_steps(inst.initial, model.rule, step, &rng);
	const Tensor projected = project_hardware(grid.hardware, model.projection);

	const std::string base = prefix.string();
	SnapshotFiles files { base + "_value.pgm", base + "_value.csv", base + "_hardware.ppm", base + "_hardware.csv" };
	{
		auto out = open(files.value_pgm);
		write_value_pgm(out, grid);
	}
	{
		auto out = open(files.value_csv);
		write_value_csv(out, grid);
	}
	{
		auto out = open(files.hardware_ppm);
		write_hardware_ppm(out, projected);
	}
	{
		auto out = open(files.hardware_csv);
		write_hardware_csv(out, projected);
	}
	return files;
}

}
