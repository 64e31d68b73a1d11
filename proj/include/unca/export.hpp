// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0
//
// Static grid snapshots: the value channel as a binary PGM, the hardware
// field through the model's [C_hw,3] projection as a binary PPM, and both
// as CSV.

#pragma once

#include <unca/training.hpp>

#include <filesystem>
#include <iosfwd>

namespace unca
{

/// Value channel clamped to [-1,1] and mapped linearly to 0..255.
void write_value_pgm(std::ostream &os, const GridState &grid);
/// One line per row, comma-separated, 9 significant digits.
void write_value_csv(std::ostream &os, const GridState &grid);

/// [H,W,3] projection of the hardware field.
Tensor project_hardware(const Tensor &hardware, const Tensor &projection);
/// Each projected component is min-max normalized over the grid to 0..255;
/// a constant component maps to 128.
void write_hardware_ppm(std::ostream &os, const Tensor &projected);
/// `row,col,p0,p1,p2` per cell after a `row,col,p0,p1,p2` header.
void write_hardware_csv(std::ostream &os, const Tensor &projected);

struct SnapshotFiles
{
	std::filesystem::path value_pgm, value_csv, hardware_ppm, hardware_csv;
};

/// Rolls out a fresh `kind` instance drawn from `instance_seed` for `step`
/// steps and writes the four files next to `prefix`. Deterministic in the
/// model, the seed and the step.
SnapshotFiles export_grid(const Model &model, const TrainConfig &config, TaskKind kind, std::uint64_t instance_seed, int step,
		const std::filesystem::path &prefix);

}
