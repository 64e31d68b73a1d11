// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-file checkpoint container. All integers and float payloads are
// little-endian:
//
//   "UNCACKPT"  u32 version
//   u32 len, config text
//   u32 count, then per tensor: u32 len, name, u32 ndim, u32 dims[ndim],
//                               u64 payload bytes, float32 payload
//   u32 count, then per counter: u32 len, name, i64 value

#pragma once

#include <unca/config.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace unca
{

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Unreadable, truncated or otherwise corrupt checkpoint.
struct CheckpointError : std::runtime_error
{
	using std::runtime_error::runtime_error;
};

struct NamedTensor
{
	std::string name;
	std::vector<int> shape;
	std::vector<float> data;
};

struct Checkpoint
{
	std::uint32_t version = kCheckpointVersion;
	std::string config; // RunConfig::to_text() of the producing run
	std::vector<NamedTensor> tensors;
	std::vector<std::pair<std::string, std::int64_t>> counters;

	const NamedTensor *tensor(const std::string &name) const;
	const std::int64_t *counter(const std::string &name) const;
};

std::vector<std::uint8_t> serialize(const Checkpoint &ckpt);
Checkpoint deserialize(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path);
Checkpoint load_checkpoint(const std::filesystem::path &path);

/// Parameters under their registry names, the hardware projection as
/// "projection", Adam moments as "adam.m/<param>" and "adam.v/<param>",
/// and counters "updates_done", "scope" and "adam.t/<param>".
Checkpoint make_checkpoint(const Trainer &trainer, const RunConfig &config);
/// Model-only checkpoint (no optimizer state).
Checkpoint make_checkpoint(const Model &model, const RunConfig &config);

struct Restored
{
	RunConfig config;
	Model model;
	std::int64_t updates_done = 0;
	TrainScope scope = TrainScope::Full;
	std::map<std::string, AdamState> optimizer;
};

/// Rebuilds the model from the config echo and overwrites every parameter
/// by name. Shape mismatches and unknown tensors throw CheckpointError.
Restored restore(const Checkpoint &ckpt);

/// Trainer positioned exactly where the checkpointed one stopped. `config`
/// overrides the stored training settings (e.g. a longer update budget).
Trainer resume(Restored restored, const TrainConfig &config);
Trainer resume(Restored restored);

}
