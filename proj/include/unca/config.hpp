// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a flat `key = value` file with `#` comments. Every key
// has a declared type; unknown keys and ill-typed values are rejected.

#pragma once

#include <unca/emulation.hpp>
#include <unca/training.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace unca
{

struct ConfigError : ValueError
{
	ConfigError(const std::string &message, int line = 0);
	int line;
};

struct EmulationSettings
{
	std::string mnist_dir = "data/mnist";
	int samples = 0; // test images to emulate; 0 = all
	int steps = 0;   // rollout length per block job; 0 = train.steps
	bool scale = true;
	int grid = 32;
	std::uint64_t classifier_seed = 0;
	ClassifierSchedule classifier;
};

struct RunConfig
{
	RuleConfig rule;
	TrainConfig train;
	EmulationSettings emulation;

	/// Key, type name and one-line description of every setting.
	struct Key
	{
		const char *name;
		const char *type;
		const char *help;
	};
	static const std::vector<Key> &schema();

	void set(const std::string &key, const std::string &value);
	std::string get(const std::string &key) const;

	/// Applies `key = value` lines on top of the current values.
	void merge(const std::string &text);
	static RunConfig parse(const std::string &text);
	static RunConfig load(const std::filesystem::path &path);

	/// Every key with its resolved value, in schema order. Floats are written
	/// in shortest round-trip form so parse(to_text()) reproduces the config.
	std::string to_text() const;

	void validate() const;
};

}
