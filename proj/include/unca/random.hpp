// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace unca
{

using Rng = std::mt19937_64;

/// Independent stream derived from a base seed and a stream index.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream)
{
	std::seed_seq seq { static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(stream),
		static_cast<std::uint32_t>(stream >> 32) };
	return Rng(seq);
}

inline float uniform(Rng &rng, float lo, float hi)
{
	return std::uniform_real_distribution<float>(lo, hi)(rng);
}

inline float gaussian(Rng &rng, float mean, float stddev)
{
	return std::normal_distribution<float>(mean, stddev)(rng);
}

inline int uniform_int(Rng &rng, int lo, int hi_inclusive)
{
	return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng);
}

}
