// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0
//
// The shared cellular-automaton rule. Each cell perceives its neighbourhood
// of the mutable state through learned filters, derives attention weights
// over N pathway networks from its own hardware vector, and adds the
// attention-weighted mixture of pathway outputs to its state.

#pragma once

#include <unca/random.hpp>
#include <unca/tensor.hpp>

#include <string>
#include <vector>

namespace unca
{

enum class Activation
{
	Gelu,
	Tanh
};

struct RuleConfig
{
	int mutable_channels = 16;
	int hardware_channels = 8;
	int perception_channels = 48;
	int kernel_size = 3;
	int pathways = 8;
	int hidden = 64;
	float temperature = 1.0f;
	Activation activation = Activation::Gelu;
	Padding padding = Padding::Zero;
	bool stochastic_update = false;
	float fire_rate = 0.5f;

	void validate() const;
};

/// Learned parameters of the shared rule. The N pathway MLPs are packed:
/// pathway h owns columns [h*hidden, (h+1)*hidden) of hidden_w/hidden_b and
/// the same rows of out_w, plus row h of out_b.
struct RuleParams
{
	RuleConfig config;
	Tensor perception; // [k,k,C_mut,C_perc], no bias
	Tensor hidden_w;   // [C_perc, N*hidden]
	Tensor hidden_b;   // [N*hidden]
	Tensor out_w;      // [N*hidden, C_mut]
	Tensor out_b;      // [N, C_mut]
	Tensor embed;      // [C_hw, N]

	/// Fan-in scaled uniform init; output layers start at zero so the
	/// untrained rule leaves every grid unchanged.
	static RuleParams init(const RuleConfig &config, Rng &rng);

	std::vector<std::pair<std::string, Tensor *>> named();
	void set_trainable(bool trainable);
	RuleParams clone() const;
};

struct GridState
{
	Tensor mutable_state; // [H,W,C_mut]
	Tensor hardware;      // [H,W,C_hw]

	int height() const { return mutable_state.dim(0); }
	int width() const { return mutable_state.dim(1); }
	void validate() const;
};

GridState make_grid(int height, int width, const RuleConfig &config, Tensor hardware);

/// [H,W,C_mut] -> [H,W,C_perc]
Tensor perceive(const Tensor &state, const RuleParams &params);

/// Attention weights softmax(I * W_embed / T) of one hardware vector.
std::vector<float> attention_weights(std::span<const float> hardware, const RuleParams &params);

/// Output V_h of pathway h for one perception vector.
std::vector<float> pathway_output(std::span<const float> perception, int pathway, const RuleParams &params);

/// Per-cell update dS = sum_h alpha_h V_h, evaluated directly without the
/// tape. Serves as the reference for the batched step.
Tensor update_cell(std::span<const float> perception, std::span<const float> hardware, const RuleParams &params);

/// Hardware-derived quantities that stay constant for a whole rollout.
struct HardwareAttention
{
	Tensor alpha;      // [HW, N]
	Tensor alpha_rep;  // [HW, N*hidden]
	Tensor alpha_bias; // [HW, C_mut] = alpha * out_b
};

HardwareAttention attend(const Tensor &hardware, const RuleParams &params);

/// One synchronous update. rng is only consulted when stochastic_update is on.
GridState step(const GridState &grid, const RuleParams &params, Rng *rng = nullptr);
GridState step(const GridState &grid, const RuleParams &params, const HardwareAttention &attention, Rng *rng = nullptr);

/// Applies `steps` updates and returns only the final state.
GridState run_steps(const GridState &grid, const RuleParams &params, int steps, Rng *rng = nullptr);

/// Uniform draw from [steps - steps/4, steps].
int sample_eval_index(int steps, Rng &rng);

struct Rollout
{
	std::vector<GridState> trajectory; // steps + 1 states, initial first
	int eval_index = 0;
};

Rollout rollout(const GridState &grid, const RuleParams &params, int steps, Rng &rng);

}
