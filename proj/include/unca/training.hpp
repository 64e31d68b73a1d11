// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0
//
// Joint multi-task training of the shared rule and its hardware, and
// hardware-only fine-tuning with the rule frozen.

#pragma once

#include <unca/adam.hpp>
#include <unca/tasks.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace unca
{

/// Where matrix operations run: symbolically, or as rollouts of a trained model.
enum class BackendKind
{
	Oracle,
	Nca
};

struct TrainConfig
{
	int batch_size = 8;
	int updates = 2000;
	int steps = 16; // T_steps
	float lr_rule = 1e-3f;
	float lr_hardware = 1e-3f;
	float clip_norm = 1.0f;
	AdamHyper adam; // lr is replaced per group by lr_rule / lr_hardware
	std::map<TaskKind, float> mix { { TaskKind::Identity, 1.0f } };
	HardwareMode hardware_mode = HardwareMode::Modular;
	int height = 16;
	int width = 16;
	PlacementPolicy placement;
	Distribution distribution;
	float hardware_init = 0.1f;
	std::uint64_t seed = 0;
	int eval_every = 100; // 0 disables periodic evaluation
	int eval_instances = 16;
	bool strict = true;

	void validate() const;
	std::vector<TaskKind> kinds() const;
};

/// Monolithic hardware is keyed by task id: the kind name, suffixed for the
/// reversed layout.
std::string monolithic_task_id(TaskKind kind, const PlacementPolicy &policy);

/// Everything the rule and hardware learn.
struct Model
{
	RuleParams rule;
	ModularComponents modular;
	std::map<std::string, MonolithicHardware> monolithic;
	Tensor projection; // [C_hw, 3] hardware-to-RGB projection for exports

	static Model init(const RuleConfig &rule_config, const TrainConfig &train_config);
	Model clone() const;
	/// Adds hardware for tasks in `config` that the model does not have yet.
	void ensure_hardware(const TrainConfig &config, Rng &rng);
	HardwareBinding binding(TaskKind kind, const PlacementPolicy &policy) const;
};

struct ParamEntry
{
	std::string name;
	std::string group; // "rule", "io", "task:<kind>" or "mono:<task id>"
	Tensor tensor;
};

/// Named view of a model's parameters partitioned into disjoint groups.
class ParamRegistry
{
public:
	static ParamRegistry of(Model &model);

	void add(std::string name, std::string group, Tensor tensor);
	const std::vector<ParamEntry> &entries() const noexcept { return entries_; }
	const ParamEntry *find(const std::string &name) const;
	std::vector<std::string> groups() const;
	std::vector<ParamEntry> group(const std::string &name) const;

private:
	std::vector<ParamEntry> entries_;
};

bool is_hardware_group(const std::string &group);
std::string task_group(TaskKind kind, const TrainConfig &config);

/// Mean squared error of the value channel over mask cells.
Tensor masked_mse(const GridState &final_state, const Tensor &target, const Tensor &mask);

struct UpdateRecord
{
	std::int64_t update = 0;
	std::map<TaskKind, float> loss; // mean loss of each kind present in the batch
	double wall_ms = 0.0;
};

/// `update_index<TAB>task_kind<TAB>loss<TAB>wall_ms`, one line per kind.
void write_metrics(std::ostream &os, const UpdateRecord &record);

enum class TrainScope
{
	Full,
	HardwareOnly
};

class Trainer
{
public:
	Trainer(Model model, TrainConfig config, TrainScope scope = TrainScope::Full);

	UpdateRecord update();
	std::vector<UpdateRecord> run(int updates, std::ostream *metrics = nullptr);

	/// Mean masked loss at the final step over a fixed, seed-derived set of
	/// instances of `kind`.
	float evaluate(TaskKind kind, int instances) const;
	float evaluate(TaskKind kind) const { return evaluate(kind, config_.eval_instances); }

	Model &model() noexcept { return model_; }
	const Model &model() const noexcept { return model_; }
	const TrainConfig &config() const noexcept { return config_; }
	TrainScope scope() const noexcept { return scope_; }
	std::int64_t updates_done() const noexcept { return updates_done_; }
	std::map<std::string, AdamState> &optimizer() noexcept { return optimizer_; }
	const std::map<std::string, AdamState> &optimizer() const noexcept { return optimizer_; }

	/// Restores a saved position; `optimizer` must cover the trainable params.
	void restore(std::int64_t updates_done, std::map<std::string, AdamState> optimizer);

private:
	bool trainable(const ParamEntry &entry) const;

	Model model_;
	TrainConfig config_;
	TrainScope scope_;
	ParamRegistry registry_;
	std::map<std::string, AdamState> optimizer_;
	std::int64_t updates_done_ = 0;
};

struct TrainResult
{
	Trainer trainer;
	std::vector<UpdateRecord> log;
};

TrainResult train_joint(const RuleConfig &rule_config, const TrainConfig &config, std::ostream *metrics = nullptr);

/// Throws ValueError unless `requested` describes the same architecture and
/// hardware width as the model's rule.
void check_compatible(const Model &model, const RuleConfig &requested);

/// Continues from a trained model with the rule frozen; only hardware groups
/// are optimized. Throws when the task needs a different hardware width.
TrainResult finetune_hardware(const Model &trained, const RuleConfig &rule_config, const TrainConfig &config, std::ostream *metrics = nullptr);

}
