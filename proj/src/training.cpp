// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include <unca/training.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace unca
{

namespace
{
	// Stream ids for derive_rng; per-update streams use the update index.
	constexpr std::uint64_t kInitStream = 0xFFFF'0000'0000'0001ull;
	constexpr std::uint64_t kEvalStream = 0xFFFF'0000'0000'0100ull;
	constexpr std::uint64_t kHardwareStream = 0xFFFF'0000'0000'0200ull;
	constexpr std::uint64_t kProjectionSeed = 0x0C0FFEEull;

	bool has_flag(const std::set<std::string> &s, const std::string &v)
	{
		return s.find(v) != s.end();
	}
}

void TrainConfig::validate() const
{
	if (batch_size < 1)
		throw ValueError("train: batch size must be at least 1");
	if (updates < 0)
		throw ValueError("train: update count must be non-negative");
	if (steps < 1)
		throw ValueError("train: T_steps must be at least 1");
	if (!(lr_rule > 0.0f) || !(lr_hardware > 0.0f))
		throw ValueError("train: learning rates must be positive");
	if (!(clip_norm > 0.0f))
		throw ValueError("train: clip norm must be positive");
	if (!(adam.beta1 >= 0.0f && adam.beta1 < 1.0f) || !(adam.beta2 >= 0.0f && adam.beta2 < 1.0f) || !(adam.eps > 0.0f))
		throw ValueError("train: Adam betas must lie in [0,1) and eps must be positive");
	float total = 0.0f;
	for (const auto &[k, w] : mix)
	{
		if (!(w >= 0.0f))
			throw ValueError("train: task mix weights must be non-negative");
		total += w;
	}
	if (!(total > 0.0f))
		throw ValueError("train: task mix weights are all zero");
	if (height < 1 || width < 1)
		throw ValueError("train: grid dimensions must be positive");
	if (eval_instances < 1)
		throw ValueError("train: eval_instances must be at least 1");
	distribution.validate();
}

std::vector<TaskKind> TrainConfig::kinds() const
{
	std::vector<TaskKind> ks;
	for (const auto &[k, w] : mix)
		if (w > 0.0f)
			ks.push_back(k);
	return ks;
}

std::string monolithic_task_id(TaskKind kind, const PlacementPolicy &policy)
{
	return to_string(kind) + (policy.reversed ? "@reversed" : "");
}

// ---------------------------------------------------------------- Model

Model Model::init(const RuleConfig &rule_config, const TrainConfig &config)
{
	config.validate();
	Rng rng = derive_rng(config.seed, kInitStream);
	Model m;
	m.rule = RuleParams::init(rule_config, rng);
	m.modular = ModularComponents::init(rule_config.hardware_channels, kAllTaskKinds, config.hardware_init, rng);
	Rng hw_rng = derive_rng(config.seed, kHardwareStream);
	m.ensure_hardware(config, hw_rng);

	Rng proj_rng(kProjectionSeed);
	m.projection = Tensor::zeros( { rule_config.hardware_channels, 3 });
	const float bound = std::sqrt(3.0f / static_cast<float>(rule_config.hardware_channels));
	for (float &v : m.projection.data())
		v = uniform(proj_rng, -bound, bound);
	return m;
}

Model Model::clone() const
{
	Model m;
	m.rule = rule.clone();
	m.modular = modular.clone();
	for (const auto &[id, hw] : monolithic)
		m.monolithic[id] = MonolithicHardware { hw.task_id, hw.field.clone_param() };
	m.projection = projection.clone();
	return m;
}

void Model::ensure_hardware(const TrainConfig &config, Rng &rng)
{
	const int chw = rule.config.hardware_channels;
	if (modular.channels() != chw)
		throw ValueError("model: modular embeddings have " + std::to_string(modular.channels()) + " channels, rule expects " + std::to_string(chw));
	if (config.hardware_mode != HardwareMode::Monolithic)
		return;
	for (TaskKind k : config.kinds())
	{
		const std::string id = monolithic_task_id(k, config.placement);
		auto it = monolithic.find(id);
		if (it == monolithic.end())
			monolithic[id] = build_monolithic(id, config.height, config.width, chw, config.hardware_init, rng);
		else if (it->second.field.dim(0) != config.height || it->second.field.dim(1) != config.width || it->second.field.dim(2) != chw)
			throw ValueError("model: monolithic hardware '" + id + "' has shape " + shape_str(it->second.field.shape()) + ", task needs "
					+ shape_str( { config.height, config.width, chw }));
	}
}

HardwareBinding Model::binding(TaskKind kind, const PlacementPolicy &policy) const
{
	HardwareBinding b;
	const auto it = monolithic.find(monolithic_task_id(kind, policy));
	if (it != monolithic.end() && policy.mode == PlacementMode::Fixed)
	{
		b.mode = HardwareMode::Monolithic;
		b.monolithic = &it->second;
	}
	else
	{
		b.mode = HardwareMode::Modular;
		b.modular = &modular;
	}
	return b;
}

// ---------------------------------------------------------------- registry

void ParamRegistry::add(std::string name, std::string group, Tensor tensor)
{
	if (find(name) != nullptr)
		throw ValueError("registry: duplicate parameter '" + name + "'");
	entries_.push_back( { std::move(name), std::move(group), std::move(tensor) });
}

ParamRegistry ParamRegistry::of(Model &model)
{
	ParamRegistry r;
	for (auto &[name, t] : model.rule.named())
		r.add(name, "rule", *t);
	r.add("hw/input", "io", model.modular.input_embed);
	r.add("hw/output", "io", model.modular.output_embed);
	for (auto &[k, t] : model.modular.task_embeds)
		r.add("hw/task/" + to_string(k), "task:" + to_string(k), t);
	for (auto &[id, hw] : model.monolithic)
		r.add("hw/mono/" + id, "mono:" + id, hw.field);
	return r;
}

const ParamEntry *ParamRegistry::find(const std::string &name) const
{
	for (const auto &e : entries_)
		if (e.name == name)
			return &e;
	return nullptr;
}

std::vector<std::string> ParamRegistry::groups() const
{
	std::vector<std::string> gs;
	for (const auto &e : entries_)
		if (std::find(gs.begin(), gs.end(), e.group) == gs.end())
			gs.push_back(e.group);
	return gs;
}

std::vector<ParamEntry> ParamRegistry::group(const std::string &name) const
{
	std::vector<ParamEntry> out;
	for (const auto &e : entries_)
		if (e.group == name)
			out.push_back(e);
	return out;
}

bool is_hardware_group(const std::string &group)
{
	return group != "rule";
}

std::string task_group(TaskKind kind, const TrainConfig &config)
{
	if (config.hardware_mode == HardwareMode::Monolithic)
		return "mono:" + monolithic_task_id(kind, config.placement);
	return "task:" + to_string(kind);
}

// ---------------------------------------------------------------- loss

Tensor masked_mse(const GridState &final_state, const Tensor &target, const Tensor &mask)
{
	const int h = final_state.height(), w = final_state.width();
	if (target.shape() != Shape { h, w } || mask.shape() != Shape { h, w })
		throw ShapeError("masked_mse: target and mask must be [H,W] matching the grid");
	float active = 0.0f;
	for (float v : mask.data())
		active += v;
	if (!(active > 0.0f))
		throw ValueError("masked_mse: empty mask");
	Tensor value = ops::reshape(ops::slice(final_state.mutable_state, 2, kValueChannel, 1), { h, w });
	Tensor diff = ops::sub(value, target);
	return ops::scale(ops::sum(ops::mul(ops::mul(diff, diff), mask)), 1.0f / active);
}

void write_metrics(std::ostream &os, const UpdateRecord &record)
{
	for (const auto &[k, loss] : record.loss)
		os << record.update << '\t' << to_string(k) << '\t' << std::setprecision(9) << loss << '\t' << std::setprecision(6) << record.wall_ms << '\n';
}

// ---------------------------------------------------------------- trainer

Trainer::Trainer(Model model, TrainConfig config, TrainScope scope) :
		model_(std::move(model)),
		config_(std::move(config)),
		scope_(scope)
{
	config_.validate();
	if (config_.hardware_mode == HardwareMode::Monolithic && config_.placement.mode == PlacementMode::Random)
		throw ValueError("train: randomized placement requires modular hardware");
	Rng rng = derive_rng(config_.seed, kHardwareStream);
	model_.ensure_hardware(config_, rng);
	registry_ = ParamRegistry::of(model_);
	for (auto &e : registry_.entries())
	{
		auto t = e.tensor;
		t.set_requires_grad(trainable(e));
		if (trainable(e))
			{
			AdamHyper hyper = config_.adam;
			hyper.lr = e.group == "rule" ? config_.lr_rule : config_.lr_hardware;
			optimizer_[e.name] = AdamState::for_param(t, hyper);
		}
	}
}

bool Trainer::trainable(const ParamEntry &entry) const
{
	return scope_ == TrainScope::Full || is_hardware_group(entry.group);
}

void Trainer::restore(std::int64_t updates_done, std::map<std::string, AdamState> optimizer)
{
	for (const auto &[name, st] : optimizer_)
	{
		const auto it = optimizer.find(name);
		if (it == optimizer.end())
			throw ValueError("restore: missing optimizer state for '" + name + "'");
		if (it->second.m.shape() != st.m.shape() || it->second.v.shape() != st.v.shape())
			throw ShapeError("restore: optimizer state for '" + name + "' has the wrong shape");
		it->second.hyper = st.hyper;
	}
	for (auto &[name, st] : optimizer)
		if (optimizer_.find(name) != optimizer_.end())
			optimizer_[name] = std::move(st);
	updates_done_ = updates_done;
}

UpdateRecord Trainer::update()
{
	const auto start = std::chrono::steady_clock::now();
	const std::int64_t index = updates_done_;
	Rng rng = derive_rng(config_.seed, static_cast<std::uint64_t>(index));

	std::vector<TaskKind> kinds;
	std::vector<double> weights;
	for (const auto &[k, w] : config_.mix)
	{
		kinds.push_back(k);
		weights.push_back(w);
	}
	std::discrete_distribution<int> pick(weights.begin(), weights.end());

	std::map<std::string, int> group_count;
	std::map<TaskKind, std::pair<float, int>> loss_sum;
	const int cm = model_.rule.config.mutable_channels;
	for (int b = 0; b < config_.batch_size; b++)
	{
		const TaskKind kind = kinds[pick(rng)];
		const TaskInstance inst = make_instance(kind, config_.distribution, config_.height, config_.width, config_.placement, config_.steps,
				model_.binding(kind, config_.placement), cm, rng);
		const int eval_index = sample_eval_index(config_.steps, rng);
		const GridState final_state = run_steps(inst.initial, model_.rule, eval_index, &rng);
		Tensor loss = masked_mse(final_state, inst.target, inst.mask);
		const float value = loss.item();
		if (!std::isfinite(value))
		{
			if (config_.strict)
			{
				std::ostringstream os;
				os << "non-finite loss at update " << index << ", batch item " << b << " (" << to_string(kind) << ", eval index " << eval_index << ")";
				throw NonFiniteError(os.str());
			}
			continue;
		}
		backward(loss);
		group_count[task_group(kind, config_)] += 1;
		loss_sum[kind].first += value;
		loss_sum[kind].second += 1;
	}

	// shared groups average over the batch; task groups over their own instances
	const int processed = std::accumulate(group_count.begin(), group_count.end(), 0, [](int s, const auto &kv) { return s + kv.second; });
	std::set<std::string> present;
	if (processed > 0)
	{
		present.insert("rule");
		if (config_.hardware_mode == HardwareMode::Modular)
			present.insert("io");
	}
	for (const auto &[g, n] : group_count)
		present.insert(g);

	for (const auto &group : registry_.groups())
	{
		auto entries = registry_.group(group);
		if (!has_flag(present, group) || !trainable(entries.front()))
			continue;
		const int n = group_count.count(group) ? group_count[group] : processed;
		std::vector<Tensor> params;
		for (auto &e : entries)
		{
			for (float &g : e.tensor.mutable_grad())
				g /= static_cast<float>(n);
			params.push_back(e.tensor);
		}
		clip_grad_norm(params, config_.clip_norm);
		for (auto &e : entries)
			adam_step(e.tensor, e.tensor.grad(), optimizer_.at(e.name), config_.strict);
	}
	for (auto &e : registry_.entries())
		if (e.tensor.requires_grad())
		{
			auto t = e.tensor;
			t.zero_grad();
		}

	updates_done_ += 1;
	UpdateRecord rec;
	rec.update = index;
	for (const auto &[k, s] : loss_sum)
		rec.loss[k] = s.first / static_cast<float>(s.second);
	rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
	return rec;
}

std::vector<UpdateRecord> Trainer::run(int updates, std::ostream *metrics)
{
	std::vector<UpdateRecord> log;
	log.reserve(static_cast<std::size_t>(std::max(updates, 0)));
	for (int i = 0; i < updates; i++)
	{
		log.push_back(update());
		if (metrics != nullptr)
		{
			write_metrics(*metrics, log.back());
			metrics->flush();
		}
	}
	return log;
}

float Trainer::evaluate(TaskKind kind, int instances) const
{
	NoGradGuard no_grad;
	Rng rng = derive_rng(config_.seed, kEvalStream + static_cast<std::uint64_t>(kind));
	const int cm = model_.rule.config.mutable_channels;
	float total = 0.0f;
	for (int i = 0; i < instances; i++)
	{
		const TaskInstance inst = make_instance(kind, config_.distribution, config_.height, config_.width, config_.placement, config_.steps,
				model_.binding(kind, config_.placement), cm, rng);
		const GridState final_state = run_steps(inst.initial, model_.rule, config_.steps, &rng);
		total += masked_mse(final_state, inst.target, inst.mask).item();
	}
	return total / static_cast<float>(instances);
}

TrainResult train_joint(const RuleConfig &rule_config, const TrainConfig &config, std::ostream *metrics)
{
	Trainer trainer(Model::init(rule_config, config), config, TrainScope::Full);
	auto log = trainer.run(config.updates, metrics);
	return TrainResult { std::move(trainer), std::move(log) };
}

void check_compatible(const Model &model, const RuleConfig &requested)
{
	const RuleConfig &have = model.rule.config;
	if (requested.hardware_channels != have.hardware_channels || model.modular.channels() != have.hardware_channels)
		throw ValueError("hardware embedding width " + std::to_string(requested.hardware_channels) + " differs from the trained rule's "
				+ std::to_string(have.hardware_channels));
	if (requested.mutable_channels != have.mutable_channels || requested.perception_channels != have.perception_channels
			|| requested.kernel_size != have.kernel_size || requested.pathways != have.pathways || requested.hidden != have.hidden)
		throw ValueError("requested rule architecture differs from the trained rule");
}

TrainResult finetune_hardware(const Model &trained, const RuleConfig &rule_config, const TrainConfig &config, std::ostream *metrics)
{
	check_compatible(trained, rule_config);
	Model model = trained.clone();
	Trainer trainer(std::move(model), config, TrainScope::HardwareOnly);
	auto log = trainer.run(config.updates, metrics);
	return TrainResult { std::move(trainer), std::move(log) };
}

}
