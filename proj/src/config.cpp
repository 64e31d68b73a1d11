// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include <unca/config.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace unca
{

ConfigError::ConfigError(const std::string &message, int line) :
		ValueError(line > 0 ? message + " (line " + std::to_string(line) + ")" : message),
		line(line)
{
}

namespace
{

std::string trim(const std::string &s)
{
	const auto b = s.find_first_not_of(" \t\r");
	if (b == std::string::npos)
		return {};
	const auto e = s.find_last_not_of(" \t\r");
	return s.substr(b, e - b + 1);
}

template<class T>
T parse_number(const std::string &key, const std::string &text)
{
	T v {};
	const char *end = text.data() + text.size();
	auto [p, ec] = std::from_chars(text.data(), end, v);
	if (ec != std::errc() || p != end)
		throw ConfigError(key + ": expected " + (std::is_floating_point_v<T> ? "a number" : "an integer") + ", got '" + text + "'");
	return v;
}

template<class T>
std::string format_number(T v)
{
	char buf[64];
	auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
	return std::string(buf, p);
}

bool parse_bool(const std::string &key, const std::string &text)
{
	if (text == "true" || text == "1")
		return true;
	if (text == "false" || text == "0")
		return false;
	throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::string format_mix(const std::map<TaskKind, float> &mix)
{
	std::string out;
	for (const auto &[k, w] : mix)
	{
		if (!out.empty())
			out += ',';
		out += to_string(k) + ':' + format_number(w);
	}
	return out;
}

std::map<TaskKind, float> parse_mix(const std::string &key, const std::string &text)
{
	std::map<TaskKind, float> mix;
	std::stringstream ss(text);
	std::string item;
	while (std::getline(ss, item, ','))
	{
		item = trim(item);
		const auto colon = item.find(':');
		const std::string name = trim(item.substr(0, colon));
		const float w = colon == std::string::npos ? 1.0f : parse_number<float>(key, trim(item.substr(colon + 1)));
		TaskKind k;
		try
		{
			k = parse_task_kind(name);
		} catch (const ValueError &e)
		{
			throw ConfigError(key + ": " + e.what());
		}
		if (!mix.emplace(k, w).second)
			throw ConfigError(key + ": task '" + name + "' listed twice");
	}
	if (mix.empty())
		throw ConfigError(key + ": empty task mix");
	return mix;
}

struct Entry
{
	RunConfig::Key key;
	std::function<std::string(const RunConfig &)> get;
	std::function<void(RunConfig &, const std::string &)> set;
};

#define UNCA_INT(NAME, FIELD, HELP) \
	Entry { { NAME, "int", HELP }, [](const RunConfig &c) { return format_number(c.FIELD); }, \
		[](RunConfig &c, const std::string &v) { c.FIELD = parse_number<decltype(c.FIELD)>(NAME, v); } }
#define UNCA_FLOAT(NAME, FIELD, HELP) \
	Entry { { NAME, "float", HELP }, [](const RunConfig &c) { return format_number(c.FIELD); }, \
		[](RunConfig &c, const std::string &v) { c.FIELD = parse_number<float>(NAME, v); } }
#define UNCA_BOOL(NAME, FIELD, HELP) \
	Entry { { NAME, "bool", HELP }, [](const RunConfig &c) { return std::string(c.FIELD ? "true" : "false"); }, \
		[](RunConfig &c, const std::string &v) { c.FIELD = parse_bool(NAME, v); } }

const std::vector<Entry> &entries()
{
	static const std::vector<Entry> table = {
		UNCA_INT("rule.mutable_channels", rule.mutable_channels, "C_mut, including the value channel"),
		UNCA_INT("rule.hardware_channels", rule.hardware_channels, "C_hw"),
		UNCA_INT("rule.perception_channels", rule.perception_channels, "C_perc"),
		UNCA_INT("rule.kernel_size", rule.kernel_size, "odd perception kernel extent"),
		UNCA_INT("rule.pathways", rule.pathways, "N parallel pathway MLPs"),
		UNCA_INT("rule.hidden", rule.hidden, "hidden units per pathway"),
		UNCA_FLOAT("rule.temperature", rule.temperature, "attention softmax temperature"),
		Entry { { "rule.activation", "gelu|tanh", "pathway hidden activation" },
			[](const RunConfig &c) { return std::string(c.rule.activation == Activation::Gelu ? "gelu" : "tanh"); },
			[](RunConfig &c, const std::string &v) {
				if (v == "gelu")
					c.rule.activation = Activation::Gelu;
				else if (v == "tanh")
					c.rule.activation = Activation::Tanh;
				else
					throw ConfigError("rule.activation: expected gelu or tanh, got '" + v + "'");
			} },
		Entry { { "rule.padding", "zero|wrap", "perception boundary handling" },
			[](const RunConfig &c) { return std::string(c.rule.padding == Padding::Zero ? "zero" : "wrap"); },
			[](RunConfig &c, const std::string &v) {
				if (v == "zero")
					c.rule.padding = Padding::Zero;
				else if (v == "wrap")
					c.rule.padding = Padding::Wrap;
				else
					throw ConfigError("rule.padding: expected zero or wrap, got '" + v + "'");
			} },
		UNCA_BOOL("rule.stochastic_update", rule.stochastic_update, "per-cell fire mask"),
		UNCA_FLOAT("rule.fire_rate", rule.fire_rate, "fire probability when stochastic"),

		UNCA_INT("train.batch_size", train.batch_size, "instances per update"),
		UNCA_INT("train.updates", train.updates, "optimizer updates"),
		UNCA_INT("train.steps", train.steps, "T_steps per rollout"),
		UNCA_FLOAT("train.lr_rule", train.lr_rule, "Adam learning rate of the rule"),
		UNCA_FLOAT("train.lr_hardware", train.lr_hardware, "Adam learning rate of the hardware"),
		UNCA_FLOAT("train.adam_beta1", train.adam.beta1, ""),
		UNCA_FLOAT("train.adam_beta2", train.adam.beta2, ""),
		UNCA_FLOAT("train.adam_eps", train.adam.eps, ""),
		UNCA_FLOAT("train.clip_norm", train.clip_norm, "per-group gradient norm bound"),
		Entry { { "train.mix", "kind:weight,...", "task sampling weights" },
			[](const RunConfig &c) { return format_mix(c.train.mix); },
			[](RunConfig &c, const std::string &v) { c.train.mix = parse_mix("train.mix", v); } },
		Entry { { "train.hardware_mode", "modular|monolithic", "" },
			[](const RunConfig &c) { return std::string(c.train.hardware_mode == HardwareMode::Modular ? "modular" : "monolithic"); },
			[](RunConfig &c, const std::string &v) {
				if (v == "modular")
					c.train.hardware_mode = HardwareMode::Modular;
				else if (v == "monolithic")
					c.train.hardware_mode = HardwareMode::Monolithic;
				else
					throw ConfigError("train.hardware_mode: expected modular or monolithic, got '" + v + "'");
			} },
		UNCA_INT("train.height", train.height, "grid rows"),
		UNCA_INT("train.width", train.width, "grid columns"),
		UNCA_FLOAT("train.hardware_init", train.hardware_init, "uniform init bound of hardware tensors"),
		UNCA_INT("train.seed", train.seed, ""),
		UNCA_INT("train.eval_every", train.eval_every, "0 disables periodic evaluation"),
		UNCA_INT("train.eval_instances", train.eval_instances, ""),
		UNCA_BOOL("train.strict", train.strict, "abort on non-finite gradients"),

		Entry { { "placement.mode", "fixed|random", "" },
			[](const RunConfig &c) { return std::string(c.train.placement.mode == PlacementMode::Fixed ? "fixed" : "random"); },
			[](RunConfig &c, const std::string &v) {
				if (v == "fixed")
					c.train.placement.mode = PlacementMode::Fixed;
				else if (v == "random")
					c.train.placement.mode = PlacementMode::Random;
				else
					throw ConfigError("placement.mode: expected fixed or random, got '" + v + "'");
			} },
		UNCA_INT("placement.matrix_size", train.placement.matrix_size, "fixed mode, square extent"),
		UNCA_INT("placement.margin", train.placement.margin, "fixed mode, -1 = min(H,W)/8"),
		UNCA_BOOL("placement.reversed", train.placement.reversed, "fixed mode, swap input and output sides"),
		UNCA_INT("placement.gap", train.placement.gap, "fixed unary mode, rows between input and output; -1 = corners"),
		UNCA_INT("placement.min_size", train.placement.min_size, "random mode"),
		UNCA_INT("placement.max_size", train.placement.max_size, "random mode"),
		UNCA_INT("placement.copies", train.placement.copies, "random mode, Identity outputs"),
		UNCA_INT("placement.max_retries", train.placement.max_retries, "random mode"),

		Entry { { "distribution.kind", "uniform|gaussian|correlated|sparse", "" },
			[](const RunConfig &c) { return to_string(c.train.distribution.kind); },
			[](RunConfig &c, const std::string &v) {
				try
				{
					c.train.distribution.kind = Distribution::parse(v).kind;
				} catch (const ValueError &e)
				{
					throw ConfigError(std::string("distribution.kind: ") + e.what());
				}
			} },
		UNCA_FLOAT("distribution.low", train.distribution.low, ""),
		UNCA_FLOAT("distribution.high", train.distribution.high, ""),
		UNCA_FLOAT("distribution.sigma", train.distribution.sigma, ""),
		UNCA_INT("distribution.correlation_width", train.distribution.correlation_width, ""),
		UNCA_FLOAT("distribution.sparsity", train.distribution.sparsity, "fraction of zeroed entries"),

		Entry { { "emulation.mnist_dir", "path", "directory with the four IDX files" },
			[](const RunConfig &c) { return c.emulation.mnist_dir; },
			[](RunConfig &c, const std::string &v) { c.emulation.mnist_dir = v; } },
		UNCA_INT("emulation.samples", emulation.samples, "test images to emulate, 0 = all"),
		UNCA_INT("emulation.steps", emulation.steps, "rollout steps per job, 0 = train.steps"),
		UNCA_BOOL("emulation.scale", emulation.scale, "max-abs scale each block into [-1,1]"),
		UNCA_INT("emulation.grid", emulation.grid, "side of the per-job grid"),
		UNCA_INT("classifier.seed", emulation.classifier_seed, ""),
		UNCA_INT("classifier.epochs", emulation.classifier.epochs, ""),
		UNCA_INT("classifier.batch_size", emulation.classifier.batch_size, ""),
		UNCA_FLOAT("classifier.lr", emulation.classifier.lr, ""),
	};
	return table;
}

#undef UNCA_INT
#undef UNCA_FLOAT
#undef UNCA_BOOL

const Entry &lookup(const std::string &key)
{
	for (const auto &e : entries())
		if (key == e.key.name)
			return e;
	throw ConfigError("unknown config key '" + key + "'");
}

}

const std::vector<RunConfig::Key> &RunConfig::schema()
{
	static const std::vector<Key> keys = [] {
		std::vector<Key> k;
		for (const auto &e : entries())
			k.push_back(e.key);
		return k;
	}();
	return keys;
}

void RunConfig::set(const std::string &key, const std::string &value)
{
	lookup(key).set(*this, trim(value));
}

std::string RunConfig::get(const std::string &key) const
{
	return lookup(key).get(*this);
}

void RunConfig::merge(const std::string &text)
{
	std::istringstream in(text);
	std::string line;
	int lineno = 0;
	while (std::getline(in, line))
	{
		++lineno;
		if (const auto hash = line.find('#'); hash != std::string::npos)
			line.erase(hash);
		line = trim(line);
		if (line.empty())
			continue;
		const auto eq = line.find('=');
		if (eq == std::string::npos)
			throw ConfigError("expected 'key = value'", lineno);
		const std::string key = trim(line.substr(0, eq));
		try
		{
			set(key, line.substr(eq + 1));
		} catch (const ConfigError &e)
		{
			throw ConfigError(e.what(), lineno);
		}
	}
}

RunConfig RunConfig::parse(const std::string &text)
{
	RunConfig c;
	c.merge(text);
	return c;
}

RunConfig RunConfig::load(const std::filesystem::path &path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw std::runtime_error("cannot open config '" + path.string() + "'");
	std::ostringstream ss;
	ss << in.rdbuf();
	return parse(ss.str());
}

std::string RunConfig::to_text() const
{
	std::string out;
	for (const auto &e : entries())
		out += std::string(e.key.name) + " = " + e.get(*this) + "\n";
	return out;
}

void RunConfig::validate() const
{
	rule.validate();
	train.validate();
	if (emulation.samples < 0)
		throw ConfigError("emulation.samples must be non-negative");
	if (emulation.steps < 0)
		throw ConfigError("emulation.steps must be non-negative");
	if (emulation.grid < 3 * kBlock)
		throw ConfigError("emulation.grid must fit three 8x8 regions");
	if (emulation.classifier.epochs < 1 || emulation.classifier.batch_size < 1 || !(emulation.classifier.lr > 0.0f))
		throw ConfigError("classifier: epochs, batch size and learning rate must be positive");
}

}
