// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include <unca/checkpoint.hpp>
#include <unca/cli.hpp>
#include <unca/composer.hpp>
#include <unca/export.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

namespace unca
{

namespace
{

/// Bad invocation discovered after parsing (exit 2).
struct UsageError : std::invalid_argument
{
	using std::invalid_argument::invalid_argument;
};

struct ConfigArgs
{
	std::string file;
	std::vector<std::string> sets;

	void attach(CLI::App *app)
	{
		app->add_option("-c,--config", file, "key = value config file")->check(CLI::ExistingFile);
		app->add_option("-s,--set", sets, "override one key, e.g. --set train.updates=500");
	}

	/// Defaults (or `base`), then the file, then --set in order.
	RunConfig resolve(std::optional<RunConfig> base = std::nullopt) const
	{
		RunConfig c = base ? *base : RunConfig {};
		if (!file.empty())
		{
			std::ifstream in(file);
			std::ostringstream ss;
			ss << in.rdbuf();
			c.merge(ss.str());
		}
		for (const auto &s : sets)
		{
			const auto eq = s.find('=');
			if (eq == std::string::npos)
				throw UsageError("--set expects key=value, got '" + s + "'");
			c.set(s.substr(0, s.find_last_not_of(' ', eq - 1) + 1), s.substr(eq + 1));
		}
		c.validate();
		return c;
	}
};

void print_config(std::ostream &out, const RunConfig &c)
{
	out << "# resolved config\n" << c.to_text() << "# end config\n";
}

std::ofstream open_out(const std::string &path)
{
	std::ofstream f(path, std::ios::trunc);
	if (!f)
		throw std::runtime_error("cannot write '" + path + "'");
	return f;
}

void report_eval(std::ostream &out, const Trainer &trainer, const std::map<TaskKind, float> *initial = nullptr)
{
	for (TaskKind k : trainer.config().kinds())
	{
		const float loss = trainer.evaluate(k);
		out << "eval\t" << to_string(k) << "\t" << std::setprecision(6) << loss;
		if (initial != nullptr && initial->contains(k))
			out << "\tinitial\t" << initial->at(k) << "\tratio\t" << loss / initial->at(k);
		out << '\n';
	}
}

std::map<TaskKind, float> initial_losses(const Trainer &trainer)
{
	std::map<TaskKind, float> m;
	for (TaskKind k : trainer.config().kinds())
		m[k] = trainer.evaluate(k);
	return m;
}

// ---------------------------------------------------------------- train

struct TrainArgs
{
	ConfigArgs config;
	std::string out, metrics, resume;
};

int cmd_train(const TrainArgs &a, std::ostream &out)
{
	std::optional<Restored> restored;
	if (!a.resume.empty())
		restored = restore(load_checkpoint(a.resume));
	const RunConfig cfg = a.config.resolve(restored ? std::optional<RunConfig>(restored->config) : std::nullopt);
	print_config(out, cfg);
	if (restored)
		check_compatible(restored->model, cfg.rule);

	Trainer trainer = restored ? resume(std::move(*restored), cfg.train) : Trainer(Model::init(cfg.rule, cfg.train), cfg.train);
	const auto initial = initial_losses(trainer);
	std::ofstream metrics;
	if (!a.metrics.empty())
		metrics = open_out(a.metrics);
	const auto remaining = std::max<std::int64_t>(0, cfg.train.updates - trainer.updates_done());
	const auto start = std::chrono::steady_clock::now();
	trainer.run(static_cast<int>(remaining), a.metrics.empty() ? nullptr : &metrics);
	const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
	out << "updates\t" << trainer.updates_done() << "\tseconds\t" << secs << '\n';
	report_eval(out, trainer, &initial);
	save_checkpoint(make_checkpoint(trainer, cfg), a.out);
	out << "checkpoint\t" << a.out << '\n';
	return kExitOk;
}

// ---------------------------------------------------------------- finetune

struct FinetuneArgs
{
	ConfigArgs config;
	std::string from, out, metrics;
};

int cmd_finetune(const FinetuneArgs &a, std::ostream &out)
{
	Restored base = restore(load_checkpoint(a.from));
	const RunConfig cfg = a.config.resolve(base.config);
	print_config(out, cfg);
	std::ofstream metrics;
	if (!a.metrics.empty())
		metrics = open_out(a.metrics);
	TrainResult r = finetune_hardware(base.model, cfg.rule, cfg.train, a.metrics.empty() ? nullptr : &metrics);
	double ms = 0.0;
	for (const auto &rec : r.log)
		ms += rec.wall_ms;
	out << "updates\t" << r.trainer.updates_done() << "\tmean_ms\t" << (r.log.empty() ? 0.0 : ms / static_cast<double>(r.log.size())) << '\n';
	report_eval(out, r.trainer);
	save_checkpoint(make_checkpoint(r.trainer, cfg), a.out);
	out << "checkpoint\t" << a.out << '\n';
	return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs
{
	ConfigArgs config;
	std::string checkpoint;
	int instances = 0;
};

int cmd_eval(const EvalArgs &a, std::ostream &out)
{
	Restored r = restore(load_checkpoint(a.checkpoint));
	RunConfig cfg = a.config.resolve(r.config);
	if (a.instances > 0)
		cfg.train.eval_instances = a.instances;
	print_config(out, cfg);
	check_compatible(r.model, cfg.rule);
	const Trainer trainer(std::move(r.model), cfg.train, TrainScope::HardwareOnly);
	report_eval(out, trainer);
	return kExitOk;
}

// ---------------------------------------------------------------- emulate-mnist

struct EmulateArgs
{
	ConfigArgs config;
	std::string backend = "oracle";
	std::string checkpoint;
	std::string jobs_out;
	int samples = -1;
};

std::filesystem::path mnist_file(const std::string &dir, const std::string &stem)
{
	const std::filesystem::path gz = std::filesystem::path(dir) / (stem + ".gz");
	return std::filesystem::exists(gz) ? gz : std::filesystem::path(dir) / stem;
}

int cmd_emulate(const EmulateArgs &a, std::ostream &out)
{
	const BackendKind kind = a.backend == "nca" ? BackendKind::Nca : BackendKind::Oracle;
	if (kind == BackendKind::Nca && a.checkpoint.empty())
		throw UsageError("emulate-mnist: --backend nca needs --checkpoint");
	std::optional<Restored> restored;
	if (!a.checkpoint.empty())
		restored = restore(load_checkpoint(a.checkpoint));
	RunConfig cfg = a.config.resolve(restored ? std::optional<RunConfig>(restored->config) : std::nullopt);
	if (a.samples >= 0)
		cfg.emulation.samples = a.samples;
	print_config(out, cfg);

	const auto &em = cfg.emulation;
	const MnistDataset train = load_mnist(mnist_file(em.mnist_dir, "train-images-idx3-ubyte"), mnist_file(em.mnist_dir, "train-labels-idx1-ubyte"));
	MnistDataset test = load_mnist(mnist_file(em.mnist_dir, "t10k-images-idx3-ubyte"), mnist_file(em.mnist_dir, "t10k-labels-idx1-ubyte"));
	Rng rng(em.classifier_seed);
	const LinearClassifier clf = train_linear_classifier(train, em.classifier, rng);
	out << "classifier\ttrain\t" << train.size() << "\ttest_accuracy\t" << clf.accuracy(test) << '\n';

	if (em.samples > 0)
		test = test.head(em.samples);
	const BlockPlan plan = block_decompose(test.images, clf.weights, em.scale);
	Backend backend = Backend::oracle();
	if (kind == BackendKind::Nca)
	{
		check_compatible(restored->model, cfg.rule);
		backend = Backend::nca(restored->model, em.steps > 0 ? em.steps : cfg.train.steps, em.grid, em.grid);
	}
	const auto start = std::chrono::steady_clock::now();
	const auto results = execute_blocks(plan.jobs, backend);
	const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
	const EmulationMetrics m = aggregate_and_evaluate(plan, results, test.labels, clf.logits(test.images));
	out << "backend\t" << a.backend << "\tjobs\t" << plan.jobs.size() << "\tseconds\t" << secs << '\n';
	out << "samples\t" << m.samples << "\temulated_accuracy\t" << m.emulated_accuracy << "\treference_accuracy\t" << m.reference_accuracy
			<< "\tagreement\t" << m.agreement << "\tmean_job_mse\t" << m.mean_job_mse << '\n';
	if (!a.jobs_out.empty())
	{
		auto f = open_out(a.jobs_out);
		write_job_errors(f, results);
	}
	return kExitOk;
}

// ---------------------------------------------------------------- compose

struct ComposeArgs
{
	ConfigArgs config;
	std::string graph;
	std::string backend = "oracle";
	std::string checkpoint;
	std::string trace;
	std::uint64_t seed = 0;
};

int cmd_compose(const ComposeArgs &a, std::ostream &out)
{
	const BackendKind kind = a.backend == "nca" ? BackendKind::Nca : BackendKind::Oracle;
	if (kind == BackendKind::Nca && a.checkpoint.empty())
		throw UsageError("compose: --backend nca needs --checkpoint");
	std::optional<Restored> restored;
	if (!a.checkpoint.empty())
		restored = restore(load_checkpoint(a.checkpoint));
	const RunConfig cfg = a.config.resolve(restored ? std::optional<RunConfig>(restored->config) : std::nullopt);
	print_config(out, cfg);

	std::ifstream in(a.graph);
	if (!in)
		throw std::runtime_error("cannot open graph '" + a.graph + "'");
	std::ostringstream text;
	text << in.rdbuf();
	const TaskGraph graph = parse_task_graph(text.str());

	ModularComponents components;
	if (restored)
		components = restored->model.modular;
	else
	{
		Rng hw = derive_rng(cfg.train.seed, 0);
		components = ModularComponents::init(cfg.rule.hardware_channels, kAllTaskKinds, cfg.train.hardware_init, hw);
	}
	const ExecutionPlan plan = compile_plan(graph, components);

	Rng rng = derive_rng(a.seed, 0);
	std::map<std::string, Tensor> inputs;
	for (const auto &tag : plan.initial_tags)
	{
		const Placement &p = plan.regions.at(tag);
		inputs[tag] = sample_matrix(cfg.train.distribution, p.rows, p.cols, rng);
	}
	const PlanResult result = execute_plan(plan, inputs, kind, restored ? &restored->model : nullptr);

	out << "grid\t" << plan.height << "x" << plan.width << "\tstages\t" << plan.stages.size() << '\n';
	for (const auto &s : result.stages)
		out << "stage\t" << s.index << '\t' << to_string(s.kind) << "\tsteps\t" << s.steps << "\toutput_mse\t" << s.output_mse << '\n';
	for (const auto &tag : plan.initial_tags)
	{
		const Tensor final_region = decode_region(result.final_state, plan.regions.at(tag));
		float diff = 0.0f;
		const std::span<const float> f = final_region.data(), i = inputs.at(tag).data();
		for (std::size_t k = 0; k < f.size(); k++)
			diff = std::max(diff, std::fabs(f[k] - i[k]));
		out << "final-vs-initial\t" << tag << "\tmax_abs_diff\t" << diff << '\t' << (diff == 0.0f ? "equal" : "differs") << '\n';
	}
	if (!a.trace.empty())
	{
		auto f = open_out(a.trace);
		write_trace(f, result);
	}
	return kExitOk;
}

// ---------------------------------------------------------------- inspect

int cmd_inspect(const std::string &path, std::ostream &out)
{
	const Checkpoint c = load_checkpoint(path);
	out << "version\t" << c.version << '\n';
	out << "# config echo\n" << c.config << "# end config\n";
	for (const auto &t : c.tensors)
		out << "tensor\t" << t.name << '\t' << shape_str(t.shape) << '\n';
	for (const auto &[name, v] : c.counters)
		out << "counter\t" << name << '\t' << v << '\n';
	return kExitOk;
}

// ---------------------------------------------------------------- export-grid

struct ExportArgs
{
	ConfigArgs config;
	std::string checkpoint, kind = "identity", prefix;
	std::uint64_t seed = 0;
	int step = 0;
};

int cmd_export(const ExportArgs &a, std::ostream &out)
{
	Restored r = restore(load_checkpoint(a.checkpoint));
	const RunConfig cfg = a.config.resolve(r.config);
	print_config(out, cfg);
	check_compatible(r.model, cfg.rule);
	const auto files = export_grid(r.model, cfg.train, parse_task_kind(a.kind), a.seed, a.step, a.prefix);
	for (const auto &p : { files.value_pgm, files.value_csv, files.hardware_ppm, files.hardware_csv })
		out << "wrote\t" << p.string() << '\n';
	return kExitOk;
}

}

int cli_main(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
	CLI::App app { "Neural cellular automaton substrate: training, emulation and composition", "unca" };
	app.require_subcommand(1);
	app.failure_message(CLI::FailureMessage::help);

	TrainArgs train;
	auto *sc_train = app.add_subcommand("train", "joint training from scratch or from --resume");
	train.config.attach(sc_train);
	sc_train->add_option("-o,--out", train.out, "checkpoint to write")->required();
	sc_train->add_option("--metrics", train.metrics, "per-update loss log");
	sc_train->add_option("--resume", train.resume, "continue from this checkpoint")->check(CLI::ExistingFile);

	FinetuneArgs finetune;
	auto *sc_finetune = app.add_subcommand("finetune", "hardware-only training with the rule frozen");
	finetune.config.attach(sc_finetune);
	sc_finetune->add_option("--from", finetune.from, "trained checkpoint")->required()->check(CLI::ExistingFile);
	sc_finetune->add_option("-o,--out", finetune.out, "checkpoint to write")->required();
	sc_finetune->add_option("--metrics", finetune.metrics, "per-update loss log");

	EvalArgs eval;
	auto *sc_eval = app.add_subcommand("eval", "masked loss on a fixed instance set per task kind");
	eval.config.attach(sc_eval);
	sc_eval->add_option("checkpoint", eval.checkpoint)->required()->check(CLI::ExistingFile);
	sc_eval->add_option("--instances", eval.instances, "instances per kind");

	EmulateArgs emulate;
	auto *sc_emulate = app.add_subcommand("emulate-mnist", "linear MNIST classifier through 8x8 block products");
	emulate.config.attach(sc_emulate);
	sc_emulate->add_option("--backend", emulate.backend)->check(CLI::IsMember({ "oracle", "nca" }));
	sc_emulate->add_option("--checkpoint", emulate.checkpoint, "MatMul-trained model (nca backend)")->check(CLI::ExistingFile);
	sc_emulate->add_option("--samples", emulate.samples, "test images to emulate, 0 = all");
	sc_emulate->add_option("--jobs-out", emulate.jobs_out, "per-job error histogram data");

	ComposeArgs compose;
	auto *sc_compose = app.add_subcommand("compose", "parse, compile and execute a task graph");
	compose.config.attach(sc_compose);
	sc_compose->add_option("graph", compose.graph)->required()->check(CLI::ExistingFile);
	sc_compose->add_option("--backend", compose.backend)->check(CLI::IsMember({ "oracle", "nca" }));
	sc_compose->add_option("--checkpoint", compose.checkpoint)->check(CLI::ExistingFile);
	sc_compose->add_option("--trace", compose.trace, "per-stage trace file");
	sc_compose->add_option("--seed", compose.seed, "seed of the initial matrices");

	std::string inspect_path;
	auto *sc_inspect = app.add_subcommand("inspect", "print a checkpoint manifest");
	sc_inspect->add_option("checkpoint", inspect_path)->required()->check(CLI::ExistingFile);

	ExportArgs exp;
	auto *sc_export = app.add_subcommand("export-grid", "write value and hardware snapshots as PGM/PPM and CSV");
	exp.config.attach(sc_export);
	sc_export->add_option("checkpoint", exp.checkpoint)->required()->check(CLI::ExistingFile);
	sc_export->add_option("--kind", exp.kind);
	sc_export->add_option("--seed", exp.seed, "instance seed");
	sc_export->add_option("--step", exp.step, "rollout steps before the snapshot");
	sc_export->add_option("-o,--out", exp.prefix, "output path prefix")->required();

	try
	{
		app.parse(argc, argv);
	} catch (const CLI::ParseError &e)
	{
		const int code = app.exit(e, out, err);
		return code == 0 ? kExitOk : kExitUsage;
	}

	try
	{
		if (*sc_train)
			return cmd_train(train, out);
		if (*sc_finetune)
			return cmd_finetune(finetune, out);
		if (*sc_eval)
			return cmd_eval(eval, out);
		if (*sc_emulate)
			return cmd_emulate(emulate, out);
		if (*sc_compose)
			return cmd_compose(compose, out);
		if (*sc_inspect)
			return cmd_inspect(inspect_path, out);
		if (*sc_export)
			return cmd_export(exp, out);
	} catch (const UsageError &e)
	{
		err << "usage error: " << e.what() << '\n';
		return kExitUsage;
	} catch (const ConfigError &e)
	{
		err << "config error: " << e.what() << '\n';
		return kExitUsage;
	} catch (const std::exception &e)
	{
		err << "error: " << e.what() << '\n';
		return kExitRuntime;
	}
	return kExitUsage;
}

}
