// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any gated criterion fails. UNCA_ACCEPT_QUICK=1 shrinks
// every training budget for a fast smoke run; gated results are then not
// meaningful.

#include "golden.hpp"
#include "support.hpp"

#include <unca/checkpoint.hpp>
#include <unca/composer.hpp>
#include <unca/emulation.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace unca;
using namespace unca::testing;

namespace
{

namespace fs = std::filesystem;

const bool kQuick = std::getenv("UNCA_ACCEPT_QUICK") != nullptr;

struct Outcome
{
	bool pass = false;
	std::string detail;
	bool gated = true;
};

std::string fmt(const char *f, auto... args)
{
	char buf[512];
	std::snprintf(buf, sizeof buf, f, args...);
	return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
	return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RuleParams live_params(const RuleConfig &c, std::uint64_t seed)
{
	Rng rng(seed);
	RuleParams p = RuleParams::init(c, rng);
	for (float &v : p.out_w.data())
		v = uniform(rng, -0.3f, 0.3f);
	for (float &v : p.out_b.data())
		v = uniform(rng, -0.1f, 0.1f);
	return p;
}

GridState random_grid(int h, int w, const RuleConfig &c, Rng &rng)
{
	GridState g = make_grid(h, w, c, random_tensor( { h, w, c.hardware_channels }, rng));
	g.mutable_state = random_tensor( { h, w, c.mutable_channels }, rng, -0.5f, 0.5f);
	return g;
}

RuleConfig small_rule()
{
	RuleConfig c;
	c.mutable_channels = 4;
	c.hardware_channels = 3;
	c.perception_channels = 6;
	c.pathways = 3;
	c.hidden = 5;
	return c;
}

// ------------------------------------------------------------ criteria

Outcome autodiff()
{
	double worst = 0.0, rollout_err = 0.0;
	Rng rng(1);
	{
		Tensor x = random_tensor( { 5, 5, 2 }, rng, -1, 1, true), k = random_tensor( { 3, 3, 2, 3 }, rng, -1, 1, true);
		const Tensor w = random_tensor( { 5, 5, 3 }, rng);
		worst = std::max(worst, gradient_error([&] { return probe(ops::conv2d(x, k), w); }, { x, k }));
	}
	{
		Tensor a = random_tensor( { 5, 7 }, rng, -1, 1, true), b = random_tensor( { 7, 3 }, rng, -1, 1, true);
		const Tensor w = random_tensor( { 5, 3 }, rng);
		worst = std::max(worst, gradient_error([&] { return probe(ops::matmul(a, b), w); }, { a, b }));
	}
	{
		Tensor l = random_tensor( { 3, 6 }, rng, -2, 2, true);
		const Tensor w = random_tensor( { 3, 6 }, rng);
		worst = std::max(worst, gradient_error([&] { return probe(ops::softmax_t(l, 0.5f), w); }, { l }, 1e-3f));
	}
	const RuleConfig c = small_rule();
	{
		RuleParams p = live_params(c, 10);
		const GridState g = random_grid(4, 4, c, rng);
		const Tensor w = random_tensor( { 4, 4, c.mutable_channels }, rng);
		p.set_trainable(true);
		worst = std::max(worst,
				gradient_error([&] { return probe(step(g, p).mutable_state, w); }, { p.hidden_w, p.hidden_b, p.out_w, p.out_b, p.embed }));
	}
	{
		RuleParams p = live_params(c, 11);
		GridState g = random_grid(6, 6, c, rng);
		g.hardware.set_requires_grad(true);
		const Tensor w = random_tensor( { 6, 6, c.mutable_channels }, rng);
		p.set_trainable(true);
		rollout_err = gradient_error([&] { return probe(run_steps(g, p, 8).mutable_state, w); },
				{ p.perception, p.hidden_w, p.hidden_b, p.out_w, p.out_b, p.embed, g.hardware });
	}
	return { worst < 1e-3 && rollout_err < 5e-3, fmt("max_rel_err=%.2e (tol 1e-3) rollout8_rel_err=%.2e (tol 5e-3)", worst, rollout_err) };
}

Outcome nca_invariants()
{
	const RuleConfig c; // default dimensions
	const RuleParams p = live_params(c, 6);
	Rng rng(6);
	const GridState g = random_grid(9, 10, c, rng);
	const Tensor hw_before = g.hardware.clone();
	const Tensor state_before = g.mutable_state.clone();
	const GridState a = step(g, p), b = step(g, p);
	const bool immutable = bitwise_equal(a.hardware, hw_before) && bitwise_equal(g.mutable_state, state_before);
	const bool deterministic = bitwise_equal(a.mutable_state, b.mutable_state)
			&& bitwise_equal(run_steps(g, p, 5).mutable_state, run_steps(g, p, 5).mutable_state);

	// synchrony: every cell updated from the same old state
	const Tensor perc = perceive(g.mutable_state, p);
	const int mc = c.mutable_channels;
	float sync_err = 0.0f;
	for (int r = 0; r < 9; r++)
		for (int col = 0; col < 10; col++)
		{
			const int cell = r * 10 + col;
			const auto pc = perc.data().subspan(cell * c.perception_channels, c.perception_channels);
			const auto hc = g.hardware.data().subspan(cell * c.hardware_channels, c.hardware_channels);
			const Tensor d = update_cell(pc, hc, p);
			for (int k = 0; k < mc; k++)
				sync_err = std::max(sync_err, std::fabs(g.mutable_state.data()[cell * mc + k] + d.data()[k] - a.mutable_state.data()[cell * mc + k]));
		}

	// locality: a perturbation spreads at most (k-1)/2 cells per step
	const int radius = (c.kernel_size - 1) / 2, n = 15, centre = 7;
	const GridState base = random_grid(n, n, c, rng);
	GridState poked = base;
	poked.mutable_state = base.mutable_state.clone();
	poked.mutable_state.data()[(centre * n + centre) * mc + 1] += 0.5f;
	bool local = true;
	for (int s = 1; s <= 5; s++)
	{
		const GridState x = run_steps(base, p, s), y = run_steps(poked, p, s);
		for (int r = 0; r < n; r++)
			for (int col = 0; col < n; col++)
				if (std::max(std::abs(r - centre), std::abs(col - centre)) > radius * s)
					for (int k = 0; k < mc; k++)
					{
						const int i = (r * n + col) * mc + k;
						local &= x.mutable_state.data()[i] == y.mutable_state.data()[i];
					}
	}
	const bool pass = immutable && deterministic && local && sync_err < 1e-5f;
	return { pass, fmt("immutable=%d deterministic=%d local=%d sync_err=%.2e", immutable, deterministic, local, sync_err) };
}

Outcome eval_window()
{
	Rng rng(9);
	std::set<int> seen;
	bool inside = true;
	for (int i = 0; i < 10000; i++)
	{
		const int t = sample_eval_index(64, rng);
		inside &= t >= 48 && t <= 64;
		seen.insert(t);
	}
	return { inside && seen.size() == 17, fmt("draws=10000 distinct=%zu range=[%d,%d]", seen.size(), *seen.begin(), *seen.rbegin()) };
}

TrainConfig desk(TaskKind kind)
{
	TrainConfig t;
	t.mix = { { kind, 1.0f } };
	t.height = t.width = 16;
	t.batch_size = 8;
	t.placement.matrix_size = 4;
	t.updates = kQuick ? 20 : 2000;
	t.eval_every = 0;
	t.eval_instances = 64;
	return t;
}

struct DeskRun
{
	float initial = 0.0f;
	float final = 0.0f;
	double mean_ms = 0.0;
	double seconds = 0.0;
	Model model;
};

DeskRun desk_train(const RuleConfig &rc, const TrainConfig &tc, TaskKind kind)
{
	const auto t0 = std::chrono::steady_clock::now();
	Trainer t(Model::init(rc, tc), tc);
	DeskRun r;
	r.initial = t.evaluate(kind);
	const auto log = t.run(tc.updates);
	r.final = t.evaluate(kind);
	for (const auto &u : log)
		r.mean_ms += u.wall_ms;
	r.mean_ms /= std::max<std::size_t>(1, log.size());
	r.seconds = seconds_since(t0);
	r.model = t.model().clone();
	return r;
}

std::optional<DeskRun> identity_run;

Outcome desk_unary(TaskKind kind, float bound)
{
	DeskRun r = desk_train(RuleConfig {}, desk(kind), kind);
	const float ratio = r.final / r.initial;
	Outcome o { ratio <= bound, fmt("updates=%d initial=%.5f final=%.5f ratio=%.4f (bound %.2f) time=%.0fs", desk(kind).updates, r.initial, r.final,
			ratio, bound, r.seconds) };
	if (kind == TaskKind::Identity)
		identity_run = std::move(r);
	return o;
}

Outcome desk_matmul()
{
	const DeskRun r = desk_train(RuleConfig {}, desk(TaskKind::MatMul), TaskKind::MatMul);
	return { true, fmt("reported only: updates=%d initial=%.5f final=%.5f ratio=%.4f time=%.0fs", desk(TaskKind::MatMul).updates, r.initial, r.final,
			r.final / r.initial, r.seconds),
		false };
}

Outcome finetune_contract()
{
	if (!identity_run)
		return { false, "needs the Identity desk run" };
	const RuleConfig rc;
	TrainConfig ft = desk(TaskKind::Identity);
	ft.placement.reversed = true;
	ft.updates = kQuick ? 10 : 100;
	const auto t0 = std::chrono::steady_clock::now();
	TrainResult r = finetune_hardware(identity_run->model, rc, ft);
	const double secs = seconds_since(t0);
	bool unchanged = true;
	auto before = identity_run->model.rule.named();
	auto after = r.trainer.model().rule.named();
	for (std::size_t i = 0; i < before.size(); i++)
		unchanged &= bitwise_equal(*before[i].second, *after[i].second);
	double ms = 0.0;
	for (const auto &u : r.log)
		ms += u.wall_ms;
	ms /= std::max<std::size_t>(1, r.log.size());
	const double speedup = identity_run->mean_ms / ms;
	return { unchanged && speedup >= 1.3,
		fmt("rule_unchanged=%d full_ms=%.1f finetune_ms=%.1f speedup=%.2f (bound 1.30) reversed_loss=%.5f time=%.0fs", unchanged,
				identity_run->mean_ms, ms, speedup, r.trainer.evaluate(TaskKind::Identity), secs) };
}

Outcome gradient_routing()
{
	TrainConfig tc = desk(TaskKind::Identity);
	tc.updates = 3;
	RuleConfig rc = small_rule();
	Trainer t(Model::init(rc, tc), tc);
	const Model before = t.model().clone();
	t.run(3);
	bool zero = true, moved = false;
	for (TaskKind k : { TaskKind::Transpose, TaskKind::MatMul, TaskKind::Rotate90 })
		zero &= bitwise_equal(t.model().modular.task_embeds.at(k), before.modular.task_embeds.at(k)) && t.optimizer().at("hw/task/" + to_string(k)).t == 0;
	moved = !bitwise_equal(t.model().modular.task_embeds.at(TaskKind::Identity), before.modular.task_embeds.at(TaskKind::Identity));

	tc.hardware_mode = HardwareMode::Monolithic;
	Model mono = Model::init(rc, tc);
	TrainConfig both = tc;
	both.mix = { { TaskKind::Identity, 1.0f }, { TaskKind::Transpose, 1.0f } };
	Rng rng(1);
	mono.ensure_hardware(both, rng);
	const Tensor field = mono.monolithic.at("transpose").field.clone();
	Trainer tm(std::move(mono), tc);
	tm.run(3);
	const bool mono_zero = bitwise_equal(tm.model().monolithic.at("transpose").field, field);
	return { zero && moved && mono_zero, fmt("absent_modular_unchanged=%d present_moved=%d absent_monolithic_unchanged=%d", zero, moved, mono_zero) };
}

fs::path mnist_dir()
{
	return source_dir() / "data" / "mnist";
}

struct Mnist
{
	MnistDataset train, test;
	LinearClassifier clf;
	float accuracy = 0.0f;
};

const Mnist &mnist()
{
	static const Mnist m = [] {
		Mnist m;
		m.train = load_mnist(mnist_dir() / "train-images-idx3-ubyte.gz", mnist_dir() / "train-labels-idx1-ubyte.gz");
		m.test = load_mnist(mnist_dir() / "t10k-images-idx3-ubyte.gz", mnist_dir() / "t10k-labels-idx1-ubyte.gz");
		Rng rng(0);
		m.clf = train_linear_classifier(m.train, ClassifierSchedule {}, rng);
		m.accuracy = m.clf.accuracy(m.test);
		return m;
	}();
	return m;
}

Outcome oracle_emulation()
{
	Rng rng(20);
	float worst = 0.0f;
	int unaligned = 0;
	for (int trial = 0; trial < 20; trial++)
	{
		const int b = trial < 4 ? 8 * (trial + 1) : uniform_int(rng, 1, 40);
		const int n = uniform_int(rng, 1, 60), m = uniform_int(rng, 1, 20);
		unaligned += b % 8 != 0;
		const Tensor x = random_tensor( { b, n }, rng), w = random_tensor( { n, m }, rng);
		const BlockPlan plan = block_decompose(x, w, trial % 2 == 1);
		worst = std::max(worst, max_abs_diff(aggregate(plan, execute_blocks(plan.jobs, Backend::oracle())), matmul_exact(x, w)));
	}
	const Mnist &d = mnist();
	const BlockPlan plan = block_decompose(d.test.images, d.clf.weights, true);
	const EmulationMetrics em = aggregate_and_evaluate(plan, execute_blocks(plan.jobs, Backend::oracle()), d.test.labels, d.clf.logits(d.test.images));
	return { worst < 1e-5f && unaligned > 0 && em.agreement == 1.0f,
		fmt("pairs=20 (b%%8!=0: %d) max_abs=%.2e (tol 1e-5) classifier_agreement=%.4f over %d samples", unaligned, worst, em.agreement, em.samples) };
}

Outcome classifier()
{
	const Mnist &d = mnist();
	return { d.accuracy >= 0.80f, fmt("test_accuracy=%.4f (bound 0.80) train=%d test=%d", d.accuracy, d.train.size(), d.test.size()) };
}

Outcome nca_emulation()
{
	// MatMul smoke training on the emulation layout: 8x8 blocks on 32x32.
	TrainConfig tc = desk(TaskKind::MatMul);
	tc.height = tc.width = 32;
	tc.placement.matrix_size = kBlock;
	tc.steps = 24;
	tc.batch_size = 4;
	tc.updates = kQuick ? 5 : 400;
	tc.eval_instances = 16;
	const auto t0 = std::chrono::steady_clock::now();
	const DeskRun r = desk_train(RuleConfig {}, tc, TaskKind::MatMul);
	const bool smoke = std::isfinite(r.final) && r.final < r.initial;

	const Mnist &d = mnist();
	const MnistDataset sub = d.test.head(kQuick ? 8 : 200);
	const BlockPlan plan = block_decompose(sub.images, d.clf.weights, true);
	const auto results = execute_blocks(plan.jobs, Backend::nca(r.model, tc.steps));
	const EmulationMetrics em = aggregate_and_evaluate(plan, results, sub.labels, d.clf.logits(sub.images));
	return { smoke && em.emulated_accuracy > 0.15f,
		fmt("smoke: updates=%d loss %.4f -> %.4f | samples=%d emulated_accuracy=%.4f (gate >0.15, reference run ~0.60) agreement=%.4f (reference "
		    "run ~0.69) mean_job_mse=%.4f time=%.0fs",
				tc.updates, r.initial, r.final, em.samples, em.emulated_accuracy, em.agreement, em.mean_job_mse, seconds_since(t0)) };
}

Outcome composer()
{
	int corpus = 0, corpus_ok = 0;
	for (const char *sub : { "valid", "invalid" })
		for (const auto &e : fs::directory_iterator(source_dir() / "tests" / "corpus" / sub))
			if (e.path().extension() == ".tg")
			{
				fs::path golden = e.path();
				golden.replace_extension(".expected");
				corpus++;
				corpus_ok += corpus_outcome(e.path()) == slurp(golden);
			}

	const auto comp = components();
	auto load = [&](const char *name) { return compile_plan(parse_task_graph(slurp(source_dir() / "graphs" / name)), comp); };
	auto inputs = [](const ExecutionPlan &plan, std::uint64_t seed) {
		Rng rng(seed);
		std::map<std::string, Tensor> in;
		for (const auto &t : plan.initial_tags)
			in[t] = random_tensor( { plan.regions.at(t).rows, plan.regions.at(t).cols }, rng);
		return in;
	};

	const ExecutionPlan rot = load("four_rotations.tg");
	const auto rin = inputs(rot, 1);
	const bool rot_exact = bitwise_equal(decode_region(execute_plan(rot, rin, BackendKind::Oracle).final_state, rot.regions.at("A")), rin.at("A"));

	const ExecutionPlan dmr = load("distribute_multiply_rotate.tg");
	const auto din = inputs(dmr, 2);
	const Tensor &m = din.at("M");
	const float dmr_err = max_abs_diff(decode_region(execute_plan(dmr, din, BackendKind::Oracle).final_state, dmr.regions.at("M")),
			rotate90(matmul_exact(m, m)));

	const ExecutionPlan corner = load("corner_distribution.tg");
	const auto cin = inputs(corner, 3);
	const PlanResult cr = execute_plan(corner, cin, BackendKind::Oracle);
	bool corners = corner.height == 64 && corner.width == 64;
	for (const auto &[tag, p] : corner.regions)
		if (tag != "C")
			corners &= bitwise_equal(decode_region(cr.final_state, p), cin.at("C"));

	return { corpus_ok == corpus && rot_exact && dmr.stages.size() == 3 && dmr_err < 1e-5f && corners,
		fmt("golden=%d/%d four_rotations_exact=%d dmr_stages=%zu dmr_max_abs=%.2e (tol 1e-5) corners_64x64=%d", corpus_ok, corpus, rot_exact,
				dmr.stages.size(), dmr_err, corners) };
}

Outcome checkpoint()
{
	RunConfig c;
	c.train = desk(TaskKind::Identity);
	c.train.mix = { { TaskKind::Identity, 1.0f }, { TaskKind::Transpose, 1.0f } };
	c.train.steps = 8;
	c.train.batch_size = 2;
	c.train.updates = 10;

	Trainer a(Model::init(c.rule, c.train), c.train);
	a.run(3);
	const fs::path p1 = fs::temp_directory_path() / "unca_accept_1.ckpt", p2 = fs::temp_directory_path() / "unca_accept_2.ckpt";
	save_checkpoint(make_checkpoint(a, c), p1);
	save_checkpoint(load_checkpoint(p1), p2);
	const bool round_trip = slurp(p1) == slurp(p2) && serialize(make_checkpoint(resume(restore(load_checkpoint(p1))), c)) == serialize(load_checkpoint(p1));

	Trainer straight(Model::init(c.rule, c.train), c.train);
	straight.run(10);
	Trainer first(Model::init(c.rule, c.train), c.train);
	first.run(5);
	save_checkpoint(make_checkpoint(first, c), p1);
	Trainer second = resume(restore(load_checkpoint(p1)));
	second.run(5);
	const bool resumed = serialize(make_checkpoint(straight, c)) == serialize(make_checkpoint(second, c));
	fs::remove(p1);
	fs::remove(p2);
	return { round_trip && resumed, fmt("byte_round_trip=%d resume_10_updates_bitwise=%d", round_trip, resumed) };
}

}

int main()
{
	const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria {
		{ "autodiff-gradients", autodiff },
		{ "nca-invariants", nca_invariants },
		{ "evaluation-window", eval_window },
		{ "gradient-routing", gradient_routing },
		{ "composer", composer },
		{ "checkpoint", checkpoint },
		{ "oracle-emulation", oracle_emulation },
		{ "linear-classifier", classifier },
		{ "desk-identity", [] { return desk_unary(TaskKind::Identity, 0.10f); } },
		{ "desk-transpose", [] { return desk_unary(TaskKind::Transpose, 0.25f); } },
		{ "desk-matmul", desk_matmul },
		{ "finetune-contract", finetune_contract },
		{ "nca-emulation", nca_emulation },
	};
	if (kQuick)
		std::cout << "# quick mode: reduced budgets\n";
	int failed = 0;
	for (const auto &[name, run] : criteria)
	{
		const auto t0 = std::chrono::steady_clock::now();
		Outcome o;
		try
		{
			o = run();
		} catch (const std::exception &e)
		{
			o = { false, std::string("exception: ") + e.what() };
		}
		const char *tag = !o.gated ? "INFO" : o.pass ? "PASS" : "FAIL";
		std::cout << tag << "  " << name << "  " << o.detail << "  [" << fmt("%.1fs", seconds_since(t0)) << "]" << std::endl;
		failed += o.gated && !o.pass;
	}
	std::cout << (failed == 0 ? "all gated criteria passed" : fmt("%d gated criteria failed", failed)) << std::endl;
	return failed == 0 ? 0 : 1;
}
