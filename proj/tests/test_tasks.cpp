// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <unca/tasks.hpp>

#include <doctest.h>

using namespace unca;
using unca::testing::random_tensor;

namespace
{

std::vector<float> values(const Tensor &t)
{
	return { t.data().begin(), t.data().end() };
}

std::vector<float> cell(const Tensor &t, int r, int c)
{
	const int w = t.dim(1), ch = t.dim(2);
	const auto d = t.data();
	return { d.begin() + (r * w + c) * ch, d.begin() + (r * w + c + 1) * ch };
}

std::vector<float> plus(const Tensor &a, const Tensor &b)
{
	std::vector<float> s = values(a);
	for (std::size_t i = 0; i < s.size(); i++)
		s[i] += b.data()[i];
	return s;
}

}

TEST_CASE("monolithic hardware")
{
	Rng rng(1);
	const auto a = build_monolithic("identity", 32, 32, 8, 0.1f, rng);
	const auto b = build_monolithic("transpose", 32, 32, 8, 0.1f, rng);
	CHECK(a.field.numel() == 8192);
	CHECK(a.field.node() != b.field.node());
	CHECK_FALSE(bitwise_equal(a.field, b.field));
	for (float v : a.field.data())
		CHECK(std::fabs(v) <= 0.1f);
	CHECK(a.field.requires_grad());
}

TEST_CASE("modular assembly")
{
	Rng rng(2);
	const auto comp = ModularComponents::init(8, kAllTaskKinds, 0.1f, rng);
	const Tensor empty = assemble_modular(comp, TaskKind::Transpose, {}, 6, 7);
	for (int r = 0; r < 6; r++)
		for (int c = 0; c < 7; c++)
			CHECK(cell(empty, r, c) == values(comp.task_embeds.at(TaskKind::Transpose)));

	const std::vector<Placement> one { { Role::Input, 1, 2, 4, 4, "in" } };
	const Tensor f = assemble_modular(comp, TaskKind::Identity, one, 8, 8);
	const auto want = plus(comp.task_embeds.at(TaskKind::Identity), comp.input_embed);
	int hits = 0;
	for (int r = 0; r < 8; r++)
		for (int c = 0; c < 8; c++)
			hits += cell(f, r, c) == want;
	CHECK(hits == 16);

	// Swapping roles only touches the two regions.
	const std::vector<Placement> fwd { { Role::Input, 0, 0, 3, 3, "" }, { Role::Output, 5, 5, 3, 3, "" } };
	const std::vector<Placement> rev { { Role::Output, 0, 0, 3, 3, "" }, { Role::Input, 5, 5, 3, 3, "" } };
	const Tensor a = assemble_modular(comp, TaskKind::Identity, fwd, 8, 8);
	const Tensor b = assemble_modular(comp, TaskKind::Identity, rev, 8, 8);
	for (int r = 0; r < 8; r++)
		for (int c = 0; c < 8; c++)
		{
			const bool touched = fwd[0].contains(r, c) || fwd[1].contains(r, c);
			CHECK((cell(a, r, c) != cell(b, r, c)) == touched);
		}
}

TEST_CASE("distributions")
{
	Rng rng(3);
	Distribution u;
	const Tensor m = sample_matrix(u, 64, 64, rng);
	double mean = 0.0;
	for (float v : m.data())
	{
		mean += v;
		CHECK((v >= -1.0f && v <= 1.0f));
	}
	CHECK(std::fabs(mean / 4096.0) < 0.05);

	Distribution s = Distribution::parse("sparse");
	s.sparsity = 0.9f;
	const Tensor sp = sample_matrix(s, 32, 32, rng);
	int zeros = 0;
	for (float v : sp.data())
		zeros += std::fabs(v) < 1e-6f;
	CHECK(zeros >= 0.85 * 1024);

	const Tensor c = sample_matrix(Distribution::parse("correlated"), 32, 32, rng);
	const auto d = c.data();
	double mu = 0.0;
	for (float v : d)
		mu += v;
	mu /= 1024.0;
	double num = 0.0, den = 0.0;
	for (int r = 0; r < 32; r++)
		for (int col = 0; col < 32; col++)
		{
			const double x = d[r * 32 + col] - mu;
			den += x * x;
			if (col + 1 < 32)
				num += x * (d[r * 32 + col + 1] - mu);
		}
	CHECK(num / den > 0.3);

	CHECK_THROWS_AS(Distribution::parse("laplace"), ValueError);
}

TEST_CASE("symbolic targets")
{
	const Tensor m = Tensor::from( { 2, 2 }, { 1, 2, 3, 4 });
	const Tensor n = Tensor::from( { 2, 2 }, { 5, 6, 7, 8 });
	CHECK(values(symbolic_target(TaskKind::Identity, std::vector { m })) == std::vector<float> { 1, 2, 3, 4 });
	CHECK(values(symbolic_target(TaskKind::Transpose, std::vector { m })) == std::vector<float> { 1, 3, 2, 4 });
	CHECK(values(symbolic_target(TaskKind::MatMul, std::vector { m, n })) == std::vector<float> { 19, 22, 43, 50 });
	CHECK(values(rotate90(m)) == std::vector<float> { 3, 1, 4, 2 });

	Rng rng(4);
	const Tensor r = random_tensor( { 3, 5 }, rng);
	CHECK(bitwise_equal(rotate90(rotate90(rotate90(rotate90(r)))), r));
	CHECK(rotate90(r).shape() == Shape { 5, 3 });

	const std::vector<std::pair<int, int>> shapes { { 4, 3 }, { 3, 5 } };
	CHECK(output_shape(TaskKind::MatMul, shapes) == std::pair { 4, 5 });
	const std::vector<std::pair<int, int>> bad { { 4, 3 }, { 4, 5 } };
	CHECK_THROWS(output_shape(TaskKind::MatMul, bad));
}

TEST_CASE("encode and decode")
{
	Rng rng(5);
	RuleConfig rc;
	rc.mutable_channels = 3;
	rc.hardware_channels = 2;
	const GridState g = make_grid(8, 8, rc, Tensor::zeros( { 8, 8, 2 }));
	const Tensor m = random_tensor( { 3, 4 }, rng);
	const Placement p { Role::Input, 2, 3, 3, 4, "" };
	const GridState e = encode_region(g, m, p);
	CHECK(bitwise_equal(decode_region(e, p), m));
	int nonzero_outside = 0;
	for (int r = 0; r < 8; r++)
		for (int c = 0; c < 8; c++)
			for (float v : cell(e.mutable_state, r, c))
				nonzero_outside += !p.contains(r, c) && v != 0.0f;
	CHECK(nonzero_outside == 0);
	const Tensor blank = decode_region(g, p);
	for (float v : blank.data())
		CHECK(v == 0.0f);
	CHECK_THROWS_AS(encode_region(g, m, Placement { Role::Input, 6, 6, 3, 4, "" }), OutOfBoundsError);
}

TEST_CASE("masks")
{
	const std::vector<Placement> one { { Role::Input, 0, 0, 4, 4, "" }, { Role::Output, 8, 8, 4, 4, "" } };
	double s = 0.0;
	const Tensor m1 = build_mask(one, 16, 16);
	for (float v : m1.data())
		s += v;
	CHECK(s == 16.0);

	const std::vector<Placement> two { { Role::Output, 0, 0, 2, 2, "" }, { Role::Output, 5, 5, 2, 2, "" } };
	s = 0.0;
	const Tensor m2 = build_mask(two, 8, 8);
	for (float v : m2.data())
		s += v;
	CHECK(s == 8.0);

	const std::vector<Placement> none { { Role::Input, 0, 0, 2, 2, "" } };
	CHECK_THROWS_AS(build_mask(none, 8, 8), ValueError);
}

TEST_CASE("task instances")
{
	Rng rng(6);
	const auto comp = ModularComponents::init(8, kAllTaskKinds, 0.1f, rng);
	const HardwareBinding modular { HardwareMode::Modular, &comp, nullptr };
	PlacementPolicy fixed;
	const TaskInstance id = make_instance(TaskKind::Identity, {}, 16, 16, fixed, 16, modular, 16, rng);
	const Placement &out = id.placements[1];
	CHECK(out.role == Role::Output);
	CHECK(bitwise_equal(decode_region(GridState { ops::reshape(id.target, { 16, 16, 1 }), id.hardware() }, out), id.inputs[0]));
	CHECK(bitwise_equal(decode_region(id.initial, id.placements[0]), id.inputs[0]));

	PlacementPolicy random;
	random.mode = PlacementMode::Random;
	random.min_size = 2;
	random.max_size = 6;
	for (int i = 0; i < 20; i++)
	{
		const TaskInstance mm = make_instance(TaskKind::MatMul, {}, 24, 24, random, 16, modular, 4, rng);
		CHECK(mm.placements.size() == 3);
		CHECK(mm.placements[0].cols == mm.placements[1].rows);
		CHECK(mm.placements[2].rows == mm.placements[0].rows);
		CHECK(mm.placements[2].cols == mm.placements[1].cols);
		for (std::size_t a = 0; a < 3; a++)
			for (std::size_t b = a + 1; b < 3; b++)
				CHECK_FALSE(mm.placements[a].overlaps(mm.placements[b]));
	}

	const auto mono = build_monolithic("identity", 16, 16, 8, 0.1f, rng);
	const HardwareBinding mono_binding { HardwareMode::Monolithic, nullptr, &mono };
	CHECK_THROWS_AS(make_instance(TaskKind::Identity, {}, 16, 16, random, 16, mono_binding, 4, rng), ValueError);
	const TaskInstance mi = make_instance(TaskKind::Identity, {}, 16, 16, fixed, 16, mono_binding, 4, rng);
	CHECK(mi.hardware().node() == mono.field.node());
}

TEST_CASE("fixed layouts")
{
	const auto unary = fixed_layout(TaskKind::Transpose, 16, 16, 4);
	CHECK(unary.size() == 2);
	CHECK(unary[0].role == Role::Input);
	CHECK(unary[1].role == Role::Output);
	const auto rev = fixed_layout(TaskKind::Transpose, 16, 16, 4, -1, true);
	CHECK(rev[0].row == unary[1].row);
	CHECK(rev[1].row == unary[0].row);

	const auto corners = fixed_layout(TaskKind::Identity, 16, 16, 4, -1, false, -1);
	CHECK(corners[1].row == 16 - 2 - 4);
	CHECK(corners[1].col == 2);

	const auto mm = fixed_layout(TaskKind::MatMul, 32, 32, 8);
	CHECK(mm.size() == 3);
	CHECK_THROWS_AS(fixed_layout(TaskKind::MatMul, 12, 12, 8), std::exception);
}
