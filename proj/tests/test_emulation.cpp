// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <unca/emulation.hpp>

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace unca;
using unca::testing::max_abs_diff;
using unca::testing::random_tensor;

namespace
{

namespace fs = std::filesystem;

void put_be32(std::ofstream &out, std::uint32_t v)
{
	const char b[4] = { char(v >> 24), char(v >> 16), char(v >> 8), char(v) };
	out.write(b, 4);
}

/// Writes an uncompressed IDX pair of `n` images with pixel value i % 256.
std::pair<fs::path, fs::path> write_idx(const std::string &stem, std::uint32_t n_images, std::uint32_t n_labels,
		std::uint32_t image_magic = 2051, std::size_t drop_bytes = 0)
{
	const fs::path dir = fs::temp_directory_path();
	const fs::path img = dir / (stem + "-images"), lbl = dir / (stem + "-labels");
	{
		std::ofstream out(img, std::ios::binary);
		put_be32(out, image_magic);
		put_be32(out, n_images);
		put_be32(out, 28);
		put_be32(out, 28);
		const std::size_t total = std::size_t(n_images) * 784 - drop_bytes;
		for (std::size_t i = 0; i < total; i++)
			out.put(static_cast<char>(i % 256));
	}
	{
		std::ofstream out(lbl, std::ios::binary);
		put_be32(out, 2049);
		put_be32(out, n_labels);
		for (std::uint32_t i = 0; i < n_labels; i++)
			out.put(static_cast<char>(i % 10));
	}
	return { img, lbl };
}

fs::path data_dir()
{
	return fs::path(UNCA_SOURCE_DIR) / "data" / "mnist";
}

}

TEST_CASE("IDX loader: synthetic files")
{
	const auto [img, lbl] = write_idx("unca_ok", 3, 3);
	const MnistDataset d = load_mnist(img, lbl);
	CHECK(d.size() == 3);
	CHECK(d.images.shape() == Shape { 3, 784 });
	CHECK(d.labels == std::vector<int> { 0, 1, 2 });
	CHECK(d.images.data()[0] == 0.0f);
	CHECK(d.images.data()[255] == 1.0f);
	CHECK(d.images.data()[1] == doctest::Approx(1.0 / 255));
	CHECK(d.head(2).size() == 2);
	CHECK(d.head(10).size() == 3);
}

TEST_CASE("IDX loader: malformed files")
{
	{
		const auto [img, lbl] = write_idx("unca_magic", 2, 2, 2049);
		CHECK_THROWS_AS(load_mnist(img, lbl), DataError);
	}
	{
		const auto [img, lbl] = write_idx("unca_trunc", 2, 2, 2051, 10);
		CHECK_THROWS_WITH_AS(load_mnist(img, lbl), doctest::Contains("truncated"), DataError);
	}
	{
		const auto [img, lbl] = write_idx("unca_count", 3, 2);
		CHECK_THROWS_AS(load_mnist(img, lbl), DataError);
	}
	CHECK_THROWS_AS(load_mnist("/nonexistent/a", "/nonexistent/b"), DataError);
}

TEST_CASE("IDX loader: bundled gzip data")
{
	const fs::path dir = data_dir();
	const MnistDataset test = load_mnist(dir / "t10k-images-idx3-ubyte.gz", dir / "t10k-labels-idx1-ubyte.gz");
	CHECK(test.size() == 2000);
	const auto [lo, hi] = std::minmax_element(test.images.data().begin(), test.images.data().end());
	CHECK(*lo == 0.0f);
	CHECK(*hi == 1.0f);
	for (int l : test.labels)
		CHECK((l >= 0 && l < 10));
}

TEST_CASE("linear classifier: shape and degenerate accuracy")
{
	const fs::path dir = data_dir();
	const MnistDataset test = load_mnist(dir / "t10k-images-idx3-ubyte.gz", dir / "t10k-labels-idx1-ubyte.gz");
	const LinearClassifier zero { Tensor::zeros( { kMnistPixels, kMnistClasses }) };
	const float acc = zero.accuracy(test);
	CHECK(acc >= 0.06f);
	CHECK(acc <= 0.14f);

	Rng rng(1);
	const LinearClassifier trained = train_linear_classifier(test.head(200), { 1, 32, 1e-2f }, rng);
	CHECK(trained.weights.shape() == Shape { 784, 10 });
}

TEST_CASE("block decomposition counts and padding")
{
	Rng rng(2);
	const Tensor w = random_tensor( { 784, 10 }, rng);
	CHECK(block_decompose(random_tensor( { 8, 784 }, rng), w).jobs.size() == 196);

	const Tensor x5 = random_tensor( { 5, 784 }, rng);
	const BlockPlan p = block_decompose(x5, w);
	CHECK(p.row_blocks == 1);
	CHECK(p.inner_blocks == 98);
	CHECK(p.col_blocks == 2);
	// Rows 5..7 of every A block are padding.
	for (const auto &job : p.jobs)
		for (int r = 5; r < 8; r++)
			for (int c = 0; c < 8; c++)
				CHECK(job.a.data()[r * 8 + c] == 0.0f);
	const Tensor out = aggregate(p, execute_blocks(p.jobs, Backend::oracle()));
	CHECK(out.shape() == Shape { 5, 10 });
}

TEST_CASE("oracle emulation equals X*W")
{
	Rng rng(3);
	for (int trial = 0; trial < 5; trial++)
	{
		const int b = uniform_int(rng, 1, 20), n = uniform_int(rng, 1, 40), m = uniform_int(rng, 1, 20);
		const Tensor x = random_tensor( { b, n }, rng), w = random_tensor( { n, m }, rng);
		const Tensor direct = matmul_exact(x, w);
		for (bool scale : { false, true })
		{
			const BlockPlan p = block_decompose(x, w, scale);
			auto results = execute_blocks(p.jobs, Backend::oracle());
			CHECK(max_abs_diff(aggregate(p, results), direct) < 1e-5f);
			std::reverse(results.begin(), results.end());
			CHECK(max_abs_diff(aggregate(p, results), direct) < 1e-5f);
			for (const auto &r : results)
				CHECK(r.mse == 0.0f);
		}
	}
}

TEST_CASE("aggregation: sparsity, missing and duplicate jobs")
{
	Rng rng(4);
	const Tensor x = random_tensor( { 8, 16 }, rng);
	Tensor w = Tensor::zeros( { 16, 8 });
	for (int r = 0; r < 8; r++)
		for (int c = 0; c < 8; c++)
			w.data()[r * 8 + c] = uniform(rng, -1, 1);
	const BlockPlan p = block_decompose(x, w);
	auto results = execute_blocks(p.jobs, Backend::oracle());
	CHECK(results.size() == 2);
	CHECK(bitwise_equal(aggregate(p, results), results[0].product));

	auto missing = results;
	missing.pop_back();
	CHECK_THROWS_AS(aggregate(p, missing), ValueError);
	auto dup = results;
	dup[1].job_id = dup[0].job_id;
	CHECK_THROWS_AS(aggregate(p, dup), ValueError);
}

TEST_CASE("emulation metrics with the oracle backend")
{
	Rng rng(5);
	const Tensor x = random_tensor( { 30, 784 }, rng, 0, 1);
	const Tensor w = random_tensor( { 784, 10 }, rng);
	std::vector<int> labels(30);
	for (int &l : labels)
		l = uniform_int(rng, 0, 9);
	const BlockPlan p = block_decompose(x, w, true);
	const auto results = execute_blocks(p.jobs, Backend::oracle());
	const EmulationMetrics m = aggregate_and_evaluate(p, results, labels, matmul_exact(x, w));
	CHECK(m.samples == 30);
	CHECK(m.agreement == 1.0f);
	CHECK(m.emulated_accuracy == m.reference_accuracy);
}

TEST_CASE("NCA backend runs jobs and reports per-job error")
{
	RuleConfig rc;
	rc.mutable_channels = 4;
	rc.hardware_channels = 3;
	rc.perception_channels = 6;
	rc.pathways = 2;
	rc.hidden = 4;
	TrainConfig tc;
	tc.mix = { { TaskKind::MatMul, 1.0f } };
	const Model model = Model::init(rc, tc);
	Rng rng(6);
	const BlockPlan p = block_decompose(random_tensor( { 8, 8 }, rng), random_tensor( { 8, 8 }, rng), true);
	const auto results = execute_blocks(p.jobs, Backend::nca(model, 2));
	REQUIRE(results.size() == 1);
	// The untrained rule leaves the output region at zero.
	CHECK(results[0].mse > 0.0f);
	for (float v : results[0].product.data())
		CHECK(v == 0.0f);
	std::ostringstream os;
	write_job_errors(os, results);
	CHECK(os.str().starts_with("0\t"));

	Backend missing;
	missing.kind = BackendKind::Nca;
	CHECK_THROWS(execute_blocks(p.jobs, missing));
}
