// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include <unca/emulation.hpp>

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <ostream>

namespace unca
{

namespace
{
	// gzread passes plain files through unchanged, so one reader covers both.
	std::vector<unsigned char> read_file(const std::filesystem::path &path)
	{
		std::unique_ptr<gzFile_s, int (*)(gzFile)> f(gzopen(path.c_str(), "rb"), gzclose);
		if (!f)
			throw DataError("cannot open " + path.string());
		std::vector<unsigned char> bytes;
		unsigned char buf[1 << 16];
		for (;;)
		{
			const int n = gzread(f.get(), buf, sizeof buf);
			if (n < 0)
				throw DataError(path.string() + ": truncated or corrupt stream");
			if (n == 0)
				break;
			bytes.insert(bytes.end(), buf, buf + n);
		}
		return bytes;
	}

	std::uint32_t be32(const std::vector<unsigned char> &b, std::size_t at)
	{
		return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) | (std::uint32_t(b[at + 2]) << 8) | std::uint32_t(b[at + 3]);
	}

	void require_size(const std::vector<unsigned char> &b, std::size_t need, const std::filesystem::path &path)
	{
		if (b.size() < need)
			throw DataError(path.string() + ": truncated, expected " + std::to_string(need) + " bytes, found " + std::to_string(b.size()));
	}

	float max_abs(const Tensor &t)
	{
		float m = 0.0f;
		for (float v : t.data())
			m = std::max(m, std::fabs(v));
		return m;
	}

	// [8,8] block (bi, bj) of `m`, zero beyond its edges.
	Tensor block_of(const Tensor &m, int bi, int bj)
	{
		const int rows = m.dim(0), cols = m.dim(1);
		Tensor out = Tensor::zeros( { kBlock, kBlock });
		auto o = out.data();
		const auto src = m.data();
		for (int r = 0; r < kBlock; r++)
			for (int c = 0; c < kBlock; c++)
			{
				const int rr = bi * kBlock + r, cc = bj * kBlock + c;
				if (rr < rows && cc < cols)
					o[r * kBlock + c] = src[static_cast<std::size_t>(rr) * cols + cc];
			}
		return out;
	}

	int blocks_for(int n)
	{
		return (n + kBlock - 1) / kBlock;
	}
}

MnistDataset MnistDataset::head(int n) const
{
	const int k = std::clamp(n, 0, size());
	MnistDataset d;
	d.images = Tensor::from( { k, kMnistPixels }, std::vector<float>(images.data().begin(), images.data().begin() + k * kMnistPixels));
	d.labels.assign(labels.begin(), labels.begin() + k);
	return d;
}

MnistDataset load_mnist(const std::filesystem::path &images, const std::filesystem::path &labels)
{
	const auto ib = read_file(images);
	const auto lb = read_file(labels);
	require_size(ib, 16, images);
	require_size(lb, 8, labels);
	if (be32(ib, 0) != 2051)
		throw DataError(images.string() + ": bad magic " + std::to_string(be32(ib, 0)) + ", expected 2051");
	if (be32(lb, 0) != 2049)
		throw DataError(labels.string() + ": bad magic " + std::to_string(be32(lb, 0)) + ", expected 2049");
	const std::uint32_t n = be32(ib, 4), rows = be32(ib, 8), cols = be32(ib, 12), nl = be32(lb, 4);
	if (rows != 28 || cols != 28)
		throw DataError(images.string() + ": images are " + std::to_string(rows) + "x" + std::to_string(cols) + ", expected 28x28");
	if (n != nl)
		throw DataError("image count " + std::to_string(n) + " does not match label count " + std::to_string(nl));
	require_size(ib, 16 + std::size_t(n) * kMnistPixels, images);
	require_size(lb, 8 + std::size_t(n), labels);

	MnistDataset d;
	std::vector<float> px(std::size_t(n) * kMnistPixels);
	for (std::size_t i = 0; i < px.size(); i++)
		px[i] = static_cast<float>(ib[16 + i]) / 255.0f;
	d.images = Tensor::from( { static_cast<int>(n), kMnistPixels }, std::move(px));
	d.labels.resize(n);
	for (std::uint32_t i = 0; i < n; i++)
	{
		d.labels[i] = lb[8 + i];
		if (d.labels[i] >= kMnistClasses)
			throw DataError(labels.string() + ": label " + std::to_string(d.labels[i]) + " at index " + std::to_string(i) + " is out of range");
	}
	return d;
}

std::vector<int> argmax_rows(const Tensor &logits)
{
	if (logits.rank() != 2)
		throw ShapeError("argmax_rows: expects a matrix");
	const int rows = logits.dim(0), cols = logits.dim(1);
	const auto d = logits.data();
	std::vector<int> out(rows);
	for (int r = 0; r < rows; r++)
	{
		const auto row = d.subspan(static_cast<std::size_t>(r) * cols, cols);
		out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
	}
	return out;
}

float accuracy(std::span<const int> predictions, std::span<const int> labels)
{
	if (predictions.size() != labels.size())
		throw ValueError("accuracy: prediction and label counts differ");
	if (labels.empty())
		return 0.0f;
	std::size_t hits = 0;
	for (std::size_t i = 0; i < labels.size(); i++)
		hits += predictions[i] == labels[i];
	return static_cast<float>(hits) / static_cast<float>(labels.size());
}

Tensor LinearClassifier::logits(const Tensor &x) const
{
	NoGradGuard guard;
	return ops::matmul(x, weights);
}

float LinearClassifier::accuracy(const MnistDataset &data) const
{
	return unca::accuracy(predict(data.images), data.labels);
}

LinearClassifier train_linear_classifier(const MnistDataset &train, const ClassifierSchedule &schedule, Rng &rng)
{
	if (train.size() == 0)
		throw ValueError("train_linear_classifier: empty training set");
	if (schedule.epochs < 0 || schedule.batch_size < 1 || !(schedule.lr > 0.0f))
		throw ValueError("train_linear_classifier: invalid schedule");

	LinearClassifier clf { Tensor::zeros( { kMnistPixels, kMnistClasses }, true) };
	AdamState state = AdamState::for_param(clf.weights, AdamHyper { .lr = schedule.lr });
	std::vector<int> order(train.size());
	const auto px = train.images.data();
	for (int epoch = 0; epoch < schedule.epochs; epoch++)
	{
		std::iota(order.begin(), order.end(), 0);
		std::shuffle(order.begin(), order.end(), rng);
		for (int start = 0; start < train.size(); start += schedule.batch_size)
		{
			const int n = std::min(schedule.batch_size, train.size() - start);
			std::vector<float> xb(static_cast<std::size_t>(n) * kMnistPixels);
			std::vector<int> yb(n);
			for (int r = 0; r < n; r++)
			{
				const int idx = order[start + r];
				std::copy_n(px.begin() + static_cast<std::ptrdiff_t>(idx) * kMnistPixels, kMnistPixels, xb.begin() + r * kMnistPixels);
				yb[r] = train.labels[idx];
			}
			Tensor loss = ops::softmax_cross_entropy(ops::matmul(Tensor::from( { n, kMnistPixels }, std::move(xb)), clf.weights), yb);
			if (!std::isfinite(loss.item()))
				throw NonFiniteError("train_linear_classifier: loss diverged in epoch " + std::to_string(epoch));
			backward(loss);
			adam_step(clf.weights, clf.weights.grad(), state, true);
			clf.weights.zero_grad();
		}
	}
	return clf;
}

BlockPlan block_decompose(const Tensor &x, const Tensor &w, bool scale)
{
	if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0))
		throw ShapeError("block_decompose: cannot multiply " + shape_str(x.shape()) + " by " + shape_str(w.shape()));
	BlockPlan plan;
	plan.rows = x.dim(0);
	plan.inner = x.dim(1);
	plan.cols = w.dim(1);
	plan.row_blocks = blocks_for(plan.rows);
	plan.inner_blocks = blocks_for(plan.inner);
	plan.col_blocks = blocks_for(plan.cols);

	// W blocks are shared across row blocks
	std::vector<Tensor> wb;
	for (int k = 0; k < plan.inner_blocks; k++)
		for (int j = 0; j < plan.col_blocks; j++)
			wb.push_back(block_of(w, k, j));

	for (int i = 0; i < plan.row_blocks; i++)
		for (int k = 0; k < plan.inner_blocks; k++)
		{
			const Tensor a = block_of(x, i, k);
			for (int j = 0; j < plan.col_blocks; j++)
			{
				BlockJob job;
				job.id = static_cast<int>(plan.jobs.size());
				job.i = i, job.k = k, job.j = j;
				job.a = a.clone();
				job.b = wb[k * plan.col_blocks + j].clone();
				if (scale)
				{
					const float sa = max_abs(job.a), sb = max_abs(job.b);
					job.scale_a = sa > 0.0f ? sa : 1.0f;
					job.scale_b = sb > 0.0f ? sb : 1.0f;
					for (float &v : job.a.data())
						v /= job.scale_a;
					for (float &v : job.b.data())
						v /= job.scale_b;
				}
				plan.jobs.push_back(std::move(job));
			}
		}
	return plan;
}

Backend Backend::nca(const Model &model, int steps, int height, int width)
{
	if (steps < 1)
		throw ValueError("nca backend: T_steps must be at least 1");
	Backend b;
	b.kind = BackendKind::Nca;
	b.model = &model;
	b.steps = steps;
	b.height = height;
	b.width = width;
	return b;
}

BlockResult execute_block(const BlockJob &job, const Backend &backend)
{
	const Tensor exact = matmul_exact(job.a, job.b);
	Tensor scaled;
	if (backend.kind == BackendKind::Oracle)
		scaled = exact;
	else
	{
		if (backend.model == nullptr)
			throw ValueError("execute_blocks: the NCA backend needs a trained checkpoint");
		NoGradGuard guard;
		const Model &model = *backend.model;
		const auto placements = fixed_layout(TaskKind::MatMul, backend.height, backend.width, kBlock);
		const Tensor hw = assemble_modular(model.modular, TaskKind::MatMul, placements, backend.height, backend.width);
		GridState grid = make_grid(backend.height, backend.width, model.rule.config, hw);
		encode_region_inplace(grid.mutable_state, job.a, placements[0]);
		encode_region_inplace(grid.mutable_state, job.b, placements[1]);
		Rng rng = derive_rng(0, static_cast<std::uint64_t>(job.id));
		const GridState final_state = run_steps(grid, model.rule, backend.steps, &rng);
		scaled = decode_region(final_state, placements[2]);
	}

	BlockResult r;
	r.job_id = job.id;
	r.product = scaled.clone();
	const std::span<const float> s = scaled.data(), e = exact.data();
	double se = 0.0;
	for (std::size_t i = 0; i < s.size(); i++)
		se += double(s[i] - e[i]) * double(s[i] - e[i]);
	r.mse = static_cast<float>(se / static_cast<double>(s.size()));
	const float unscale = job.scale_a * job.scale_b;
	for (float &v : r.product.data())
		v *= unscale;
	return r;
}

std::vector<BlockResult> execute_blocks(std::span<const BlockJob> jobs, const Backend &backend)
{
	std::vector<BlockResult> out;
	out.reserve(jobs.size());
	for (const auto &job : jobs)
		out.push_back(execute_block(job, backend));
	return out;
}

Tensor aggregate(const BlockPlan &plan, std::span<const BlockResult> results)
{
	std::vector<const BlockResult *> by_id(plan.jobs.size(), nullptr);
	for (const auto &r : results)
	{
		if (r.job_id < 0 || r.job_id >= static_cast<int>(by_id.size()))
			throw ValueError("aggregate: result for unknown job " + std::to_string(r.job_id));
		if (by_id[r.job_id] != nullptr)
			throw ValueError("aggregate: duplicate result for job " + std::to_string(r.job_id));
		by_id[r.job_id] = &r;
	}
	Tensor out = Tensor::zeros( { plan.rows, plan.cols });
	auto o = out.data();
	// Sum in job order so the result does not depend on execution order.
	for (const auto &job : plan.jobs)
	{
		const BlockResult *r = by_id[job.id];
		if (r == nullptr)
			throw ValueError("aggregate: missing result for job " + std::to_string(job.id));
		const auto p = r->product.data();
		for (int rr = 0; rr < kBlock; rr++)
			for (int cc = 0; cc < kBlock; cc++)
			{
				const int row = job.i * kBlock + rr, col = job.j * kBlock + cc;
				if (row < plan.rows && col < plan.cols)
					o[static_cast<std::size_t>(row) * plan.cols + col] += p[rr * kBlock + cc];
			}
	}
	return out;
}

EmulationMetrics aggregate_and_evaluate(const BlockPlan &plan, std::span<const BlockResult> results, std::span<const int> labels,
		const Tensor &reference_logits)
{
	const Tensor logits = aggregate(plan, results);
	if (static_cast<int>(labels.size()) != plan.rows || reference_logits.rank() != 2 || reference_logits.dim(0) != plan.rows
			|| reference_logits.dim(1) != plan.cols)
		throw ShapeError("aggregate_and_evaluate: labels and reference logits must cover every row");
	const auto emulated = argmax_rows(logits);
	const auto reference = argmax_rows(reference_logits);
	EmulationMetrics m;
	m.samples = plan.rows;
	m.emulated_accuracy = accuracy(emulated, labels);
	m.reference_accuracy = accuracy(reference, labels);
	m.agreement = accuracy(emulated, reference);
	double total = 0.0;
	for (const auto &r : results)
		total += r.mse;
	m.mean_job_mse = results.empty() ? 0.0f : static_cast<float>(total / static_cast<double>(results.size()));
	return m;
}

void write_job_errors(std::ostream &os, std::span<const BlockResult> results)
{
	for (const auto &r : results)
		os << r.job_id << '\t' << r.mse << '\n';
}

}
