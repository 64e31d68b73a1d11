// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include <unca/tensor.hpp>
#include "kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace unca
{

namespace
{
	std::atomic<bool> g_finite_check { false };
	thread_local bool t_grad_enabled = true;

	using NodePtr = std::shared_ptr<detail::Node>;

	void check_output(const detail::Node &n)
	{
		if (!g_finite_check.load(std::memory_order_relaxed))
			return;
		for (float v : n.data)
			if (!std::isfinite(v))
				throw NonFiniteError(std::string("non-finite value produced by ") + n.op);
	}

	/// Creates the result node of an op. Parents are only recorded when one of
	/// them requires a gradient, so inference never builds a graph.
	NodePtr make_result(const char *op, Shape shape, std::initializer_list<NodePtr> inputs)
	{
		auto n = std::make_shared<detail::Node>();
		n->op = op;
		n->shape = std::move(shape);
		n->data.assign(shape_numel(n->shape), 0.0f);
		if (t_grad_enabled)
			for (const auto &p : inputs)
				if (p->requires_grad)
					n->requires_grad = true;
		if (n->requires_grad)
			n->parents.assign(inputs.begin(), inputs.end());
		return n;
	}

	Tensor finish(NodePtr n, std::function<void(detail::Node &)> fn)
	{
		check_output(*n);
		if (n->requires_grad)
			n->backward_fn = std::move(fn);
		return Tensor(std::move(n));
	}

	void require(bool cond, const std::string &msg)
	{
		if (!cond)
			throw ShapeError(msg);
	}

	void require_same_shape(const Tensor &a, const Tensor &b, const char *op)
	{
		if (a.shape() != b.shape())
			throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
	}

	bool wants_grad(const NodePtr &p) { return p->requires_grad; }

	constexpr float kSqrt2OverPi = 0.7978845608028654f;
	constexpr float kGeluCubic = 0.044715f;
}

void set_finite_check(bool enabled) noexcept
{
	g_finite_check.store(enabled);
}
bool finite_check_enabled() noexcept
{
	return g_finite_check.load();
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled)
{
	t_grad_enabled = false;
}
NoGradGuard::~NoGradGuard()
{
	t_grad_enabled = previous_;
}
bool grad_mode_enabled() noexcept
{
	return t_grad_enabled;
}

std::size_t shape_numel(const Shape &shape)
{
	std::size_t n = 1;
	for (int d : shape)
	{
		if (d < 0)
			throw ShapeError("negative dimension in shape " + shape_str(shape));
		n *= static_cast<std::size_t>(d);
	}
	return n;
}

std::string shape_str(const Shape &shape)
{
	std::ostringstream os;
	os << '[';
	for (std::size_t i = 0; i < shape.size(); i++)
		os << (i ? "," : "") << shape[i];
	os << ']';
	return os.str();
}

float *detail::Node::grad_buffer()
{
	if (grad.size() != data.size())
		grad.assign(data.size(), 0.0f);
	return grad.data();
}

// ---------------------------------------------------------------- Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad)
{
	return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad)
{
	auto n = std::make_shared<detail::Node>();
	n->shape = std::move(shape);
	n->data.assign(shape_numel(n->shape), value);
	n->requires_grad = requires_grad;
	return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad)
{
	if (shape_numel(shape) != values.size())
		throw ShapeError("Tensor::from: shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) + " values");
	auto n = std::make_shared<detail::Node>();
	n->shape = std::move(shape);
	n->data = std::move(values);
	n->requires_grad = requires_grad;
	return Tensor(std::move(n));
}

Tensor Tensor::scalar(float value, bool requires_grad)
{
	return from( { }, { value }, requires_grad);
}

detail::Node &Tensor::get() const
{
	if (!node_)
		throw std::logic_error("use of undefined Tensor");
	return *node_;
}

const Shape &Tensor::shape() const
{
	return get().shape;
}
int Tensor::dim(int axis) const
{
	const auto &s = get().shape;
	if (axis < 0)
		axis += static_cast<int>(s.size());
	if (axis < 0 || axis >= static_cast<int>(s.size()))
		throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
	return s[axis];
}
std::size_t Tensor::numel() const
{
	return get().data.size();
}
std::span<float> Tensor::data()
{
	return get().data;
}
std::span<const float> Tensor::data() const
{
	return get().data;
}
float Tensor::item() const
{
	if (numel() != 1)
		throw ShapeError("item() on tensor of shape " + shape_str(shape()));
	return get().data[0];
}
bool Tensor::requires_grad() const
{
	return get().requires_grad;
}
void Tensor::set_requires_grad(bool flag)
{
	if (!is_leaf())
		throw std::logic_error("requires_grad can only be changed on leaf tensors");
	get().requires_grad = flag;
}
bool Tensor::has_grad() const
{
	return get().grad.size() == get().data.size() && !get().data.empty();
}
std::span<const float> Tensor::grad() const
{
	auto &n = get();
	return std::span<const float>(n.grad_buffer(), n.data.size());
}
std::span<float> Tensor::mutable_grad()
{
	auto &n = get();
	return std::span<float>(n.grad_buffer(), n.data.size());
}
void Tensor::zero_grad()
{
	auto &n = get();
	std::fill(n.grad.begin(), n.grad.end(), 0.0f);
}
Tensor Tensor::clone() const
{
	return from(shape(), get().data, false);
}
Tensor Tensor::clone_param() const
{
	return from(shape(), get().data, get().requires_grad);
}
bool Tensor::is_leaf() const
{
	return get().is_leaf();
}
const char *Tensor::op_name() const
{
	return get().op;
}

bool bitwise_equal(const Tensor &a, const Tensor &b)
{
	if (a.shape() != b.shape())
		return false;
	auto da = a.data();
	auto db = b.data();
	return std::memcmp(da.data(), db.data(), da.size() * sizeof(float)) == 0;
}

// ---------------------------------------------------------------- tape

ComputationTape ComputationTape::record(const Tensor &root)
{
	ComputationTape tape;
	std::unordered_set<const detail::Node *> visited;
	// iterative post-order DFS; post-order of a DAG is a topological order
	std::vector<std::pair<NodePtr, std::size_t>> stack;
	stack.emplace_back(root.node(), 0);
	visited.insert(root.node().get());
	while (!stack.empty())
	{
		auto &[node, next] = stack.back();
		if (next < node->parents.size())
		{
			NodePtr parent = node->parents[next++];
			if (parent->requires_grad && visited.insert(parent.get()).second)
				stack.emplace_back(std::move(parent), 0);
		}
		else
		{
			tape.nodes_.push_back(node);
			stack.pop_back();
		}
	}
	return tape;
}

void ComputationTape::replay_backward(float seed) const
{
	if (nodes_.empty())
		return;
	auto &root = *nodes_.back();
	root.grad_buffer()[0] += seed;
	for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
	{
		detail::Node &n = **it;
		if (n.backward_fn && n.grad.size() == n.data.size())
			n.backward_fn(n);
		// interior gradients are no longer needed once propagated
		if (!n.is_leaf())
			std::vector<float>().swap(n.grad);
	}
}

void backward(const Tensor &root, float seed)
{
	if (!root.defined())
		throw std::logic_error("backward on undefined tensor");
	if (root.numel() != 1)
		throw ShapeError("backward requires a scalar root, got shape " + shape_str(root.shape()));
	if (!root.requires_grad())
		throw std::logic_error("backward on a tensor that does not require grad (detached)");
	ComputationTape::record(root).replay_backward(seed);
}

// ---------------------------------------------------------------- ops

namespace ops
{

Tensor add(const Tensor &a, const Tensor &b)
{
	require_same_shape(a, b, "add");
	auto pa = a.node(), pb = b.node();
	auto out = make_result("add", a.shape(), { pa, pb });
	for (std::size_t i = 0; i < out->data.size(); i++)
		out->data[i] = pa->data[i] + pb->data[i];
	return finish(out, [pa, pb](detail::Node &o) {
		for (const auto &p : { pa, pb })
			if (wants_grad(p))
			{
				float *g = p->grad_buffer();
				for (std::size_t i = 0; i < o.grad.size(); i++)
					g[i] += o.grad[i];
			}
	});
}

Tensor sub(const Tensor &a, const Tensor &b)
{
	require_same_shape(a, b, "sub");
	auto pa = a.node(), pb = b.node();
	auto out = make_result("sub", a.shape(), { pa, pb });
	for (std::size_t i = 0; i < out->data.size(); i++)
		out->data[i] = pa->data[i] - pb->data[i];
	return finish(out, [pa, pb](detail::Node &o) {
		if (wants_grad(pa))
		{
			float *g = pa->grad_buffer();
			for (std::size_t i = 0; i < o.grad.size(); i++)
				g[i] += o.grad[i];
		}
		if (wants_grad(pb))
		{
			float *g = pb->grad_buffer();
			for (std::size_t i = 0; i < o.grad.size(); i++)
				g[i] -= o.grad[i];
		}
	});
}

Tensor mul(const Tensor &a, const Tensor &b)
{
	require_same_shape(a, b, "mul");
	auto pa = a.node(), pb = b.node();
	auto out = make_result("mul", a.shape(), { pa, pb });
	for (std::size_t i = 0; i < out->data.size(); i++)
		out->data[i] = pa->data[i] * pb->data[i];
	return finish(out, [pa, pb](detail::Node &o) {
		if (wants_grad(pa))
		{
			float *g = pa->grad_buffer();
			for (std::size_t i = 0; i < o.grad.size(); i++)
				g[i] += o.grad[i] * pb->data[i];
		}
		if (wants_grad(pb))
		{
			float *g = pb->grad_buffer();
			for (std::size_t i = 0; i < o.grad.size(); i++)
				g[i] += o.grad[i] * pa->data[i];
		}
	});
}

Tensor scale(const Tensor &a, float factor)
{
	auto pa = a.node();
	auto out = make_result("scale", a.shape(), { pa });
	for (std::size_t i = 0; i < out->data.size(); i++)
		out->data[i] = pa->data[i] * factor;
	return finish(out, [pa, factor](detail::Node &o) {
		float *g = pa->grad_buffer();
		for (std::size_t i = 0; i < o.grad.size(); i++)
			g[i] += o.grad[i] * factor;
	});
}

Tensor relu(const Tensor &a)
{
	auto pa = a.node();
	auto out = make_result("relu", a.shape(), { pa });
	for (std::size_t i = 0; i < out->data.size(); i++)
		out->data[i] = pa->data[i] > 0.0f ? pa->data[i] : 0.0f;
	return finish(out, [pa](detail::Node &o) {
		float *g = pa->grad_buffer();
		for (std::size_t i = 0; i < o.grad.size(); i++)
			if (pa->data[i] > 0.0f)
				g[i] += o.grad[i];
	});
}

Tensor gelu(const Tensor &a)
{
	// tanh approximation
	auto pa = a.node();
	auto out = make_result("gelu", a.shape(), { pa });
	const std::size_t n = out->data.size();
	std::vector<float> th(n);
	kernels::gelu_forward(pa->data.data(), out->data.data(), th.data(), n);
	if (!out->requires_grad)
		th.clear();
	return finish(out, [pa, th = std::move(th)](detail::Node &o) {
		float *__restrict g = pa->grad_buffer();
		const float *__restrict x = pa->data.data();
		const float *__restrict t = th.data();
		const float *__restrict go = o.grad.data();
		const std::size_t n = o.grad.size();
		for (std::size_t i = 0; i < n; i++)
		{
			const float v = x[i];
			const float inner_d = kSqrt2OverPi * (1.0f + 3.0f * kGeluCubic * v * v);
			const float d = 0.5f * (1.0f + t[i]) + 0.5f * v * (1.0f - t[i] * t[i]) * inner_d;
			g[i] += go[i] * d;
		}
	});
}

Tensor tanh(const Tensor &a)
{
	auto pa = a.node();
	auto out = make_result("tanh", a.shape(), { pa });
	for (std::size_t i = 0; i < out->data.size(); i++)
		out->data[i] = kernels::tanh_fast(pa->data[i]);
	return finish(out, [pa](detail::Node &o) {
		float *g = pa->grad_buffer();
		for (std::size_t i = 0; i < o.grad.size(); i++)
			g[i] += o.grad[i] * (1.0f - o.data[i] * o.data[i]);
	});
}

Tensor reshape(const Tensor &a, Shape shape)
{
	if (shape_numel(shape) != a.numel())
		throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
	auto pa = a.node();
	auto out = make_result("reshape", std::move(shape), { pa });
	out->data = pa->data;
	return finish(out, [pa](detail::Node &o) {
		float *g = pa->grad_buffer();
		for (std::size_t i = 0; i < o.grad.size(); i++)
			g[i] += o.grad[i];
	});
}

namespace
{
	// Splits a shape around `axis` into (outer, axis length, inner) extents.
	struct AxisSplit
	{
		std::size_t outer = 1, len = 1, inner = 1;
	};
	AxisSplit split_axis(const Shape &s, int axis)
	{
		AxisSplit r;
		for (int i = 0; i < axis; i++)
			r.outer *= s[i];
		r.len = s[axis];
		for (std::size_t i = axis + 1; i < s.size(); i++)
			r.inner *= s[i];
		return r;
	}
	int normalize_axis(int axis, int rank, const char *op)
	{
		if (axis < 0)
			axis += rank;
		if (axis < 0 || axis >= rank)
			throw ShapeError(std::string(op) + ": axis out of range");
		return axis;
	}
}

Tensor slice(const Tensor &a, int axis, int start, int length)
{
	axis = normalize_axis(axis, a.rank(), "slice");
	if (start < 0 || length < 0 || start + length > a.dim(axis))
		throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(start + length) + ") out of bounds for axis of size "
				+ std::to_string(a.dim(axis)));
	Shape s = a.shape();
	const auto sp = split_axis(s, axis);
	s[axis] = length;
	auto pa = a.node();
	auto out = make_result("slice", s, { pa });
	for (std::size_t o = 0; o < sp.outer; o++)
	{
		const float *src = pa->data.data() + (o * sp.len + start) * sp.inner;
		std::copy(src, src + length * sp.inner, out->data.data() + o * length * sp.inner);
	}
	return finish(out, [pa, sp, start, length](detail::Node &o) {
		float *g = pa->grad_buffer();
		for (std::size_t i = 0; i < sp.outer; i++)
		{
			float *dst = g + (i * sp.len + start) * sp.inner;
			const float *src = o.grad.data() + i * length * sp.inner;
			for (std::size_t j = 0; j < length * sp.inner; j++)
				dst[j] += src[j];
		}
	});
}

Tensor concat(const std::vector<Tensor> &parts, int axis)
{
	require(!parts.empty(), "concat: no inputs");
	axis = normalize_axis(axis, parts[0].rank(), "concat");
	Shape s = parts[0].shape();
	int total = 0;
	for (const auto &p : parts)
	{
		Shape ps = p.shape();
		require(ps.size() == s.size(), "concat: rank mismatch");
		total += ps[axis];
		ps[axis] = s[axis];
		require(ps == s, "concat: shapes differ outside the concatenation axis");
	}
	s[axis] = total;
	auto out = std::make_shared<detail::Node>();
	out->op = "concat";
	out->shape = s;
	out->data.assign(shape_numel(s), 0.0f);
	std::vector<NodePtr> nodes;
	for (const auto &p : parts)
	{
		nodes.push_back(p.node());
		out->requires_grad = out->requires_grad || (t_grad_enabled && p.requires_grad());
	}
	const auto so = split_axis(s, axis);
	std::size_t offset = 0;
	std::vector<std::size_t> offsets;
	for (const auto &n : nodes)
	{
		const std::size_t len = n->shape[axis];
		offsets.push_back(offset);
		for (std::size_t o = 0; o < so.outer; o++)
			std::copy_n(n->data.data() + o * len * so.inner, len * so.inner, out->data.data() + (o * so.len + offset) * so.inner);
		offset += len;
	}
	if (out->requires_grad)
		out->parents = nodes;
	return finish(out, [nodes, offsets, so, axis](detail::Node &o) {
		for (std::size_t k = 0; k < nodes.size(); k++)
		{
			if (!wants_grad(nodes[k]))
				continue;
			const std::size_t len = nodes[k]->shape[axis];
			float *g = nodes[k]->grad_buffer();
			for (std::size_t i = 0; i < so.outer; i++)
			{
				const float *src = o.grad.data() + (i * so.len + offsets[k]) * so.inner;
				float *dst = g + i * len * so.inner;
				for (std::size_t j = 0; j < len * so.inner; j++)
					dst[j] += src[j];
			}
		}
	});
}

Tensor stack(const std::vector<Tensor> &parts)
{
	require(!parts.empty(), "stack: no inputs");
	std::vector<Tensor> rows;
	Shape row_shape = parts[0].shape();
	row_shape.insert(row_shape.begin(), 1);
	for (const auto &p : parts)
	{
		require(p.shape() == parts[0].shape(), "stack: all inputs must share one shape");
		rows.push_back(reshape(p, row_shape));
	}
	return concat(rows, 0);
}

Tensor sum(const Tensor &a)
{
	auto pa = a.node();
	auto out = make_result("sum", { }, { pa });
	float acc = 0.0f;
	for (float v : pa->data)
		acc += v;
	out->data[0] = acc;
	return finish(out, [pa](detail::Node &o) {
		float *g = pa->grad_buffer();
		const float go = o.grad[0];
		for (std::size_t i = 0; i < pa->data.size(); i++)
			g[i] += go;
	});
}

Tensor mean(const Tensor &a)
{
	require(a.numel() > 0, "mean of empty tensor");
	return scale(sum(a), 1.0f / static_cast<float>(a.numel()));
}

Tensor matmul(const Tensor &a, const Tensor &b)
{
	if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
		throw ShapeError("matmul: dimension mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
	const int m = a.dim(0), n = a.dim(1), p = b.dim(1);
	auto pa = a.node(), pb = b.node();
	auto out = make_result("matmul", { m, p }, { pa, pb });
	kernels::gemm(pa->data.data(), pb->data.data(), out->data.data(), m, n, p);
	return finish(out, [pa, pb, m, n, p](detail::Node &o) {
		if (wants_grad(pa))
			kernels::gemm_nt_accumulate(o.grad.data(), pb->data.data(), pa->grad_buffer(), m, p, n);
		if (wants_grad(pb))
			kernels::gemm_tn_accumulate(pa->data.data(), o.grad.data(), pb->grad_buffer(), m, n, p);
	});
}

Tensor add_row(const Tensor &a, const Tensor &row)
{
	if (a.rank() != 2 || row.rank() != 1 || row.dim(0) != a.dim(1))
		throw ShapeError("add_row: cannot broadcast " + shape_str(row.shape()) + " over " + shape_str(a.shape()));
	const int m = a.dim(0), n = a.dim(1);
	auto pa = a.node(), pr = row.node();
	auto out = make_result("add_row", a.shape(), { pa, pr });
	for (int i = 0; i < m; i++)
		for (int j = 0; j < n; j++)
			out->data[i * n + j] = pa->data[i * n + j] + pr->data[j];
	return finish(out, [pa, pr, m, n](detail::Node &o) {
		if (wants_grad(pa))
		{
			float *g = pa->grad_buffer();
			for (std::size_t i = 0; i < o.grad.size(); i++)
				g[i] += o.grad[i];
		}
		if (wants_grad(pr))
		{
			float *g = pr->grad_buffer();
			for (int i = 0; i < m; i++)
				for (int j = 0; j < n; j++)
					g[j] += o.grad[i * n + j];
		}
	});
}

Tensor repeat_cols(const Tensor &a, int k)
{
	if (a.rank() != 2 || k < 1)
		throw ShapeError("repeat_cols: expects a matrix and k >= 1");
	const int m = a.dim(0), n = a.dim(1);
	auto pa = a.node();
	auto out = make_result("repeat_cols", { m, n * k }, { pa });
	for (int i = 0; i < m; i++)
		for (int h = 0; h < n; h++)
			std::fill_n(out->data.data() + (static_cast<std::size_t>(i) * n + h) * k, k, pa->data[i * n + h]);
	return finish(out, [pa, m, n, k](detail::Node &o) {
		float *g = pa->grad_buffer();
		for (int i = 0; i < m; i++)
			for (int h = 0; h < n; h++)
			{
				const float *src = o.grad.data() + (static_cast<std::size_t>(i) * n + h) * k;
				float acc = 0.0f;
				for (int j = 0; j < k; j++)
					acc += src[j];
				g[i * n + h] += acc;
			}
	});
}

Tensor conv2d(const Tensor &input, const Tensor &kernels, Padding padding)
{
	if (input.rank() != 3 || kernels.rank() != 4)
		throw ShapeError("conv2d: expects [H,W,Cin] input and [k,k,Cin,Cout] kernels");
	const int k = kernels.dim(0);
	if (kernels.dim(1) != k)
		throw ShapeError("conv2d: kernels must be square");
	if (k % 2 == 0)
		throw ShapeError("conv2d: kernel size must be odd, got " + std::to_string(k));
	if (kernels.dim(2) != input.dim(2))
		throw ShapeError("conv2d: channel mismatch, input has " + std::to_string(input.dim(2)) + " channels, kernels expect "
				+ std::to_string(kernels.dim(2)));
	kernels::ConvGeometry geo { input.dim(0), input.dim(1), input.dim(2), kernels.dim(3), k, padding == Padding::Wrap };
	auto pi = input.node(), pk = kernels.node();
	auto out = make_result("conv2d", { geo.height, geo.width, geo.cout }, { pi, pk });
	kernels::conv2d_forward(geo, pi->data.data(), pk->data.data(), out->data.data());
	return finish(out, [pi, pk, geo](detail::Node &o) {
		if (wants_grad(pi))
			kernels::conv2d_backward_input(geo, o.grad.data(), pk->data.data(), pi->grad_buffer());
		if (wants_grad(pk))
			kernels::conv2d_backward_kernels(geo, o.grad.data(), pi->data.data(), pk->grad_buffer());
	});
}

Tensor softmax_t(const Tensor &logits, float temperature)
{
	if (!(temperature > 0.0f))
		throw ValueError("softmax_t: temperature must be positive");
	if (logits.rank() < 1)
		throw ShapeError("softmax_t: logits must have at least one axis");
	const std::size_t n = logits.shape().back();
	const std::size_t rows = n ? logits.numel() / n : 0;
	auto pl = logits.node();
	auto out = make_result("softmax_t", logits.shape(), { pl });
	const float inv_t = 1.0f / temperature;
	for (std::size_t r = 0; r < rows; r++)
	{
		const float *x = pl->data.data() + r * n;
		float *y = out->data.data() + r * n;
		float mx = x[0] * inv_t;
		for (std::size_t i = 1; i < n; i++)
			mx = std::max(mx, x[i] * inv_t);
		float total = 0.0f;
		for (std::size_t i = 0; i < n; i++)
		{
			y[i] = std::exp(x[i] * inv_t - mx);
			total += y[i];
		}
		for (std::size_t i = 0; i < n; i++)
			y[i] /= total;
	}
	return finish(out, [pl, rows, n, inv_t](detail::Node &o) {
		float *g = pl->grad_buffer();
		for (std::size_t r = 0; r < rows; r++)
		{
			const float *y = o.data.data() + r * n;
			const float *gy = o.grad.data() + r * n;
			float dot = 0.0f;
			for (std::size_t i = 0; i < n; i++)
				dot += gy[i] * y[i];
			for (std::size_t i = 0; i < n; i++)
				g[r * n + i] += inv_t * y[i] * (gy[i] - dot);
		}
	});
}

Tensor softmax_cross_entropy(const Tensor &logits, std::span<const int> labels)
{
	if (logits.rank() != 2 || static_cast<std::size_t>(logits.dim(0)) != labels.size())
		throw ShapeError("softmax_cross_entropy: expects [b,c] logits and b labels");
	const int b = logits.dim(0), c = logits.dim(1);
	for (int l : labels)
		if (l < 0 || l >= c)
			throw ValueError("softmax_cross_entropy: label out of range");
	auto pl = logits.node();
	auto out = make_result("softmax_cross_entropy", { }, { pl });
	std::vector<float> probs(static_cast<std::size_t>(b) * c);
	float total = 0.0f;
	for (int r = 0; r < b; r++)
	{
		const float *x = pl->data.data() + static_cast<std::size_t>(r) * c;
		float *p = probs.data() + static_cast<std::size_t>(r) * c;
		const float mx = *std::max_element(x, x + c);
		float z = 0.0f;
		for (int i = 0; i < c; i++)
		{
			p[i] = std::exp(x[i] - mx);
			z += p[i];
		}
		for (int i = 0; i < c; i++)
			p[i] /= z;
		total += -(x[labels[r]] - mx - std::log(z));
	}
	out->data[0] = total / static_cast<float>(b);
	std::vector<int> lab(labels.begin(), labels.end());
	return finish(out, [pl, probs = std::move(probs), lab = std::move(lab), b, c](detail::Node &o) {
		float *g = pl->grad_buffer();
		const float go = o.grad[0] / static_cast<float>(b);
		for (int r = 0; r < b; r++)
			for (int i = 0; i < c; i++)
			{
				const std::size_t idx = static_cast<std::size_t>(r) * c + i;
				g[idx] += go * (probs[idx] - (i == lab[r] ? 1.0f : 0.0f));
			}
	});
}

}

}
