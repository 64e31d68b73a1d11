// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense float tensors with reverse-mode automatic differentiation.
//
// A Tensor is a shared handle onto a graph node. Copying a Tensor aliases the
// same storage; use clone() for a deep copy. Operations whose inputs require
// gradients record their parents and a backward closure on the result node.
// backward() orders the reachable graph into a ComputationTape and replays it
// in reverse.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace unca
{

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape &shape);
std::string shape_str(const Shape &shape);

struct ShapeError : std::invalid_argument
{
	using std::invalid_argument::invalid_argument;
};

struct ValueError : std::invalid_argument
{
	using std::invalid_argument::invalid_argument;
};

struct NonFiniteError : std::runtime_error
{
	using std::runtime_error::runtime_error;
};

/// When enabled, every operation checks its output for NaN/Inf and throws
/// NonFiniteError. Off by default.
void set_finite_check(bool enabled) noexcept;
bool finite_check_enabled() noexcept;

/// While alive, ops on this thread record no graph even if inputs require
/// gradients.
class NoGradGuard
{
public:
	NoGradGuard();
	~NoGradGuard();
	NoGradGuard(const NoGradGuard &) = delete;
	NoGradGuard &operator=(const NoGradGuard &) = delete;

private:
	bool previous_;
};
bool grad_mode_enabled() noexcept;

namespace detail
{
	struct Node
	{
		Shape shape;
		std::vector<float> data;
		std::vector<float> grad; // empty until first accumulation
		bool requires_grad = false;
		std::vector<std::shared_ptr<Node>> parents;
		std::function<void(Node &)> backward_fn;
		const char *op = "leaf";

		bool is_leaf() const noexcept { return parents.empty(); }
		float *grad_buffer(); // allocates zeros on demand
	};
}

class Tensor
{
public:
	Tensor() = default;

	static Tensor zeros(Shape shape, bool requires_grad = false);
	static Tensor full(Shape shape, float value, bool requires_grad = false);
	static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
	static Tensor scalar(float value, bool requires_grad = false);

	bool defined() const noexcept { return node_ != nullptr; }
	const Shape &shape() const;
	int rank() const { return static_cast<int>(shape().size()); }
	int dim(int axis) const;
	std::size_t numel() const;

	std::span<float> data();
	std::span<const float> data() const;
	float item() const;

	bool requires_grad() const;
	void set_requires_grad(bool flag);
	bool has_grad() const;
	/// Gradient buffer; zeros if nothing has been accumulated yet.
	std::span<const float> grad() const;
	std::span<float> mutable_grad();
	void zero_grad();

	/// Deep copy of the values, detached from any graph.
	Tensor clone() const;
	/// Same as clone() but keeps requires_grad; used to snapshot parameters.
	Tensor clone_param() const;

	bool is_leaf() const;
	const char *op_name() const;

	std::shared_ptr<detail::Node> node() const { return node_; }
	explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
	detail::Node &get() const;
	std::shared_ptr<detail::Node> node_;
};

/// Topologically ordered record of the graph reachable from a root.
class ComputationTape
{
public:
	static ComputationTape record(const Tensor &root);

	std::size_t size() const noexcept { return nodes_.size(); }
	const std::vector<std::shared_ptr<detail::Node>> &nodes() const noexcept { return nodes_; }
	/// Seeds the root gradient and runs every node's backward closure once,
	/// last-recorded first.
	void replay_backward(float seed = 1.0f) const;

private:
	std::vector<std::shared_ptr<detail::Node>> nodes_;
};

/// Accumulates d(root)/d(leaf) into the grad of every requires_grad leaf.
void backward(const Tensor &root, float seed = 1.0f);

bool bitwise_equal(const Tensor &a, const Tensor &b);

enum class Padding
{
	Zero,
	Wrap
};

namespace ops
{
	// elementwise
	Tensor add(const Tensor &a, const Tensor &b);
	Tensor sub(const Tensor &a, const Tensor &b);
	Tensor mul(const Tensor &a, const Tensor &b);
	Tensor scale(const Tensor &a, float factor);
	Tensor relu(const Tensor &a);
	Tensor gelu(const Tensor &a);
	Tensor tanh(const Tensor &a);

	// shape
	Tensor reshape(const Tensor &a, Shape shape);
	/// Contiguous range [start, start+length) along `axis`.
	Tensor slice(const Tensor &a, int axis, int start, int length);
	Tensor concat(const std::vector<Tensor> &parts, int axis);
	/// Stacks equally shaped tensors along a new leading axis.
	Tensor stack(const std::vector<Tensor> &parts);

	// reductions
	Tensor sum(const Tensor &a);
	Tensor mean(const Tensor &a);

	// linear algebra
	Tensor matmul(const Tensor &a, const Tensor &b);
	/// [m,n] + [n] broadcast over rows.
	Tensor add_row(const Tensor &a, const Tensor &row);
	/// [m,n] -> [m,n*k], out[i, h*k + j] = a[i, h].
	Tensor repeat_cols(const Tensor &a, int k);
	/// [H,W,Cin] * [k,k,Cin,Cout] -> [H,W,Cout], "same" output size.
	Tensor conv2d(const Tensor &input, const Tensor &kernels, Padding padding = Padding::Zero);

	/// Softmax of logits / temperature along the last axis.
	Tensor softmax_t(const Tensor &logits, float temperature);
	/// Mean softmax cross-entropy of [b,c] logits against integer labels.
	Tensor softmax_cross_entropy(const Tensor &logits, std::span<const int> labels);
}

}
