// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0
//
// Composite computations as a sequence of hardware configurations over one
// persistent mutable state. A small text format declares regions, the
// operations between them and the order of stages:
//
//   grid 32 32                 # or: grid 32 32 normalized
//   node A 4 4 8 8             # tag row col rows cols
//   node B 20 20 8 8
//   edge r = A -> B : rotate   # optional name; matmul takes two sources: A,X -> C
//   stage { r ; steps 24 }     # edge refs by name or 1-based index; optional `clear`

#pragma once

#include <unca/training.hpp>

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace unca
{

/// Diagnostic with a 1-based source position.
struct ParseError : std::invalid_argument
{
	ParseError(const std::string &message, int line, int column);
	int line;
	int column;
};

/// Graph that is well-formed but cannot be turned into a plan.
struct PlanError : std::invalid_argument
{
	using std::invalid_argument::invalid_argument;
};

struct GraphNode
{
	std::string tag;
	double row = 0, col = 0, rows = 0, cols = 0; // absolute cells or fractions of the grid
	int line = 0;
};

struct GraphEdge
{
	std::string name; // empty when unnamed
	std::vector<std::string> sources;
	std::string destination;
	TaskKind kind = TaskKind::Identity;
	int line = 0;
};

struct GraphStage
{
	std::vector<int> edges; // 0-based edge indices
	int steps = 0;
	bool clear = false;
	int line = 0;
};

struct TaskGraph
{
	int height = 0;
	int width = 0;
	bool normalized = false;
	std::vector<GraphNode> nodes;
	std::vector<GraphEdge> edges;
	std::vector<GraphStage> stages;

	const GraphNode *find(const std::string &tag) const;
	/// Absolute region of `tag`; normalized coordinates are rounded to cells.
	Placement region(const std::string &tag, Role role = Role::Input) const;
};

TaskGraph parse_task_graph(const std::string &text);

struct PlanStage
{
	TaskKind kind = TaskKind::Identity;
	std::vector<GraphEdge> edges;
	std::vector<Placement> placements; // sources as inputs, destinations as outputs
	Tensor hardware;                   // [H,W,C_hw]
	int steps = 0;
	bool clear = false;
};

struct ExecutionPlan
{
	int height = 0;
	int width = 0;
	std::map<std::string, Placement> regions;
	std::vector<std::string> initial_tags; // read before any stage writes them
	std::vector<PlanStage> stages;
};

ExecutionPlan compile_plan(const TaskGraph &graph, const ModularComponents &components);

struct StageRecord
{
	int index = 0;
	TaskKind kind = TaskKind::Identity;
	int steps = 0;
	std::map<std::string, Tensor> outputs;  // decoded destination regions
	std::map<std::string, Tensor> expected; // oracle values of the same regions
	float output_mse = 0.0f;
	Tensor entry_state; // mutable field when the stage starts
	Tensor exit_state;  // mutable field when the stage ends
};

struct PlanResult
{
	GridState final_state;
	std::vector<StageRecord> stages;
};

/// Runs every stage in order on one grid. The Oracle backend writes
/// symbolic results region to region; the NCA backend rolls out the model
/// under each stage's hardware and is compared against the oracle trace.
PlanResult execute_plan(const ExecutionPlan &plan, const std::map<std::string, Tensor> &inputs, BackendKind backend,
		const Model *model = nullptr);

/// `stage_idx<TAB>kind<TAB>steps<TAB>output_mse`, one line per stage.
void write_trace(std::ostream &os, const PlanResult &result);

}
