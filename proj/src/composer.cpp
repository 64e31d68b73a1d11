// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include <unca/composer.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>
#include <set>

namespace unca
{

ParseError::ParseError(const std::string &message, int line_, int column_)
	: std::invalid_argument(message + " at line " + std::to_string(line_) + ", column " + std::to_string(column_)), line(line_), column(column_)
{
}

namespace
{
	struct Token
	{
		enum Kind
		{
			Ident,
			Number,
			Symbol,
			End
		} kind = End;
		std::string text;
		int line = 1;
		int column = 1;
	};

	std::vector<Token> tokenize(const std::string &text)
	{
		std::vector<Token> out;
		int line = 1, col = 1;
		std::size_t i = 0;
		auto advance = [&](std::size_t n) {
			for (std::size_t k = 0; k < n; k++, i++)
			{
				if (text[i] == '\n')
					line++, col = 1;
				else
					col++;
			}
		};
		while (i < text.size())
		{
			const char c = text[i];
			if (std::isspace(static_cast<unsigned char>(c)))
			{
				advance(1);
				continue;
			}
			if (c == '#')
			{
				while (i < text.size() && text[i] != '\n')
					advance(1);
				continue;
			}
			Token t;
			t.line = line;
			t.column = col;
			std::size_t n = 1;
			if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
			{
				while (i + n < text.size() && (std::isalnum(static_cast<unsigned char>(text[i + n])) || text[i + n] == '_'))
					n++;
				t.kind = Token::Ident;
			}
			else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || (c == '-' && i + 1 < text.size() && text[i + 1] != '>'))
			{
				while (i + n < text.size() && (std::isdigit(static_cast<unsigned char>(text[i + n])) || text[i + n] == '.'))
					n++;
				t.kind = Token::Number;
			}
			else if (c == '-' && i + 1 < text.size() && text[i + 1] == '>')
			{
				n = 2;
				t.kind = Token::Symbol;
			}
			else if (std::string_view("{};,:=").find(c) != std::string_view::npos)
				t.kind = Token::Symbol;
			else
				throw ParseError(std::string("unexpected character '") + c + "'", line, col);
			t.text = text.substr(i, n);
			advance(n);
			out.push_back(std::move(t));
		}
		Token end;
		end.line = line;
		end.column = col;
		out.push_back(end);
		return out;
	}

	class Parser
	{
	public:
		explicit Parser(const std::string &text) : tokens_(tokenize(text)) {}

		TaskGraph parse()
		{
			while (peek().kind != Token::End)
			{
				const Token &t = next();
				if (t.kind != Token::Ident)
					throw error(t, "expected a statement (grid, node, edge or stage), found '" + t.text + "'");
				if (t.text == "grid")
					parse_grid(t);
				else if (t.text == "node")
					parse_node(t);
				else if (t.text == "edge")
					parse_edge(t);
				else if (t.text == "stage")
					parse_stage(t);
				else
					throw error(t, "unknown statement '" + t.text + "'");
			}
			if (!has_grid_)
				throw error(peek(), "missing grid declaration");
			return std::move(graph_);
		}

	private:
		static ParseError error(const Token &t, const std::string &msg) { return ParseError(msg, t.line, t.column); }

		const Token &peek(std::size_t ahead = 0) const { return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)]; }
		const Token &next()
		{
			const Token &t = peek();
			if (pos_ < tokens_.size() - 1)
				pos_++;
			return t;
		}

		const Token &expect_symbol(const std::string &sym)
		{
			const Token &t = next();
			if (t.kind != Token::Symbol || t.text != sym)
				throw error(t, "expected '" + sym + "', found " + describe(t));
			return t;
		}

		const Token &expect_ident(const std::string &what)
		{
			const Token &t = next();
			if (t.kind != Token::Ident)
				throw error(t, "expected " + what + ", found " + describe(t));
			return t;
		}

		double expect_number(const std::string &what, bool integer)
		{
			const Token &t = next();
			if (t.kind != Token::Number)
				throw error(t, "expected " + what + ", found " + describe(t));
			std::size_t used = 0;
			double v = 0;
			try
			{
				v = std::stod(t.text, &used);
			} catch (const std::exception &)
			{
				used = 0;
			}
			if (used != t.text.size() || (integer && v != std::floor(v)))
				throw error(t, "invalid " + what + " '" + t.text + "'");
			return v;
		}

		static std::string describe(const Token &t) { return t.kind == Token::End ? "end of input" : "'" + t.text + "'"; }

		void parse_grid(const Token &kw)
		{
			if (has_grid_)
				throw error(kw, "grid declared twice");
			const double h = expect_number("grid height", true), w = expect_number("grid width", true);
			if (h < 1 || w < 1)
				throw error(kw, "grid dimensions must be positive");
			graph_.height = static_cast<int>(h);
			graph_.width = static_cast<int>(w);
			if (peek().kind == Token::Ident && peek().text == "normalized")
			{
				next();
				graph_.normalized = true;
			}
			has_grid_ = true;
		}

		void parse_node(const Token &kw)
		{
			if (!has_grid_)
				throw error(kw, "node declared before grid");
			const Token &tag = expect_ident("node tag");
			if (graph_.find(tag.text) != nullptr)
				throw error(tag, "duplicate node " + tag.text);
			const bool integer = !graph_.normalized;
			GraphNode n;
			n.tag = tag.text;
			n.line = kw.line;
			n.row = expect_number("row", integer);
			n.col = expect_number("column", integer);
			n.rows = expect_number("row count", integer);
			n.cols = expect_number("column count", integer);
			if (graph_.normalized && (n.row < 0 || n.col < 0 || n.rows <= 0 || n.cols <= 0 || n.row > 1 || n.col > 1 || n.rows > 1 || n.cols > 1))
				throw error(tag, "normalized coordinates of " + tag.text + " must lie in [0,1]");
			graph_.nodes.push_back(n);
			const Placement p = graph_.region(tag.text);
			if (p.rows < 1 || p.cols < 1 || !p.in_bounds(graph_.height, graph_.width))
				throw error(tag, "region " + tag.text + " out of bounds");
		}

		std::string declared_tag()
		{
			const Token &t = expect_ident("node tag");
			if (graph_.find(t.text) == nullptr)
				throw error(t, "undeclared tag " + t.text);
			return t.text;
		}

		void parse_edge(const Token &kw)
		{
			GraphEdge e;
			e.line = kw.line;
			if (peek().kind == Token::Ident && peek(1).kind == Token::Symbol && peek(1).text == "=")
			{
				const Token &name = next();
				next();
				for (const auto &other : graph_.edges)
					if (other.name == name.text)
						throw error(name, "duplicate edge name " + name.text);
				e.name = name.text;
			}
			e.sources.push_back(declared_tag());
			while (peek().kind == Token::Symbol && peek().text == ",")
			{
				next();
				e.sources.push_back(declared_tag());
			}
			expect_symbol("->");
			e.destination = declared_tag();
			expect_symbol(":");
			const Token &op = expect_ident("operation");
			try
			{
				e.kind = parse_task_kind(op.text);
			} catch (const std::exception &)
			{
				throw error(op, "unknown operation '" + op.text + "'");
			}
			if (static_cast<int>(e.sources.size()) != arity(e.kind))
				throw error(op, to_string(e.kind) + " takes " + std::to_string(arity(e.kind)) + " source(s), got " + std::to_string(e.sources.size()));
			graph_.edges.push_back(std::move(e));
		}

		int edge_ref(const Token &t)
		{
			if (t.kind == Token::Number)
			{
				const double v = std::stod(t.text);
				if (v != std::floor(v) || v < 1 || v > static_cast<double>(graph_.edges.size()))
					throw error(t, "no edge number " + t.text);
				return static_cast<int>(v) - 1;
			}
			for (std::size_t i = 0; i < graph_.edges.size(); i++)
				if (graph_.edges[i].name == t.text)
					return static_cast<int>(i);
			throw error(t, "unknown edge " + t.text);
		}

		void parse_stage(const Token &kw)
		{
			GraphStage s;
			s.line = kw.line;
			expect_symbol("{");
			while (!(peek().kind == Token::Symbol && (peek().text == ";" || peek().text == "}")))
			{
				const Token &t = next();
				if (t.kind != Token::Ident && t.kind != Token::Number)
					throw error(t, "expected an edge reference, found " + describe(t));
				const int idx = edge_ref(t);
				if (std::find(s.edges.begin(), s.edges.end(), idx) != s.edges.end())
					throw error(t, "edge " + t.text + " listed twice in one stage");
				s.edges.push_back(idx);
				if (peek().kind == Token::Symbol && peek().text == ",")
					next();
			}
			if (s.edges.empty())
				throw error(peek(), "stage lists no edges");
			bool has_steps = false;
			while (peek().kind == Token::Symbol && peek().text == ";")
			{
				next();
				if (peek().kind == Token::Symbol && peek().text == "}")
					break;
				const Token &opt = expect_ident("stage option (steps or clear)");
				if (opt.text == "steps")
				{
					const double v = expect_number("step count", true);
					if (v < 1)
						throw error(opt, "steps must be at least 1");
					s.steps = static_cast<int>(v);
					has_steps = true;
				}
				else if (opt.text == "clear")
					s.clear = true;
				else
					throw error(opt, "unknown stage option '" + opt.text + "'");
			}
			const Token &close = expect_symbol("}");
			if (!has_steps)
				throw error(close, "stage without steps");
			graph_.stages.push_back(std::move(s));
		}

		std::vector<Token> tokens_;
		std::size_t pos_ = 0;
		TaskGraph graph_;
		bool has_grid_ = false;
	};

	std::string stage_name(std::size_t s)
	{
		return "stage " + std::to_string(s + 1);
	}

	// Writes the oracle result of every edge of a stage, all computed from the
	// values present when the stage starts.
	void apply_oracle(Tensor &field, const PlanStage &stage, const std::map<std::string, Placement> &regions)
	{
		std::vector<std::pair<const Placement *, Tensor>> writes;
		for (const auto &e : stage.edges)
		{
			std::vector<Tensor> in;
			for (const auto &src : e.sources)
				in.push_back(decode_region(field, regions.at(src)));
			writes.emplace_back(&regions.at(e.destination), symbolic_target(e.kind, in));
		}
		for (auto &[p, m] : writes)
		{
			if (m.dim(0) != p->rows || m.dim(1) != p->cols)
				throw PlanError("stage output " + shape_str(m.shape()) + " does not fit region " + p->tag);
			encode_region_inplace(field, m, *p);
		}
	}
}

const GraphNode *TaskGraph::find(const std::string &tag) const
{
	for (const auto &n : nodes)
		if (n.tag == tag)
			return &n;
	return nullptr;
}

Placement TaskGraph::region(const std::string &tag, Role role) const
{
	const GraphNode *n = find(tag);
	if (n == nullptr)
		throw PlanError("undeclared tag " + tag);
	Placement p;
	p.role = role;
	p.tag = tag;
	if (normalized)
	{
		p.row = static_cast<int>(std::lround(n->row * height));
		p.col = static_cast<int>(std::lround(n->col * width));
		p.rows = std::max(1, static_cast<int>(std::lround(n->rows * height)));
		p.cols = std::max(1, static_cast<int>(std::lround(n->cols * width)));
	}
	else
	{
		p.row = static_cast<int>(n->row);
		p.col = static_cast<int>(n->col);
		p.rows = static_cast<int>(n->rows);
		p.cols = static_cast<int>(n->cols);
	}
	return p;
}

TaskGraph parse_task_graph(const std::string &text)
{
	return Parser(text).parse();
}

ExecutionPlan compile_plan(const TaskGraph &graph, const ModularComponents &components)
{
	if (graph.stages.empty())
		throw PlanError("graph has no stages");
	ExecutionPlan plan;
	plan.height = graph.height;
	plan.width = graph.width;
	for (const auto &n : graph.nodes)
	{
		const Placement p = graph.region(n.tag);
		check_in_bounds(p, graph.height, graph.width);
		plan.regions[n.tag] = p;
	}

	std::set<std::string> written;
	for (std::size_t s = 0; s < graph.stages.size(); s++)
	{
		const GraphStage &gs = graph.stages[s];
		PlanStage st;
		st.steps = gs.steps;
		st.clear = gs.clear;
		st.kind = graph.edges.at(gs.edges.front()).kind;
		std::vector<std::string> inputs, outputs;
		for (int idx : gs.edges)
		{
			const GraphEdge &e = graph.edges.at(idx);
			if (e.kind != st.kind)
				throw PlanError(stage_name(s) + " mixes " + to_string(st.kind) + " and " + to_string(e.kind) + "; one kind per stage");
			for (const auto &src : e.sources)
				if (std::find(inputs.begin(), inputs.end(), src) == inputs.end())
					inputs.push_back(src);
			if (std::find(outputs.begin(), outputs.end(), e.destination) != outputs.end())
				throw PlanError(stage_name(s) + " writes " + e.destination + " twice");
			outputs.push_back(e.destination);

			std::vector<std::pair<int, int>> shapes;
			for (const auto &src : e.sources)
				shapes.emplace_back(plan.regions[src].rows, plan.regions[src].cols);
			std::pair<int, int> out;
			try
			{
				out = output_shape(e.kind, shapes);
			} catch (const std::exception &ex)
			{
				throw PlanError(stage_name(s) + ": " + ex.what());
			}
			const Placement &dst = plan.regions[e.destination];
			if (out.first != dst.rows || out.second != dst.cols)
				throw PlanError(stage_name(s) + ": " + to_string(e.kind) + " yields " + std::to_string(out.first) + "x" + std::to_string(out.second)
						+ " but region " + e.destination + " is " + std::to_string(dst.rows) + "x" + std::to_string(dst.cols));
			st.edges.push_back(e);
		}
		for (const auto &t : inputs)
			if (std::find(outputs.begin(), outputs.end(), t) != outputs.end())
				throw PlanError("role conflict in " + stage_name(s) + ": " + t + " is both input and output");
		for (const auto &t : inputs)
		{
			if (!written.count(t) && std::find(plan.initial_tags.begin(), plan.initial_tags.end(), t) == plan.initial_tags.end())
				plan.initial_tags.push_back(t);
			Placement p = plan.regions[t];
			p.role = Role::Input;
			st.placements.push_back(p);
		}
		for (const auto &t : outputs)
		{
			Placement p = plan.regions[t];
			p.role = Role::Output;
			for (const auto &q : st.placements)
				if (q.role == Role::Input && q.overlaps(p))
					throw PlanError(stage_name(s) + ": output " + t + " overlaps input " + q.tag);
			st.placements.push_back(p);
			written.insert(t);
		}
		try
		{
			st.hardware = assemble_modular(components, st.kind, st.placements, graph.height, graph.width);
		} catch (const ValueError &ex)
		{
			throw PlanError(stage_name(s) + ": " + ex.what());
		}
		plan.stages.push_back(std::move(st));
	}
	return plan;
}

PlanResult execute_plan(const ExecutionPlan &plan, const std::map<std::string, Tensor> &inputs, BackendKind backend, const Model *model)
{
	if (backend == BackendKind::Nca && model == nullptr)
		throw PlanError("execute_plan: the NCA backend needs a trained checkpoint");
	for (const auto &[tag, m] : inputs)
		if (std::find(plan.initial_tags.begin(), plan.initial_tags.end(), tag) == plan.initial_tags.end())
			throw PlanError("execute_plan: " + tag + " is not an initial input of the plan");
	const int channels = model != nullptr ? model->rule.config.mutable_channels : 1;
	if (backend == BackendKind::Nca && !plan.stages.empty() && plan.stages.front().hardware.dim(2) != model->rule.config.hardware_channels)
		throw PlanError("execute_plan: plan hardware width does not match the model");

	Tensor oracle = Tensor::zeros( { plan.height, plan.width, channels });
	for (const auto &tag : plan.initial_tags)
	{
		const auto it = inputs.find(tag);
		if (it == inputs.end())
			throw PlanError("execute_plan: missing initial matrix for " + tag);
		const Placement &p = plan.regions.at(tag);
		if (it->second.rank() != 2 || it->second.dim(0) != p.rows || it->second.dim(1) != p.cols)
			throw PlanError("execute_plan: matrix for " + tag + " is " + shape_str(it->second.shape()) + ", region is " + std::to_string(p.rows) + "x"
					+ std::to_string(p.cols));
		encode_region_inplace(oracle, it->second, p);
	}

	PlanResult result;
	Tensor state = oracle.clone();
	NoGradGuard guard;
	for (std::size_t s = 0; s < plan.stages.size(); s++)
	{
		const PlanStage &st = plan.stages[s];
		StageRecord rec;
		rec.index = static_cast<int>(s);
		rec.kind = st.kind;
		rec.steps = st.steps;
		apply_oracle(oracle, st, plan.regions);

		if (st.clear)
		{
			auto d = state.data();
			for (std::size_t i = 0; i < d.size(); i++)
				if (static_cast<int>(i % channels) != kValueChannel)
					d[i] = 0.0f;
		}
		rec.entry_state = state.clone();
		if (backend == BackendKind::Oracle)
			apply_oracle(state, st, plan.regions);
		else
		{
			Rng rng = derive_rng(0, s);
			GridState grid { state, st.hardware };
			state = run_steps(grid, model->rule, st.steps, &rng).mutable_state.clone();
		}
		rec.exit_state = state.clone();

		double se = 0.0;
		std::size_t count = 0;
		for (const auto &e : st.edges)
		{
			const Placement &p = plan.regions.at(e.destination);
			Tensor got = decode_region(state, p), want = decode_region(oracle, p);
			const auto g = got.data(), w = want.data();
			for (std::size_t i = 0; i < g.size(); i++)
				se += double(g[i] - w[i]) * double(g[i] - w[i]);
			count += g.size();
			rec.outputs[e.destination] = got;
			rec.expected[e.destination] = want;
		}
		rec.output_mse = count ? static_cast<float>(se / static_cast<double>(count)) : 0.0f;
		result.stages.push_back(std::move(rec));
	}
	result.final_state = GridState { state, plan.stages.empty() ? Tensor::zeros( { plan.height, plan.width, 1 }) : plan.stages.back().hardware };
	return result;
}

void write_trace(std::ostream &os, const PlanResult &result)
{
	for (const auto &s : result.stages)
		os << s.index << '\t' << to_string(s.kind) << '\t' << s.steps << '\t' << s.output_mse << '\n';
}

}
