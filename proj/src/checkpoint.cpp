// Copyright 2026 The unca Authors
// SPDX-License-Identifier: Apache-2.0

#include <unca/checkpoint.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace unca
{

namespace
{

constexpr char kMagic[8] = { 'U', 'N', 'C', 'A', 'C', 'K', 'P', 'T' };

class Writer
{
public:
	void u32(std::uint32_t v) { le(v, 4); }
	void u64(std::uint64_t v) { le(v, 8); }
	void bytes(const void *p, std::size_t n)
	{
		const auto *b = static_cast<const std::uint8_t*>(p);
		out.insert(out.end(), b, b + n);
	}
	void str(const std::string &s)
	{
		u32(static_cast<std::uint32_t>(s.size()));
		bytes(s.data(), s.size());
	}

	std::vector<std::uint8_t> out;

private:
	void le(std::uint64_t v, int n)
	{
		for (int i = 0; i < n; ++i)
			out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
	}
};

class Reader
{
public:
	explicit Reader(std::span<const std::uint8_t> b) :
			buf(b)
	{
	}

	void need(std::uint64_t n, const std::string &what) const
	{
		if (n > buf.size() - pos)
			throw CheckpointError("corrupt checkpoint: " + what + " needs " + std::to_string(n) + " bytes, " + std::to_string(buf.size() - pos)
					+ " available");
	}
	std::uint64_t le(int n, const std::string &what)
	{
		need(static_cast<std::uint64_t>(n), what);
		std::uint64_t v = 0;
		for (int i = 0; i < n; ++i)
			v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
		pos += n;
		return v;
	}
	std::uint32_t u32(const std::string &what) { return static_cast<std::uint32_t>(le(4, what)); }
	std::uint64_t u64(const std::string &what) { return le(8, what); }
	std::string str(const std::string &what)
	{
		const std::uint32_t n = u32(what);
		need(n, what);
		std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
		pos += n;
		return s;
	}
	bool done() const { return pos == buf.size(); }

	std::span<const std::uint8_t> buf;
	std::size_t pos = 0;
};

NamedTensor named(const std::string &name, const Tensor &t)
{
	const auto d = t.data();
	return { name, t.shape(), std::vector<float>(d.begin(), d.end()) };
}

void copy_into(Tensor &dst, const NamedTensor &src)
{
	if (dst.shape() != src.shape)
		throw CheckpointError("checkpoint tensor '" + src.name + "' has shape " + shape_str(src.shape) + ", model expects " + shape_str(dst.shape()));
	std::copy(src.data.begin(), src.data.end(), dst.data().begin());
}

Tensor to_tensor(const NamedTensor &t)
{
	return Tensor::from(t.shape, t.data);
}

constexpr const char *kAdamM = "adam.m/";
constexpr const char *kAdamV = "adam.v/";
constexpr const char *kAdamT = "adam.t/";

}

const NamedTensor *Checkpoint::tensor(const std::string &name) const
{
	for (const auto &t : tensors)
		if (t.name == name)
			return &t;
	return nullptr;
}

const std::int64_t *Checkpoint::counter(const std::string &name) const
{
	for (const auto &[n, v] : counters)
		if (n == name)
			return &v;
	return nullptr;
}

std::vector<std::uint8_t> serialize(const Checkpoint &ckpt)
{
	Writer w;
	w.bytes(kMagic, sizeof kMagic);
	w.u32(ckpt.version);
	w.str(ckpt.config);
	w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
	for (const auto &t : ckpt.tensors)
	{
		std::size_t count = 1;
		for (int d : t.shape)
			count *= static_cast<std::size_t>(d);
		if (count != t.data.size())
			throw ValueError("checkpoint tensor '" + t.name + "': payload does not match shape " + shape_str(t.shape));
		w.str(t.name);
		w.u32(static_cast<std::uint32_t>(t.shape.size()));
		for (int d : t.shape)
			w.u32(static_cast<std::uint32_t>(d));
		w.u64(t.data.size() * 4);
		for (float v : t.data)
			w.u32(std::bit_cast<std::uint32_t>(v));
	}
	w.u32(static_cast<std::uint32_t>(ckpt.counters.size()));
	for (const auto &[name, v] : ckpt.counters)
	{
		w.str(name);
		w.u64(static_cast<std::uint64_t>(v));
	}
	return std::move(w.out);
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes)
{
	Reader r(bytes);
	r.need(sizeof kMagic, "magic");
	if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
		throw CheckpointError("not a checkpoint (bad magic)");
	r.pos = sizeof kMagic;
	Checkpoint c;
	c.version = r.u32("version");
	if (c.version != kCheckpointVersion)
		throw CheckpointError("unsupported checkpoint version " + std::to_string(c.version) + " (expected " + std::to_string(kCheckpointVersion) + ")");
	c.config = r.str("config");
	const std::uint32_t nt = r.u32("tensor count");
	for (std::uint32_t i = 0; i < nt; ++i)
	{
		NamedTensor t;
		t.name = r.str("tensor name");
		const std::uint32_t ndim = r.u32("rank of '" + t.name + "'");
		if (ndim > 8)
			throw CheckpointError("corrupt checkpoint: tensor '" + t.name + "' claims rank " + std::to_string(ndim));
		std::uint64_t count = 1;
		for (std::uint32_t d = 0; d < ndim; ++d)
		{
			const std::uint32_t dim = r.u32("dims of '" + t.name + "'");
			if (dim > (1u << 30))
				throw CheckpointError("corrupt checkpoint: tensor '" + t.name + "' has dimension " + std::to_string(dim));
			t.shape.push_back(static_cast<int>(dim));
			count *= dim;
		}
		const std::uint64_t payload = r.u64("payload size of '" + t.name + "'");
		if (payload != count * 4)
			throw CheckpointError("corrupt checkpoint: tensor '" + t.name + "' declares " + std::to_string(payload) + " payload bytes, shape "
					+ shape_str(t.shape) + " needs " + std::to_string(count * 4));
		r.need(payload, "payload of '" + t.name + "'");
		t.data.resize(count);
		for (auto &v : t.data)
			v = std::bit_cast<float>(r.u32("payload"));
		c.tensors.push_back(std::move(t));
	}
	const std::uint32_t nc = r.u32("counter count");
	for (std::uint32_t i = 0; i < nc; ++i)
	{
		std::string name = r.str("counter name");
		const auto v = static_cast<std::int64_t>(r.u64("counter '" + name + "'"));
		c.counters.emplace_back(std::move(name), v);
	}
	if (!r.done())
		throw CheckpointError("corrupt checkpoint: " + std::to_string(bytes.size() - r.pos) + " trailing bytes");
	return c;
}

void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path)
{
	const auto bytes = serialize(ckpt);
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out)
		throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
	out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
	if (!out)
		throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path &path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
	std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
	return deserialize(bytes);
}

Checkpoint make_checkpoint(const Model &model, const RunConfig &config)
{
	Checkpoint c;
	c.config = config.to_text();
	Model view = model; // shares storage
	const ParamRegistry reg = ParamRegistry::of(view);
	for (const auto &e : reg.entries())
		c.tensors.push_back(named(e.name, e.tensor));
	c.tensors.push_back(named("projection", model.projection));
	return c;
}

Checkpoint make_checkpoint(const Trainer &trainer, const RunConfig &config)
{
	Checkpoint c = make_checkpoint(trainer.model(), config);
	for (const auto &[name, st] : trainer.optimizer())
	{
		c.tensors.push_back(named(kAdamM + name, st.m));
		c.tensors.push_back(named(kAdamV + name, st.v));
	}
	c.counters.emplace_back("updates_done", trainer.updates_done());
	c.counters.emplace_back("scope", trainer.scope() == TrainScope::Full ? 0 : 1);
	for (const auto &[name, st] : trainer.optimizer())
		c.counters.emplace_back(kAdamT + name, st.t);
	return c;
}

Restored restore(const Checkpoint &ckpt)
{
	Restored r;
	r.config = RunConfig::parse(ckpt.config);
	r.model = Model::init(r.config.rule, r.config.train);
	Model &m = r.model;
	const int chw = r.config.rule.hardware_channels;

	// Monolithic fields the config does not create (other task ids) come
	// straight from the file.
	for (const auto &t : ckpt.tensors)
		if (t.name.starts_with("hw/mono/"))
		{
			const std::string id = t.name.substr(8);
			if (t.shape.size() != 3 || t.shape[2] != chw)
				throw CheckpointError("checkpoint tensor '" + t.name + "' is not an [H,W," + std::to_string(chw) + "] field");
			if (!m.monolithic.contains(id))
				m.monolithic[id] = MonolithicHardware { id, Tensor::zeros(t.shape) };
		}

	ParamRegistry reg = ParamRegistry::of(m);
	std::vector<std::string> seen;
	for (const auto &t : ckpt.tensors)
	{
		if (t.name.starts_with(kAdamM) || t.name.starts_with(kAdamV))
			continue;
		if (t.name == "projection")
		{
			copy_into(m.projection, t);
			seen.push_back(t.name);
			continue;
		}
		const ParamEntry *e = reg.find(t.name);
		if (e == nullptr)
			throw CheckpointError("checkpoint tensor '" + t.name + "' does not belong to the model");
		Tensor dst = e->tensor;
		copy_into(dst, t);
		seen.push_back(t.name);
	}
	for (const auto &e : reg.entries())
		if (std::find(seen.begin(), seen.end(), e.name) == seen.end())
			throw CheckpointError("checkpoint lacks parameter '" + e.name + "'");

	if (const auto *u = ckpt.counter("updates_done"))
		r.updates_done = *u;
	if (const auto *s = ckpt.counter("scope"))
		r.scope = *s == 0 ? TrainScope::Full : TrainScope::HardwareOnly;
	for (const auto &t : ckpt.tensors)
	{
		if (!t.name.starts_with(kAdamM))
			continue;
		const std::string param = t.name.substr(std::strlen(kAdamM));
		const NamedTensor *v = ckpt.tensor(kAdamV + param);
		const std::int64_t *step = ckpt.counter(kAdamT + param);
		if (v == nullptr || step == nullptr)
			throw CheckpointError("checkpoint has incomplete optimizer state for '" + param + "'");
		AdamState st;
		st.m = to_tensor(t);
		st.v = to_tensor(*v);
		st.t = *step;
		r.optimizer[param] = std::move(st);
	}
	return r;
}

Trainer resume(Restored restored, const TrainConfig &config)
{
	Trainer t(std::move(restored.model), config, restored.scope);
	// Params new to this config keep their fresh state.
	auto optimizer = t.optimizer();
	for (auto &[name, st] : restored.optimizer)
		optimizer[name] = std::move(st);
	t.restore(restored.updates_done, std::move(optimizer));
	return t;
}

Trainer resume(Restored restored)
{
	const TrainConfig config = restored.config.train;
	return resume(std::move(restored), config);
}

}
