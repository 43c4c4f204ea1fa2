#include <string>

#include "../io/binio.hpp"
#include "iadg/trainer.hpp"

namespace iadg {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'I', 'A', 'D', 'G', 'C', 'K', 'P', 'T'};

// Every tensor in the file, in payload order.
std::vector<std::pair<std::string, const Tensor*>> tensor_list(const Checkpoint& c) {
	std::vector<std::pair<std::string, const Tensor*>> out;
	for (std::size_t i = 0; i < c.params.size(); ++i) out.emplace_back("param/" + c.names[i], &c.params[i]);
	for (std::size_t i = 0; i < c.adam.m.size(); ++i) out.emplace_back("adam_m/" + c.names[i], &c.adam.m[i]);
	for (std::size_t i = 0; i < c.adam.v.size(); ++i) out.emplace_back("adam_v/" + c.names[i], &c.adam.v[i]);
	if (c.bank.populated()) {
		out.emplace_back("bank/real/mu", &c.bank.real.mu);
		out.emplace_back("bank/real/sigma", &c.bank.real.sigma);
		out.emplace_back("bank/spoof/mu", &c.bank.spoof.mu);
		out.emplace_back("bank/spoof/sigma", &c.bank.spoof.sigma);
	}
	return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
	if (c.names.size() != c.params.size() || c.adam.m.size() != c.params.size() || c.adam.v.size() != c.params.size())
		throw std::invalid_argument("save_checkpoint: parameter, name and moment counts differ");
	json tensors = json::array();
	std::uint64_t offset = 0;
	const auto list = tensor_list(c);
	for (const auto& [name, t] : list) {
		tensors.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}});
		offset += 8ull * t->size();
	}
	json history = json::array();
	for (const EpochLog& e : c.history) history.push_back(to_json(e));
	const json manifest = {{"config", to_json(c.config)},
	                       {"config_hash", c.config_hash},
	                       {"epoch", c.epoch},
	                       {"adam_t", c.adam.t},
	                       {"rng", {{"key", c.rng.key}, {"counter", c.rng.counter}}},
	                       {"bank_stamp", c.bank.epoch_stamp},
	                       {"history", history},
	                       {"payload_bytes", offset},
	                       {"tensors", tensors}};
	const std::string text = manifest.dump();

	io::Writer w;
	w.bytes(std::string(kMagic, 8));
	w.u16(kCheckpointVersion);
	w.u32(static_cast<std::uint32_t>(text.size()));
	w.bytes(text);
	for (const auto& [name, t] : list)
		for (double v : t->data()) w.f64(v);
	w.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
	io::Reader r(io::Reader::load(path));
	if (r.str(8, "magic") != std::string(kMagic, 8)) throw FormatError("not an IADG checkpoint (bad magic)", 0);
	const std::uint16_t version = r.u16("format version");
	if (version != kCheckpointVersion)
		throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
		                      std::to_string(kCheckpointVersion) + ")",
		                  8);
	const std::size_t len_at = r.pos();
	const std::uint32_t len = r.u32("manifest length");
	if (static_cast<std::uint64_t>(len) > r.size() - r.pos())
		throw FormatError("manifest length " + std::to_string(len) + " exceeds file size", len_at);
	const std::size_t json_at = r.pos();
	json m;
	try {
		m = json::parse(r.str(len, "manifest"));
	} catch (const json::exception& e) {
		throw FormatError(std::string("malformed checkpoint manifest: ") + e.what(), json_at);
	}
	const std::size_t data_at = r.pos();

	Checkpoint c;
	try {
		c.config = train_config_from_json(m.at("config"));
		c.config_hash = m.at("config_hash").get<std::uint64_t>();
		c.epoch = m.at("epoch").get<std::size_t>();
		c.adam.t = m.at("adam_t").get<std::uint64_t>();
		c.rng = {m.at("rng").at("key").get<std::uint64_t>(), m.at("rng").at("counter").get<std::uint64_t>()};
		c.bank.epoch_stamp = m.at("bank_stamp").get<long>();
		for (const json& e : m.at("history")) c.history.push_back(epoch_log_from_json(e));

		const std::uint64_t payload = m.at("payload_bytes").get<std::uint64_t>();
		if (r.size() - data_at != payload)
			throw FormatError("checkpoint payload is " + std::to_string(r.size() - data_at) + " bytes, manifest says " +
			                      std::to_string(payload),
			                  r.size() < data_at + payload ? r.size() : data_at + payload);

		std::uint64_t expect = 0;
		for (const json& t : m.at("tensors")) {
			const std::string name = t.at("name").get<std::string>();
			const Shape shape = t.at("shape").get<Shape>();
			if (t.at("offset").get<std::uint64_t>() != expect)
				throw FormatError("tensor " + name + " has an inconsistent offset", data_at);
			Tensor value(shape);
			r.seek(data_at + expect);
			for (double& v : value.data()) v = r.f64(name.c_str());
			expect += 8ull * value.size();

			const auto slash = name.find('/');
			const std::string kind = name.substr(0, slash), rest = name.substr(slash + 1);
			if (kind == "param") {
				c.names.push_back(rest);
				c.params.push_back(std::move(value));
			} else if (kind == "adam_m") {
				c.adam.m.push_back(std::move(value));
			} else if (kind == "adam_v") {
				c.adam.v.push_back(std::move(value));
			} else if (name == "bank/real/mu") {
				c.bank.real.mu = std::move(value);
			} else if (name == "bank/real/sigma") {
				c.bank.real.sigma = std::move(value);
			} else if (name == "bank/spoof/mu") {
				c.bank.spoof.mu = std::move(value);
			} else if (name == "bank/spoof/sigma") {
				c.bank.spoof.sigma = std::move(value);
			} else {
				throw FormatError("unknown tensor '" + name + "' in checkpoint", data_at);
			}
		}
		if (expect != payload) throw FormatError("tensor table does not cover the payload", data_at + expect);
	} catch (const json::exception& e) {
		throw FormatError(std::string("incomplete checkpoint manifest: ") + e.what(), json_at);
	} catch (const std::invalid_argument& e) {
		throw FormatError(std::string("bad checkpoint config: ") + e.what(), json_at);
	}
	if (c.adam.m.size() != c.params.size() || c.adam.v.size() != c.params.size())
		throw FormatError("optimizer moments do not match the parameter list", data_at);
	if (c.config.hash() != c.config_hash) throw FormatError("config hash does not match the stored config", json_at);
	return c;
}

}  // namespace iadg
