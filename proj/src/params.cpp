#include "allspark/params.hpp"

#include <algorithm>
#include <filesystem>

#include <json.hpp>

#include "allspark/stt1.hpp"

namespace allspark {

using nlohmann::json;

TensorPtr ParamStore::create(const std::string& name, std::vector<std::size_t> dims, Dtype dt, bool frozen) {
  if (entries_.count(name)) throw ContractError("parameter already exists: " + name);
  auto t = Tensor::make(std::move(dims), dt, !frozen);
  entries_[name] = Entry{t, frozen};
  return t;
}

TensorPtr ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter: " + name);
  return it->second.tensor;
}

bool ParamStore::contains(const std::string& name) const { return entries_.count(name) != 0; }

bool ParamStore::frozen(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter: " + name);
  return it->second.frozen;
}

bool ParamStore::has_prefix(const std::string& prefix) const {
  auto it = entries_.lower_bound(prefix);
  return it != entries_.end() && it->first.compare(0, prefix.size(), prefix) == 0;
}

void ParamStore::set_frozen_prefix(const std::string& prefix, bool frozen) {
  bool any = false;
  for (auto& [name, e] : entries_) {
    if (name.compare(0, prefix.size(), prefix) == 0) {
      e.frozen = frozen;
      e.tensor->requires_grad = !frozen;
      if (!frozen) e.tensor->ensure_grad();
      any = true;
    }
  }
  if (!any) throw ContractError("no parameters under prefix: " + prefix);
}

std::vector<std::pair<std::string, TensorPtr>> ParamStore::trainable() const {
  std::vector<std::pair<std::string, TensorPtr>> out;
  for (const auto& [name, e] : entries_) {
    if (!e.frozen) out.emplace_back(name, e.tensor);
  }
  return out;
}

std::vector<std::pair<std::string, TensorPtr>> ParamStore::with_prefix(const std::string& prefix) const {
  std::vector<std::pair<std::string, TensorPtr>> out;
  for (const auto& [name, e] : entries_) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.emplace_back(name, e.tensor);
  }
  return out;
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) {
    if (!e.frozen) e.tensor->zero_grad();
  }
}

std::size_t ParamStore::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) {
    if (!trainable_only || !e.frozen) n += e.tensor->numel();
  }
  return n;
}

void ParamStore::save(const std::string& dir, const std::string& extra_json) const {
  std::filesystem::create_directories(dir);
  json manifest;
  json tensors = json::object();
  for (const auto& [name, e] : entries_) {
    const std::string file = name + ".stt1";
    stt1_write(dir + "/" + file, *e.tensor);
    tensors[name] = {{"file", file}, {"dims", e.tensor->dims}, {"frozen", e.frozen}};
  }
  manifest["tensors"] = tensors;
  manifest["extra"] = json::parse(extra_json);
  write_file_atomic(dir + "/manifest.json", manifest.dump(2) + "\n");
}

ParamStore ParamStore::load(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir + "/manifest.json"));
  } catch (const json::exception& e) {
    throw IoError("bad checkpoint manifest in " + dir + ": " + e.what());
  }
  ParamStore store;
  for (auto& [name, meta] : manifest.at("tensors").items()) {
    auto t = stt1_read(dir + "/" + meta.at("file").get<std::string>());
    const bool frozen = meta.at("frozen").get<bool>();
    auto dims = meta.at("dims").get<std::vector<std::size_t>>();
    if (t->dims != dims) {
      throw IoError("checkpoint tensor " + name + " dims " + dims_str(t->dims) + " disagree with manifest " +
                    dims_str(dims));
    }
    t->requires_grad = !frozen;
    if (!frozen) t->ensure_grad();
    store.entries_[name] = Entry{t, frozen};
  }
  return store;
}

std::string ParamStore::load_manifest_extra(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir + "/manifest.json"));
  } catch (const json::exception& e) {
    throw IoError("bad checkpoint manifest in " + dir + ": " + e.what());
  }
  return manifest.at("extra").dump();
}

void init_normal(Tensor& t, Rng& rng, double stddev) {
  for (auto& v : t.data) v = rng.normal(0.0, stddev);
  t.quantize();
}

void init_xavier(Tensor& t, Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data) v = rng.uniform(-limit, limit);
  t.quantize();
}

void init_zeros(Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); }

void init_ones(Tensor& t) {
  std::fill(t.data.begin(), t.data.end(), 1.0);
  t.quantize();
}

}  // namespace allspark
