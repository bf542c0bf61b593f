#include "allspark/prompts.hpp"

#include <algorithm>
#include <fstream>

namespace allspark {

PromptRegistry PromptRegistry::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open prompt registry " + path);
  PromptRegistry reg;
  std::vector<std::vector<std::pair<std::size_t, std::string>>> raw(kModalityCount);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw IoError(path + ":" + std::to_string(lineno) + ": expected modality<TAB>index<TAB>text");
    }
    const Modality m = modality_from_name(line.substr(0, t1));
    const std::size_t index = std::stoul(line.substr(t1 + 1, t2 - t1 - 1));
    if (index == 0) throw IoError(path + ":" + std::to_string(lineno) + ": indices are 1-based");
    raw[static_cast<std::size_t>(m)].emplace_back(index, line.substr(t2 + 1));
  }
  for (Modality m : all_modalities()) {
    auto& entries = raw[static_cast<std::size_t>(m)];
    std::sort(entries.begin(), entries.end());
    auto& out = reg.by_modality_[static_cast<std::size_t>(m)];
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].first != i + 1) {
        throw IoError(path + ": prompt indices for " + modality_name(m) + " must be contiguous from 1");
      }
      out.push_back(entries[i].second);
    }
    if (m == Modality::Code) {
      if (!out.empty()) throw IoError(path + ": the code modality must not carry prompts");
    } else if (out.empty()) {
      throw IoError(path + ": modality " + modality_name(m) + " has no prompt");
    }
  }
  return reg;
}

const std::vector<std::string>& PromptRegistry::prompts(Modality m) const {
  return by_modality_[static_cast<std::size_t>(m)];
}

std::string select_prompt(const PromptRegistry& registry, Modality m, PromptMode mode, Rng& rng) {
  const auto& list = registry.prompts(m);
  if (m == Modality::Code) return "";
  if (list.empty()) throw ContractError(std::string("no prompts registered for ") + modality_name(m));
  if (mode == PromptMode::Eval) return list[0];
  return list[rng.below(list.size())];
}

}  // namespace allspark
