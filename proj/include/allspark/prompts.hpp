#pragma once

#include "allspark/encoders.hpp"

namespace allspark {

enum class PromptMode { Train, Eval };

/// Per-modality text prompts, loaded from a tab-separated resource file
/// (`modality<TAB>index<TAB>text`, indices 1..k per modality). The code
/// modality carries no prompts by design; every other modality must have at
/// least one. Order is index order and is stable across loads.
class PromptRegistry {
public:
  static PromptRegistry load(const std::string& path);

  const std::vector<std::string>& prompts(Modality m) const;
  std::size_t count(Modality m) const { return prompts(m).size(); }

private:
  std::vector<std::vector<std::string>> by_modality_{kModalityCount};
};

/// Train mode draws uniformly from the modality's prompts with the supplied
/// rng; Eval mode always returns the first prompt. Code returns "".
std::string select_prompt(const PromptRegistry& registry, Modality m, PromptMode mode, Rng& rng);

}  // namespace allspark
