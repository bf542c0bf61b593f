#include "allspark/tokenizer.hpp"

#include "allspark/common.hpp"

namespace allspark {
namespace tok {

std::vector<std::size_t> tokenize(std::string_view bytes) {
  std::vector<std::size_t> ids;
  ids.reserve(bytes.size());
  for (unsigned char c : bytes) ids.push_back(static_cast<std::size_t>(c));
  return ids;
}

std::string detokenize(const std::vector<std::size_t>& ids) {
  std::string out;
  out.reserve(ids.size());
  for (std::size_t id : ids) {
    if (id >= kVocab) throw ContractError("detokenize: id " + std::to_string(id) + " outside vocabulary");
    if (id < 256) out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
  }
  return out;
}

}  // namespace tok
}  // namespace allspark
