#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace allspark {
namespace tok {

// Byte-level tokenizer: 256 byte ids plus four specials. Total by
// construction, and detokenize(tokenize(s)) == s for every byte string.

constexpr std::size_t kPad = 256;
constexpr std::size_t kBos = 257;
constexpr std::size_t kEos = 258;
constexpr std::size_t kSep = 259;
constexpr std::size_t kVocab = 260;

std::vector<std::size_t> tokenize(std::string_view bytes);

/// Maps byte ids back to bytes; special ids are dropped.
std::string detokenize(const std::vector<std::size_t>& ids);

}  // namespace tok
}  // namespace allspark
