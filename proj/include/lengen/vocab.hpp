#pragma once

#include <string>
#include <vector>

namespace lengen::data {

/// Dense token ids. Digits map to themselves; special symbols follow,
/// then the TEXT_1..TEXT_k filler alphabet used for text interleaving.
namespace tok {
inline constexpr int kPlus = 10;
inline constexpr int kTimes = 11;
inline constexpr int kPad = 12;
inline constexpr int kIgnore = 13;
inline constexpr int kFirstText = 14;
inline constexpr int kTextTokens = 26;
inline constexpr int kVocabSize = kFirstText + kTextTokens;

constexpr bool is_digit(int id) { return id >= 0 && id <= 9; }
constexpr bool is_text(int id) { return id >= kFirstText && id < kVocabSize; }
}  // namespace tok

/// Printable name for a token id ("7", "+", "x", "pad", "_", "t3").
std::string token_name(int id);

/// Token table in id order.
std::vector<std::string> vocab_table();

}  // namespace lengen::data
