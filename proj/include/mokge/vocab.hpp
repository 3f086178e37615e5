#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mokge {

using TokenId = std::size_t;

/// Generator tokenization: lowercase, split on whitespace.
std::vector<std::string> tokenize_text(std::string_view text);

/// Token table: PAD, BOS, EOS, UNK, then one prefix token per expert, then
/// corpus tokens by descending frequency with lexicographic tie-break.
class Vocab {
  public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kBos = 1;
    static constexpr TokenId kEos = 2;
    static constexpr TokenId kUnk = 3;
    static constexpr TokenId kFirstExpert = 4;

    static Vocab build(std::span<const std::string> texts, std::size_t num_experts);
    /// One token per line in id order.
    static Vocab load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const { return tokens_.size(); }
    std::size_t num_experts() const { return num_experts_; }
    TokenId id(std::string_view token) const;
    const std::string& token(TokenId id) const { return tokens_.at(id); }
    TokenId expert_token(std::size_t expert) const;

    std::vector<TokenId> encode(std::string_view text) const;
    /// Joins tokens with single spaces, stopping at EOS and skipping specials.
    std::string decode(std::span<const TokenId> ids) const;

    std::uint64_t fingerprint() const;

  private:
    static Vocab from_tokens(std::vector<std::string> tokens);

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    std::size_t num_experts_ = 0;
};

}  // namespace mokge
