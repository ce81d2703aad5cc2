#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qdren/babi.hpp"
#include "qdren/encoding.hpp"

namespace qdren {

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kPlaceholderToken = "@placeholder";
inline constexpr std::string_view kEntityPrefix = "@entity";

/// Dense token <-> id map. Id 0 is PAD and id 1 is UNK.
class Vocabulary {
public:
    Vocabulary();

    /// Rebuilds a vocabulary from its id-ordered token list.
    explicit Vocabulary(std::vector<std::string> tokens);

    TokenId add(const std::string& token, std::size_t count = 0);

    /// Id of `token`, or UNK.
    TokenId id(std::string_view token) const;
    std::optional<TokenId> find(std::string_view token) const;
    const std::string& token(TokenId id) const { return tokens_.at(id); }
    std::size_t frequency(TokenId id) const { return counts_.at(id); }

    bool is_entity(TokenId id) const;

    std::size_t size() const noexcept { return tokens_.size(); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::vector<std::size_t> counts_;
    std::unordered_map<std::string, TokenId> index_;
};

/// Keeps the max_size - 2 most frequent tokens of all stories (sentences,
/// questions, answers and candidates); ties go to the lexicographically
/// smaller token.
Vocabulary build_vocab(std::span<const std::span<const RawStory>> datasets, std::size_t max_size);
Vocabulary build_vocab(std::span<const RawStory> dataset, std::size_t max_size);

/// Model-ready story with token ids.
struct Story {
    std::vector<std::vector<TokenId>> sentences;
    std::vector<TokenId> question;
    TokenId answer = kUnkId;
    std::vector<std::size_t> supporting;
    std::vector<TokenId> candidates;
};

/// Maps tokens to ids and checks the story invariants (answer among
/// candidates, supporting indices in range).
Story encode_story(const RawStory& raw, const Vocabulary& vocab);

}  // namespace qdren
