#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qdren/ops.hpp"

namespace qdren {

using TokenId = std::size_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;

/// Sum over the actual tokens of E(w_r) * mask_r (elementwise). Throws
/// EncodingError when the sequence has more tokens than the mask has rows.
template <typename T>
BasicVar<T> encode_tokens(const BasicVar<T>& embedding, const BasicVar<T>& mask, std::span<const TokenId> ids,
                          const char* what = "sentence") {
    const auto& mv = mask.value();
    if (ids.size() > mv.rows()) {
        throw EncodingError(std::string(what) + " has " + std::to_string(ids.size()) +
                            " tokens but the mask allows at most " + std::to_string(mv.rows()));
    }
    if (ids.empty()) return embedding.tape().constant(BasicTensor<T>(Shape{mv.cols()}));
    auto words = ops::gather_rows(embedding, ids);
    auto masks = ops::slice_rows(mask, 0, ids.size());
    return ops::sum_rows(ops::mul(words, masks));
}

template <typename T>
BasicVar<T> encode_sentence(const BasicVar<T>& embedding, const BasicVar<T>& sentence_mask,
                            std::span<const TokenId> ids) {
    return encode_tokens(embedding, sentence_mask, ids, "sentence");
}

template <typename T>
BasicVar<T> encode_question(const BasicVar<T>& embedding, const BasicVar<T>& question_mask,
                            std::span<const TokenId> ids) {
    return encode_tokens(embedding, question_mask, ids, "question");
}

/// Value-level convenience over the differentiable version.
Tensor encode_sentence(std::span<const TokenId> ids, const Tensor& embedding, const Tensor& mask);
Tensor encode_question(std::span<const TokenId> ids, const Tensor& embedding, const Tensor& mask);

/// Pads the text with b-1 `pad` tokens on each side and returns, for each
/// entity position (an index into the unpadded text), the b tokens centred on
/// it. b must be odd.
template <typename Tok>
std::vector<std::vector<Tok>> build_windows(std::span<const Tok> tokens, std::span<const std::size_t> entity_positions,
                                            std::size_t b, const Tok& pad) {
    if (b == 0 || b % 2 == 0) throw ArgumentError("window size must be odd and positive, got " + std::to_string(b));
    std::vector<Tok> padded;
    padded.reserve(tokens.size() + 2 * (b - 1));
    padded.insert(padded.end(), b - 1, pad);
    padded.insert(padded.end(), tokens.begin(), tokens.end());
    padded.insert(padded.end(), b - 1, pad);
    const std::size_t radius = (b - 1) / 2;
    std::vector<std::vector<Tok>> windows;
    windows.reserve(entity_positions.size());
    for (std::size_t pos : entity_positions) {
        if (pos >= tokens.size()) {
            throw ArgumentError("entity position " + std::to_string(pos) + " outside text of " +
                                std::to_string(tokens.size()) + " tokens");
        }
        const std::size_t centre = pos + (b - 1);
        windows.emplace_back(padded.begin() + static_cast<std::ptrdiff_t>(centre - radius),
                             padded.begin() + static_cast<std::ptrdiff_t>(centre + radius + 1));
    }
    return windows;
}

/// The single window around the one occurrence of `placeholder`.
template <typename Tok>
std::vector<Tok> build_question_window(std::span<const Tok> tokens, const Tok& placeholder, std::size_t b,
                                       const Tok& pad) {
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] == placeholder) hits.push_back(i);
    }
    if (hits.size() != 1) {
        throw FormatError("question must contain exactly one placeholder, found " + std::to_string(hits.size()));
    }
    return build_windows(tokens, std::span<const std::size_t>(hits), b, pad).front();
}

}  // namespace qdren
