#include "qdren/vocab.hpp"

#include <algorithm>
#include <map>

#include "qdren/errors.hpp"

namespace qdren {

Vocabulary::Vocabulary() {
    add(std::string(kPadToken));
    add(std::string(kUnkToken));
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
    if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
        throw ArgumentError("vocabulary must start with the PAD and UNK tokens");
    }
    for (auto& t : tokens) {
        if (find(t)) throw ArgumentError("duplicate vocabulary token '" + t + "'");
        add(t);
    }
}

TokenId Vocabulary::add(const std::string& token, std::size_t count) {
    if (auto existing = find(token)) {
        counts_[*existing] += count;
        return *existing;
    }
    tokens_.push_back(token);
    counts_.push_back(count);
    index_.emplace(token, tokens_.size() - 1);
    return tokens_.size() - 1;
}

TokenId Vocabulary::id(std::string_view token) const { return find(token).value_or(kUnkId); }

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool Vocabulary::is_entity(TokenId id) const {
    return id < tokens_.size() && tokens_[id].rfind(kEntityPrefix, 0) == 0;
}

Vocabulary build_vocab(std::span<const std::span<const RawStory>> datasets, std::size_t max_size) {
    if (max_size < 3) throw ArgumentError("vocabulary size must be at least 3");
    std::map<std::string, std::size_t> counts;
    auto count_all = [&](const std::vector<std::string>& tokens) {
        for (const auto& t : tokens) ++counts[t];
    };
    for (const auto& data : datasets) {
        for (const auto& story : data) {
            for (const auto& s : story.sentences) count_all(s);
            count_all(story.question);
            ++counts[story.answer];
            count_all(story.candidates);
        }
    }
    counts.erase(std::string(kPadToken));
    counts.erase(std::string(kUnkToken));
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    // counts is already in lexicographic order, so a stable sort by frequency
    // leaves ties lexicographic.
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocabulary vocab;
    for (const auto& [token, count] : ranked) {
        if (vocab.size() >= max_size) break;
        vocab.add(token, count);
    }
    return vocab;
}

Vocabulary build_vocab(std::span<const RawStory> dataset, std::size_t max_size) {
    const std::span<const RawStory> one[] = {dataset};
    return build_vocab(std::span<const std::span<const RawStory>>(one), max_size);
}

Story encode_story(const RawStory& raw, const Vocabulary& vocab) {
    Story story;
    auto ids = [&](const std::vector<std::string>& tokens) {
        std::vector<TokenId> out;
        out.reserve(tokens.size());
        for (const auto& t : tokens) out.push_back(vocab.id(t));
        return out;
    };
    for (const auto& s : raw.sentences) story.sentences.push_back(ids(s));
    story.question = ids(raw.question);
    story.answer = vocab.id(raw.answer);
    story.candidates = ids(raw.candidates);
    for (std::size_t s : raw.supporting) {
        if (s >= raw.sentences.size()) throw FormatError("supporting index out of range");
        story.supporting.push_back(s);
    }
    if (!raw.candidates.empty() &&
        std::find(raw.candidates.begin(), raw.candidates.end(), raw.answer) == raw.candidates.end()) {
        throw FormatError("answer '" + raw.answer + "' is not among the candidates");
    }
    return story;
}

}  // namespace qdren
