#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qdren {

/// One question over the facts that precede it, as text tokens.
struct RawStory {
    std::vector<std::vector<std::string>> sentences;
    std::vector<std::string> question;
    std::string answer;
    std::vector<std::size_t> supporting;   // 0-based sentence indices
    std::vector<std::string> candidates;  // empty unless the task restricts answers

    friend bool operator==(const RawStory&, const RawStory&) = default;
};

struct RawSplits {
    std::vector<RawStory> train;
    std::vector<RawStory> valid;
    std::vector<RawStory> test;
};

/// Lower-cases and splits on whitespace; trailing punctuation becomes its own
/// token.
std::vector<std::string> tokenize(std::string_view text);

/// Parses the bAbI layout:
///   "N tokens."                      fact line
///   "N question?\tanswer\tsupport"   question line
///   "CANDIDATES\ttok tok ..."        candidate trailer of the preceding question
/// A leading number that does not increase starts a new story; '#' lines are
/// comments. Each question yields a story holding every fact seen so far.
/// Fact lines are split into sentences on the "." token.
std::vector<RawStory> parse_babi(std::istream& in);
std::vector<RawStory> parse_babi_file(const std::filesystem::path& path);

/// Writes stories in the same layout, one numbered block per story, preceded
/// by `header` lines as '#' comments.
void write_babi(std::ostream& out, std::span<const RawStory> stories, std::span<const std::string> header = {});

}  // namespace qdren
