#include "qdren/babi.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "qdren/errors.hpp"

namespace qdren {

namespace {

constexpr std::string_view kCandidatesTag = "CANDIDATES";

bool is_trailing_punct(char c) { return c == '.' || c == '?' || c == '!' || c == ',' || c == ';'; }

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            parts.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return parts;
}

std::vector<std::vector<std::string>> split_sentences(const std::vector<std::string>& tokens) {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> current;
    for (const auto& t : tokens) {
        if (t == ".") {
            if (!current.empty()) out.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(t);
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::istringstream words{std::string(text)};
    std::string word;
    while (words >> word) {
        for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        std::vector<std::string> tail;
        while (word.size() > 1 && is_trailing_punct(word.back())) {
            tail.insert(tail.begin(), std::string(1, word.back()));
            word.pop_back();
        }
        tokens.push_back(word);
        tokens.insert(tokens.end(), tail.begin(), tail.end());
    }
    return tokens;
}

std::vector<RawStory> parse_babi(std::istream& in) {
    std::vector<RawStory> stories;
    std::vector<std::vector<std::string>> facts;
    std::map<long, std::size_t> line_to_sentence;
    std::optional<long> last_number;
    bool last_was_question = false;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string trimmed = trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;

        if (trimmed.rfind(kCandidatesTag, 0) == 0) {
            if (!last_was_question) throw ParseError(line_no, "CANDIDATES line must follow a question line");
            const auto tab = trimmed.find('\t');
            if (tab == std::string::npos) throw ParseError(line_no, "CANDIDATES line needs a tab-separated list");
            stories.back().candidates = tokenize(trimmed.substr(tab + 1));
            if (stories.back().candidates.empty()) throw ParseError(line_no, "empty candidate list");
            last_was_question = false;
            continue;
        }

        std::size_t digits = 0;
        while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
        if (digits == 0 || digits >= line.size() || line[digits] != ' ') {
            throw ParseError(line_no, "expected '<number> <text>'");
        }
        const long number = std::stol(line.substr(0, digits));
        if (last_number && number <= *last_number) {
            facts.clear();
            line_to_sentence.clear();
        }
        last_number = number;
        const std::string body = line.substr(digits + 1);

        if (body.find('\t') == std::string::npos) {
            auto sentences = split_sentences(tokenize(body));
            if (sentences.empty()) throw ParseError(line_no, "fact line has no tokens");
            line_to_sentence[number] = facts.size();
            for (auto& s : sentences) facts.push_back(std::move(s));
            last_was_question = false;
            continue;
        }

        const auto fields = split(body, '\t');
        if (fields.size() != 3) throw ParseError(line_no, "question line needs question, answer and supporting ids");
        const std::string question_text = trim(fields[0]);
        if (question_text.empty() || question_text.back() != '?') {
            throw ParseError(line_no, "question must end with '?'");
        }
        RawStory story;
        story.sentences = facts;
        for (auto& t : tokenize(question_text)) {
            if (t != "?") story.question.push_back(std::move(t));
        }
        const std::string answer = trim(fields[1]);
        if (answer.empty() || answer.find(' ') != std::string::npos) {
            throw ParseError(line_no, "answer must be a single token");
        }
        story.answer = tokenize(answer).front();
        if (fields[2].empty()) throw ParseError(line_no, "missing supporting fact ids");
        const std::string support = trim(fields[2]);
        for (char c : support) {
            if (!std::isdigit(static_cast<unsigned char>(c)) && c != ' ') {
                throw ParseError(line_no, "supporting ids must be numbers");
            }
        }
        std::istringstream ids(support);
        long id;
        while (ids >> id) {
            auto it = line_to_sentence.find(id);
            if (it == line_to_sentence.end()) {
                throw ParseError(line_no, "supporting id " + std::to_string(id) + " is not a fact of this story");
            }
            story.supporting.push_back(it->second);
        }
        stories.push_back(std::move(story));
        last_was_question = true;
    }
    return stories;
}

std::vector<RawStory> parse_babi_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return parse_babi(in);
}

void write_babi(std::ostream& out, std::span<const RawStory> stories, std::span<const std::string> header) {
    for (const auto& h : header) out << "# " << h << '\n';
    auto join = [](const std::vector<std::string>& tokens) {
        std::string s;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i) s += ' ';
            s += tokens[i];
        }
        return s;
    };
    for (const auto& story : stories) {
        std::size_t n = 1;
        for (const auto& sentence : story.sentences) out << n++ << ' ' << join(sentence) << ".\n";
        out << n << ' ' << join(story.question) << "?\t" << story.answer << '\t';
        for (std::size_t i = 0; i < story.supporting.size(); ++i) {
            if (i) out << ' ';
            out << story.supporting[i] + 1;
        }
        if (story.supporting.empty()) out << ' ';
        out << '\n';
        if (!story.candidates.empty()) out << kCandidatesTag << '\t' << join(story.candidates) << '\n';
    }
}

}  // namespace qdren
