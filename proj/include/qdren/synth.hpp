#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <string>
#include <vector>

#include "qdren/babi.hpp"

namespace qdren {

inline constexpr std::string_view kGeneratorVersion = "qdren-synth/1";

// ---- single supporting fact ---------------------------------------------

struct SingleFactOptions {
    std::size_t entities = 5;
    std::size_t locations = 6;
    std::size_t story_len = 6;
};

/// "entity moved to the location", in story order.
struct MoveEvent {
    std::size_t entity;
    std::size_t location;
};

struct SingleFactSample {
    RawStory story;
    std::vector<MoveEvent> events;
    std::size_t queried_entity = 0;
};

std::vector<std::string> entity_names(std::size_t n);
std::vector<std::string> location_names(std::size_t n);

/// Stories of `story_len` random moves (uniform entity, uniform location)
/// followed by "where is X ?" for an entity that moved; the answer is X's
/// latest location and the supporting fact is that move.
std::vector<SingleFactSample> generate_single_fact(std::uint64_t seed, std::size_t n_stories,
                                                   const SingleFactOptions& options);

std::vector<RawStory> gen_single_fact(std::uint64_t seed, std::size_t n_stories, std::size_t entities,
                                      std::size_t locations, std::size_t story_len);

// ---- anonymised entity cloze --------------------------------------------

struct ClozeOptions {
    std::size_t entities = 8;     // size of the anonymous id pool @entity0..
    std::size_t min_present = 3;  // entities mentioned per story
    std::size_t max_present = 5;
    std::size_t extra_facts = 2;  // upper bound on repeated mentions
};

/// One relational fact about an underlying (pre-anonymisation) entity slot.
struct ClozeFact {
    std::size_t slot;
    std::size_t relation;
    std::size_t object;
    int lead = -1;  // optional leading adverb
};

struct ClozePlan {
    std::vector<ClozeFact> facts;
    std::size_t query_fact = 0;
};

struct ClozeSample {
    ClozePlan plan;
    std::vector<std::size_t> permutation;  // slot -> anonymous id
    RawStory story;
};

/// Renders a plan with slot s shown as "@entity<permutation[s]>". The question
/// is "@placeholder <relation> <object>" of the query fact; candidates are the
/// ids present in the story, ascending.
RawStory render_cloze(const ClozePlan& plan, std::span<const std::size_t> permutation);

std::vector<ClozeSample> generate_entity_cloze(std::uint64_t seed, std::size_t n_stories, const ClozeOptions& options);

/// `window` is recorded for provenance only; windowing happens at model input.
std::vector<RawStory> gen_entity_cloze(std::uint64_t seed, std::size_t n_stories, std::size_t n_entities,
                                       std::size_t window);

std::string entity_token(std::size_t id);

// ---- datasets -----------------------------------------------------------

enum class SynthTask { single_fact, entity_cloze };

std::string_view to_string(SynthTask task);
/// "single-fact" or "entity-cloze"; ArgumentError otherwise.
SynthTask parse_synth_task(std::string_view name);

struct SynthSpec {
    SynthTask task = SynthTask::single_fact;
    std::uint64_t seed = 1;
    std::size_t n_train = 1000;
    std::size_t n_valid = 200;
    std::size_t n_test = 200;
    std::size_t entities = 5;  // single-fact: people; entity-cloze: id pool
    std::size_t locations = 6;
    std::size_t story_len = 6;
    std::size_t window = 5;
};

/// Seed of split `index` (0 train, 1 valid, 2 test); distinct per split.
std::uint64_t split_seed(std::uint64_t seed, std::size_t index);

/// Train/valid/test drawn with disjoint per-split seeds.
RawSplits generate_splits(const SynthSpec& spec);

/// Provenance lines written above each generated file.
std::vector<std::string> provenance_header(const SynthSpec& spec, std::size_t split_index);

}  // namespace qdren
