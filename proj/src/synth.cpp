#include "qdren/synth.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <set>
#include <utility>

#include "qdren/errors.hpp"
#include "qdren/rng.hpp"
#include "qdren/vocab.hpp"

namespace qdren {

namespace {

constexpr std::array<std::string_view, 10> kPeople = {"mary", "john", "sandra", "daniel", "fred",
                                                      "bill", "julie", "jeff",  "emily",  "sumit"};
constexpr std::array<std::string_view, 10> kPlaces = {"bathroom", "hallway", "garden", "office", "kitchen",
                                                      "bedroom",  "cinema",  "park",   "school", "library"};
constexpr std::array<std::string_view, 8> kRelations = {"visited", "praised", "left",  "joined",
                                                        "criticized", "founded", "sued", "thanked"};
constexpr std::array<std::string_view, 12> kObjects = {"paris", "rome",  "berlin", "madrid", "london", "tokyo",
                                                       "cairo", "lima",  "oslo",   "vienna", "boston", "dublin"};
constexpr std::array<std::string_view, 5> kLeads = {"then", "later", "reportedly", "yesterday", "meanwhile"};

template <std::size_t N>
std::vector<std::string> names_from(const std::array<std::string_view, N>& pool, std::size_t n, const char* fallback) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(i < N ? std::string(pool[i]) : std::string(fallback) + std::to_string(i));
    }
    return out;
}

}  // namespace

std::vector<std::string> entity_names(std::size_t n) { return names_from(kPeople, n, "person"); }
std::vector<std::string> location_names(std::size_t n) { return names_from(kPlaces, n, "place"); }

std::string entity_token(std::size_t id) { return std::string(kEntityPrefix) + std::to_string(id); }

std::vector<SingleFactSample> generate_single_fact(std::uint64_t seed, std::size_t n_stories,
                                                   const SingleFactOptions& options) {
    if (options.entities < 2 || options.locations < 2) {
        throw ArgumentError("single-fact generator needs at least 2 entities and 2 locations");
    }
    if (options.story_len < 1) throw ArgumentError("story length must be at least 1");
    const auto people = entity_names(options.entities);
    const auto places = location_names(options.locations);
    const Rng base(seed);

    std::vector<SingleFactSample> samples;
    samples.reserve(n_stories);
    for (std::size_t n = 0; n < n_stories; ++n) {
        Rng rng = base.split(n);
        SingleFactSample sample;
        std::vector<std::size_t> seen;
        for (std::size_t t = 0; t < options.story_len; ++t) {
            MoveEvent e{rng.below(options.entities), rng.below(options.locations)};
            sample.events.push_back(e);
            if (std::find(seen.begin(), seen.end(), e.entity) == seen.end()) seen.push_back(e.entity);
            sample.story.sentences.push_back({people[e.entity], "moved", "to", "the", places[e.location]});
        }
        sample.queried_entity = seen[rng.below(seen.size())];
        std::size_t last = 0;
        for (std::size_t t = 0; t < sample.events.size(); ++t) {
            if (sample.events[t].entity == sample.queried_entity) last = t;
        }
        sample.story.question = {"where", "is", people[sample.queried_entity]};
        sample.story.answer = places[sample.events[last].location];
        sample.story.supporting = {last};
        samples.push_back(std::move(sample));
    }
    return samples;
}

std::vector<RawStory> gen_single_fact(std::uint64_t seed, std::size_t n_stories, std::size_t entities,
                                      std::size_t locations, std::size_t story_len) {
    std::vector<RawStory> out;
    for (auto& s : generate_single_fact(seed, n_stories, {entities, locations, story_len})) {
        out.push_back(std::move(s.story));
    }
    return out;
}

RawStory render_cloze(const ClozePlan& plan, std::span<const std::size_t> permutation) {
    RawStory story;
    std::set<std::size_t> present;
    for (const auto& f : plan.facts) {
        if (f.slot >= permutation.size()) throw ArgumentError("entity slot outside the permutation");
        std::vector<std::string> sentence;
        if (f.lead >= 0) sentence.emplace_back(kLeads[static_cast<std::size_t>(f.lead)]);
        sentence.push_back(entity_token(permutation[f.slot]));
        sentence.emplace_back(kRelations[f.relation]);
        sentence.emplace_back(kObjects[f.object]);
        story.sentences.push_back(std::move(sentence));
        present.insert(permutation[f.slot]);
    }
    const auto& query = plan.facts.at(plan.query_fact);
    story.question = {std::string(kPlaceholderToken), std::string(kRelations[query.relation]),
                      std::string(kObjects[query.object])};
    story.answer = entity_token(permutation[query.slot]);
    story.supporting = {plan.query_fact};
    for (std::size_t id : present) story.candidates.push_back(entity_token(id));
    return story;
}

std::vector<ClozeSample> generate_entity_cloze(std::uint64_t seed, std::size_t n_stories, const ClozeOptions& options) {
    if (options.entities < 3) throw ArgumentError("entity-cloze generator needs at least 3 entities");
    if (options.min_present < 1 || options.min_present > options.max_present) {
        throw ArgumentError("entity-cloze: invalid present-entity range");
    }
    const Rng base(seed);
    std::vector<ClozeSample> samples;
    samples.reserve(n_stories);
    for (std::size_t n = 0; n < n_stories; ++n) {
        Rng rng = base.split(n);
        ClozeSample sample;
        const std::size_t hi = std::min(options.max_present, options.entities);
        const std::size_t lo = std::min(options.min_present, hi);
        const std::size_t present = lo + rng.below(hi - lo + 1);

        std::vector<std::size_t> slots(options.entities);
        std::iota(slots.begin(), slots.end(), 0);
        rng.shuffle(std::span<std::size_t>(slots));
        slots.resize(present);

        const std::size_t n_facts =
            std::min(present + rng.below(options.extra_facts + 1), kRelations.size() * kObjects.size());
        std::set<std::pair<std::size_t, std::size_t>> used;
        for (std::size_t f = 0; f < n_facts; ++f) {
            ClozeFact fact{};
            fact.slot = f < present ? slots[f] : slots[rng.below(present)];
            do {
                fact.relation = rng.below(kRelations.size());
                fact.object = rng.below(kObjects.size());
            } while (!used.emplace(fact.relation, fact.object).second);
            fact.lead = rng.bernoulli(0.5) ? static_cast<int>(rng.below(kLeads.size())) : -1;
            sample.plan.facts.push_back(fact);
        }
        rng.shuffle(std::span<ClozeFact>(sample.plan.facts));
        sample.plan.query_fact = rng.below(sample.plan.facts.size());

        sample.permutation.resize(options.entities);
        std::iota(sample.permutation.begin(), sample.permutation.end(), 0);
        rng.shuffle(std::span<std::size_t>(sample.permutation));
        sample.story = render_cloze(sample.plan, sample.permutation);
        samples.push_back(std::move(sample));
    }
    return samples;
}

std::vector<RawStory> gen_entity_cloze(std::uint64_t seed, std::size_t n_stories, std::size_t n_entities,
                                       std::size_t window) {
    if (window == 0 || window % 2 == 0) throw ArgumentError("window size must be odd and positive");
    ClozeOptions options;
    options.entities = n_entities;
    std::vector<RawStory> out;
    for (auto& s : generate_entity_cloze(seed, n_stories, options)) out.push_back(std::move(s.story));
    return out;
}

std::string_view to_string(SynthTask task) {
    return task == SynthTask::single_fact ? "single-fact" : "entity-cloze";
}

SynthTask parse_synth_task(std::string_view name) {
    if (name == "single-fact") return SynthTask::single_fact;
    if (name == "entity-cloze") return SynthTask::entity_cloze;
    throw ArgumentError("unknown task '" + std::string(name) + "' (expected single-fact or entity-cloze)");
}

std::uint64_t split_seed(std::uint64_t seed, std::size_t index) { return Rng(seed).split(1000 + index).next(); }

RawSplits generate_splits(const SynthSpec& spec) {
    auto make = [&spec](std::size_t index, std::size_t n) {
        const std::uint64_t s = split_seed(spec.seed, index);
        return spec.task == SynthTask::single_fact
                   ? gen_single_fact(s, n, spec.entities, spec.locations, spec.story_len)
                   : gen_entity_cloze(s, n, spec.entities, spec.window);
    };
    return {make(0, spec.n_train), make(1, spec.n_valid), make(2, spec.n_test)};
}

std::vector<std::string> provenance_header(const SynthSpec& spec, std::size_t split_index) {
    static constexpr std::array<std::string_view, 3> names = {"train", "valid", "test"};
    std::vector<std::string> h{
        "generator: " + std::string(kGeneratorVersion),
        "task: " + std::string(to_string(spec.task)),
        "seed: " + std::to_string(spec.seed),
        "split: " + std::string(names.at(split_index)) + " (seed " +
            std::to_string(split_seed(spec.seed, split_index)) + ")",
        "entities: " + std::to_string(spec.entities),
    };
    if (spec.task == SynthTask::single_fact) {
        h.push_back("locations: " + std::to_string(spec.locations));
        h.push_back("story_len: " + std::to_string(spec.story_len));
    } else {
        h.push_back("window: " + std::to_string(spec.window));
    }
    return h;
}

}  // namespace qdren
