#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dspn/corpus.hpp"

namespace dspn {

// Generator for synthetic review corpora with known aspect structure.
//
// Each review picks K aspects (K = 1, or with probability multi_aspect_prob
// K uniform in [2, max_aspects_per_review]), a polarity per aspect and a
// mention count in [1, max_mentions]. Every mention emits one aspect keyword
// followed by a sentiment word of that aspect's polarity: one of the aspect's
// own opinion words with probability opinion_prob, else a shared lexicon
// word. Filler
// words pad the review to a length drawn from [min_len, max_len]. The star
// rating comes from the mention-weighted mean polarity score with the same
// +-1/3 dead zone used by derive_review_label; negative maps to 1-2 stars,
// neutral to 3 and positive to 4-5.
struct SynthConfig {
    struct Aspect {
        std::string name;
        std::vector<std::string> keywords;
        // Aspect-specific sentiment words by polarity index (may be empty).
        std::array<std::vector<std::string>, kNumClasses> opinions;
    };
    std::vector<Aspect> aspects;
    std::array<std::vector<std::string>, kNumClasses> lexicon;  // by polarity index
    std::vector<std::string> fillers;
    // Chance that a mention takes its sentiment word from the aspect's own
    // opinion words rather than the shared lexicon.
    double opinion_prob = 0.0;
    std::array<double, kNumClasses> polarity_probs{1.0 / 3, 1.0 / 3, 1.0 / 3};
    std::size_t size = 1000;
    std::size_t min_len = 8;
    std::size_t max_len = 16;
    double multi_aspect_prob = 0.3;
    std::size_t max_aspects_per_review = 2;
    std::size_t max_mentions = 2;
    std::size_t seeds_per_aspect = 3;

    void validate() const;
};

// Word inventory of vocab_size types (including the two special entries):
// 6 keywords per aspect, 2 opinion words per aspect and polarity (always
// used), 6 shared words per polarity and fillers for the rest.
SynthConfig default_synth_config(std::size_t num_aspects = 5, std::size_t vocab_size = 200,
                                 std::size_t size = 1000);

SynthConfig parse_synth_config(std::string_view json_text);
SynthConfig load_synth_config(const std::filesystem::path& path);
std::string synth_config_to_json(const SynthConfig& config);

// Vocabulary holds every generator word, so no token maps to UNK.
Corpus synth_corpus(const SynthConfig& config, std::uint64_t seed);

// Seeds are the first seeds_per_aspect keywords of each aspect.
AspectSchema synth_schema(const SynthConfig& config);

}  // namespace dspn
