#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dspn {

using TokenId = std::uint32_t;

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::size_t kDefaultMaxLen = 100;
inline constexpr std::size_t kDefaultMinCount = 2;

// Class order is fixed: [negative, neutral, positive].
enum class Polarity : int { negative = 0, neutral = 1, positive = 2 };

inline constexpr std::array<Polarity, kNumClasses> kAllPolarities = {
    Polarity::negative, Polarity::neutral, Polarity::positive};

std::string_view polarity_name(Polarity p);
Polarity parse_polarity(std::string_view name);
Polarity polarity_from_index(std::size_t index);
inline std::size_t polarity_index(Polarity p) { return static_cast<std::size_t>(p); }
std::array<double, kNumClasses> one_hot(Polarity p);
// -1, 0, +1
int polarity_score(Polarity p);

struct AspectLabel {
    std::string name;
    Polarity polarity;

    bool operator==(const AspectLabel&) const = default;
};

struct Review {
    std::string id;
    // Surface tokens after tokenization and truncation; tokens[j] is the id of words[j].
    std::vector<std::string> words;
    std::vector<TokenId> tokens;
    std::optional<int> stars;
    // Absent when the review carries no aspect annotation at all.
    std::optional<std::vector<AspectLabel>> gold_aspects;
    std::optional<Polarity> pseudo_label;
};

class Vocabulary {
public:
    static constexpr TokenId kUnk = 0;
    static constexpr TokenId kPad = 1;
    static constexpr std::string_view kUnkToken = "<unk>";
    static constexpr std::string_view kPadToken = "<pad>";

    Vocabulary();

    // Keeps words seen at least min_count times, ordered by descending
    // frequency and then lexicographically.
    static Vocabulary build(const std::vector<std::vector<std::string>>& documents,
                            std::size_t min_count = kDefaultMinCount);
    // tokens excludes the two special entries.
    static Vocabulary from_tokens(const std::vector<std::string>& tokens,
                                  std::size_t min_count = kDefaultMinCount);

    TokenId id(std::string_view token) const;
    std::optional<TokenId> find(std::string_view token) const;
    const std::string& token(TokenId id) const;
    std::size_t size() const { return id_to_token_.size(); }
    std::size_t min_count() const { return min_count_; }
    const std::vector<std::string>& tokens() const { return id_to_token_; }
    std::uint64_t fingerprint() const;

private:
    void insert(std::string token);

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, TokenId> token_to_id_;
    std::size_t min_count_ = kDefaultMinCount;
};

struct AspectSchema {
    struct Aspect {
        std::string name;
        std::vector<std::string> seeds;
    };
    std::vector<Aspect> aspects;

    std::size_t size() const { return aspects.size(); }
    std::optional<std::size_t> index_of(std::string_view name) const;
    std::vector<std::string> names() const;
    // Throws FormatError unless names are unique, N >= 2 and seed lists nonempty.
    void validate() const;
    std::uint64_t fingerprint() const;
};

AspectSchema parse_schema(std::string_view json_text);
AspectSchema load_schema(const std::filesystem::path& path);
void save_schema(const AspectSchema& schema, const std::filesystem::path& path);

struct Corpus {
    std::vector<Review> reviews;
    Vocabulary vocab;
    std::size_t max_len = kDefaultMaxLen;

    const Review* find(std::string_view id) const;
};

// Lowercase ASCII, replace ASCII punctuation by spaces, split on whitespace.
std::vector<std::string> tokenize(std::string_view text);

// Reads line-delimited review records. Unknown words map to UNK and
// sequences are cut at max_len tokens.
Corpus load_corpus(const std::filesystem::path& path, const Vocabulary& vocab,
                   std::size_t max_len = kDefaultMaxLen);
// Same, building the vocabulary from the file.
Corpus load_corpus(const std::filesystem::path& path, std::size_t min_count = kDefaultMinCount,
                   std::size_t max_len = kDefaultMaxLen);
Corpus parse_corpus(std::istream& in, const Vocabulary* vocab, std::size_t min_count,
                    std::size_t max_len);

std::string review_to_json(const Review& review);
void save_corpus(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// 1-2 negative, 3 neutral, 4-5 positive.
Polarity map_star_to_polarity(int stars);

// Mean of -1/0/+1 scores: above 1/3 positive, below -1/3 negative, else neutral.
Polarity derive_review_label(const std::vector<AspectLabel>& gold_aspects);

struct CorpusStats {
    std::map<std::string, std::size_t> reviews_per_split;
    std::size_t total_reviews = 0;
    // Indexed by polarity; reviews with no overall label are counted separately.
    std::array<std::size_t, kNumClasses> overall_counts{};
    std::size_t overall_unlabeled = 0;
    std::array<std::size_t, kNumClasses> aspect_counts{};
    std::size_t absent_aspects = 0;
    std::size_t annotated_reviews = 0;
    double multi_aspect = 0.0;
    double multi_aspect_multi_sentiment = 0.0;
};

struct NamedSplit {
    std::string name;
    const Corpus* corpus;
};

// num_aspects = 0 infers N from the distinct aspect names present.
CorpusStats corpus_stats(const std::vector<NamedSplit>& splits, std::size_t num_aspects = 0);
CorpusStats corpus_stats(const Corpus& corpus, std::size_t num_aspects = 0);
std::string format_stats(const CorpusStats& stats);

std::size_t count_aspect_labels(const Corpus& corpus);

// Keeps exactly label_budget gold aspect labels drawn uniformly without
// replacement. Reviews left with no label lose their annotation.
Corpus budget_subsample(const Corpus& corpus, std::size_t label_budget, std::uint64_t seed);

}  // namespace dspn
