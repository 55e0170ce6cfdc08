#include "dspn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dspn/errors.hpp"
#include "dspn/hash.hpp"
#include "dspn/rng.hpp"

namespace dspn {

using nlohmann::json;

std::string_view polarity_name(Polarity p) {
    switch (p) {
        case Polarity::negative: return "negative";
        case Polarity::neutral: return "neutral";
        case Polarity::positive: return "positive";
    }
    return "?";
}

Polarity parse_polarity(std::string_view name) {
    if (name == "negative") return Polarity::negative;
    if (name == "neutral") return Polarity::neutral;
    if (name == "positive") return Polarity::positive;
    throw FormatError("unknown polarity '" + std::string(name) + "'");
}

Polarity polarity_from_index(std::size_t index) {
    if (index >= kNumClasses) throw Error("polarity index out of range");
    return static_cast<Polarity>(index);
}

std::array<double, kNumClasses> one_hot(Polarity p) {
    std::array<double, kNumClasses> v{};
    v[polarity_index(p)] = 1.0;
    return v;
}

int polarity_score(Polarity p) { return static_cast<int>(p) - 1; }

// ---------------------------------------------------------------- vocabulary

Vocabulary::Vocabulary() {
    insert(std::string(kUnkToken));
    insert(std::string(kPadToken));
}

void Vocabulary::insert(std::string token) {
    const auto id = static_cast<TokenId>(id_to_token_.size());
    if (!token_to_id_.emplace(token, id).second) {
        throw Error("duplicate vocabulary entry '" + token + "'");
    }
    id_to_token_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& documents,
                             std::size_t min_count) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& doc : documents) {
        for (const auto& w : doc) ++counts[w];
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [w, c] : counts) {
        if (c >= min_count && w != kUnkToken && w != kPadToken) kept.emplace_back(w, c);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    Vocabulary vocab;
    vocab.min_count_ = min_count;
    for (auto& [w, c] : kept) vocab.insert(w);
    return vocab;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens, std::size_t min_count) {
    Vocabulary vocab;
    vocab.min_count_ = min_count;
    for (const auto& t : tokens) vocab.insert(t);
    return vocab;
}

TokenId Vocabulary::id(std::string_view token) const { return find(token).value_or(kUnk); }

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id >= id_to_token_.size()) throw Error("token id " + std::to_string(id) + " out of range");
    return id_to_token_[id];
}

std::uint64_t Vocabulary::fingerprint() const {
    Fnv1a h;
    for (const auto& t : id_to_token_) {
        h.update(t);
        h.update(std::string_view("\n", 1));
    }
    return h.digest();
}

// -------------------------------------------------------------------- schema

std::optional<std::size_t> AspectSchema::index_of(std::string_view name) const {
    for (std::size_t k = 0; k < aspects.size(); ++k) {
        if (aspects[k].name == name) return k;
    }
    return std::nullopt;
}

std::vector<std::string> AspectSchema::names() const {
    std::vector<std::string> out;
    for (const auto& a : aspects) out.push_back(a.name);
    return out;
}

void AspectSchema::validate() const {
    if (aspects.size() < 2) throw FormatError("aspect schema needs at least 2 aspects");
    std::set<std::string> seen;
    for (const auto& a : aspects) {
        if (a.name.empty()) throw FormatError("aspect with empty name");
        if (!seen.insert(a.name).second) throw FormatError("duplicate aspect '" + a.name + "'");
        if (a.seeds.empty()) throw FormatError("aspect '" + a.name + "' has no seed words");
    }
}

std::uint64_t AspectSchema::fingerprint() const {
    Fnv1a h;
    for (const auto& a : aspects) {
        h.update(a.name);
        h.update(std::string_view(":", 1));
        for (const auto& s : a.seeds) {
            h.update(s);
            h.update(std::string_view(",", 1));
        }
        h.update(std::string_view("\n", 1));
    }
    return h.digest();
}

AspectSchema parse_schema(std::string_view json_text) {
    AspectSchema schema;
    try {
        const json doc = json::parse(json_text);
        for (const auto& a : doc.at("aspects")) {
            AspectSchema::Aspect aspect;
            aspect.name = a.at("name").get<std::string>();
            for (const auto& s : a.at("seeds")) aspect.seeds.push_back(s.get<std::string>());
            schema.aspects.push_back(std::move(aspect));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("invalid aspect schema: ") + e.what());
    }
    schema.validate();
    return schema;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

AspectSchema load_schema(const std::filesystem::path& path) {
    return parse_schema(read_file(path));
}

void save_schema(const AspectSchema& schema, const std::filesystem::path& path) {
    json doc;
    doc["aspects"] = json::array();
    for (const auto& a : schema.aspects) {
        doc["aspects"].push_back({{"name", a.name}, {"seeds", a.seeds}});
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << doc.dump(2) << "\n";
}

// -------------------------------------------------------------------- corpus

const Review* Corpus::find(std::string_view id) const {
    for (const auto& r : reviews) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        const bool ascii = c < 0x80;
        if (ascii && (std::isspace(c) || std::ispunct(c))) {
            if (!current.empty()) out.push_back(std::move(current));
            current.clear();
            continue;
        }
        current.push_back(ascii ? static_cast<char>(std::tolower(c)) : ch);
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

namespace {

struct RawRecord {
    Review review;
    std::size_t line = 0;
};

RawRecord parse_record(const std::string& text, std::size_t line_no, std::size_t max_len) {
    const std::string where = " at line " + std::to_string(line_no);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception&) {
        throw FormatError("malformed record" + where);
    }
    if (!doc.is_object()) throw FormatError("malformed record" + where);

    RawRecord rec;
    rec.line = line_no;
    Review& r = rec.review;
    try {
        r.id = doc.at("id").get<std::string>();
        r.words = tokenize(doc.at("text").get<std::string>());
        if (doc.contains("stars") && !doc["stars"].is_null()) {
            if (!doc["stars"].is_number_integer()) throw FormatError("stars must be an integer" + where);
            const auto stars = doc["stars"].get<long long>();
            if (stars < 1 || stars > 5) throw FormatError("stars out of range" + where);
            r.stars = static_cast<int>(stars);
        }
        if (doc.contains("aspects") && !doc["aspects"].is_null()) {
            std::vector<AspectLabel> labels;
            std::set<std::string> seen;
            for (const auto& a : doc["aspects"]) {
                AspectLabel label{a.at("name").get<std::string>(), Polarity::neutral};
                try {
                    label.polarity = parse_polarity(a.at("polarity").get<std::string>());
                } catch (const FormatError& e) {
                    throw FormatError(std::string(e.what()) + where);
                }
                if (!seen.insert(label.name).second) {
                    throw FormatError("aspect '" + label.name + "' repeated" + where);
                }
                labels.push_back(std::move(label));
            }
            r.gold_aspects = std::move(labels);
        }
        if (doc.contains("pseudo_label") && !doc["pseudo_label"].is_null()) {
            try {
                r.pseudo_label = parse_polarity(doc["pseudo_label"].get<std::string>());
            } catch (const FormatError& e) {
                throw FormatError(std::string(e.what()) + where);
            }
        }
    } catch (const json::exception&) {
        throw FormatError("malformed record" + where);
    }
    if (r.words.empty()) throw FormatError("review '" + r.id + "' has no tokens" + where);
    if (r.words.size() > max_len) r.words.resize(max_len);
    return rec;
}

}  // namespace

Corpus parse_corpus(std::istream& in, const Vocabulary* vocab, std::size_t min_count,
                    std::size_t max_len) {
    if (max_len == 0) throw Error("max_len must be positive");
    std::vector<RawRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        records.push_back(parse_record(line, line_no, max_len));
    }

    Corpus corpus;
    corpus.max_len = max_len;
    if (vocab != nullptr) {
        corpus.vocab = *vocab;
    } else {
        std::vector<std::vector<std::string>> docs;
        docs.reserve(records.size());
        for (const auto& rec : records) docs.push_back(rec.review.words);
        corpus.vocab = Vocabulary::build(docs, min_count);
    }
    corpus.reviews.reserve(records.size());
    for (auto& rec : records) {
        Review& r = rec.review;
        r.tokens.reserve(r.words.size());
        for (const auto& w : r.words) r.tokens.push_back(corpus.vocab.id(w));
        corpus.reviews.push_back(std::move(r));
    }
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t max_len) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open corpus '" + path.string() + "'");
    return parse_corpus(in, &vocab, vocab.min_count(), max_len);
}

Corpus load_corpus(const std::filesystem::path& path, std::size_t min_count, std::size_t max_len) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open corpus '" + path.string() + "'");
    return parse_corpus(in, nullptr, min_count, max_len);
}

std::string review_to_json(const Review& review) {
    json doc;
    doc["id"] = review.id;
    std::string text;
    for (std::size_t j = 0; j < review.words.size(); ++j) {
        if (j > 0) text.push_back(' ');
        text += review.words[j];
    }
    doc["text"] = text;
    if (review.stars) doc["stars"] = *review.stars;
    if (review.gold_aspects) {
        doc["aspects"] = json::array();
        for (const auto& a : *review.gold_aspects) {
            doc["aspects"].push_back({{"name", a.name}, {"polarity", polarity_name(a.polarity)}});
        }
    }
    if (review.pseudo_label) doc["pseudo_label"] = polarity_name(*review.pseudo_label);
    return doc.dump();
}

void save_corpus(const Corpus& corpus, std::ostream& out) {
    for (const auto& r : corpus.reviews) out << review_to_json(r) << "\n";
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    save_corpus(corpus, out);
}

// -------------------------------------------------------------------- labels

Polarity map_star_to_polarity(int stars) {
    if (stars < 1 || stars > 5) throw FormatError("stars out of range: " + std::to_string(stars));
    if (stars <= 2) return Polarity::negative;
    if (stars == 3) return Polarity::neutral;
    return Polarity::positive;
}

Polarity derive_review_label(const std::vector<AspectLabel>& gold_aspects) {
    if (gold_aspects.empty()) throw Error("cannot derive a review label from zero aspect labels");
    // Compare 3*sum against +-count to keep the 1/3 boundary exact.
    long long sum = 0;
    for (const auto& a : gold_aspects) sum += polarity_score(a.polarity);
    const auto count = static_cast<long long>(gold_aspects.size());
    if (3 * sum > count) return Polarity::positive;
    if (3 * sum < -count) return Polarity::negative;
    return Polarity::neutral;
}

// --------------------------------------------------------------------- stats

namespace {

std::optional<Polarity> overall_label(const Review& r) {
    if (r.stars) return map_star_to_polarity(*r.stars);
    if (r.gold_aspects && !r.gold_aspects->empty()) return derive_review_label(*r.gold_aspects);
    return r.pseudo_label;
}

}  // namespace

CorpusStats corpus_stats(const std::vector<NamedSplit>& splits, std::size_t num_aspects) {
    CorpusStats stats;
    std::set<std::string> names;
    std::size_t labels = 0;
    std::size_t multi = 0;
    std::size_t mixed = 0;
    for (const auto& split : splits) {
        stats.reviews_per_split[split.name] += split.corpus->reviews.size();
        for (const auto& r : split.corpus->reviews) {
            ++stats.total_reviews;
            if (auto y = overall_label(r)) {
                ++stats.overall_counts[polarity_index(*y)];
            } else {
                ++stats.overall_unlabeled;
            }
            if (!r.gold_aspects) continue;
            ++stats.annotated_reviews;
            std::set<Polarity> polarities;
            for (const auto& a : *r.gold_aspects) {
                names.insert(a.name);
                ++stats.aspect_counts[polarity_index(a.polarity)];
                polarities.insert(a.polarity);
                ++labels;
            }
            if (r.gold_aspects->size() >= 2) {
                ++multi;
                if (polarities.size() >= 2) ++mixed;
            }
        }
    }
    if (stats.annotated_reviews == 0) throw Error("corpus has no aspect annotations");
    const std::size_t n_aspects = num_aspects > 0 ? num_aspects : names.size();
    const std::size_t slots = n_aspects * stats.annotated_reviews;
    stats.absent_aspects = slots > labels ? slots - labels : 0;
    stats.multi_aspect = static_cast<double>(multi) / static_cast<double>(stats.annotated_reviews);
    stats.multi_aspect_multi_sentiment =
        static_cast<double>(mixed) / static_cast<double>(stats.annotated_reviews);
    return stats;
}

CorpusStats corpus_stats(const Corpus& corpus, std::size_t num_aspects) {
    return corpus_stats({NamedSplit{"all", &corpus}}, num_aspects);
}

std::string format_stats(const CorpusStats& s) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "MA  " << 100.0 * s.multi_aspect << "%\n";
    os << "MAS " << 100.0 * s.multi_aspect_multi_sentiment << "%\n";
    os << "split      reviews\n";
    for (const auto& [name, count] : s.reviews_per_split) {
        os << std::left << std::setw(10) << name << " " << count << "\n";
    }
    os << "overall    pos " << s.overall_counts[2] << "  neu " << s.overall_counts[1] << "  neg "
       << s.overall_counts[0];
    if (s.overall_unlabeled > 0) os << "  unlabeled " << s.overall_unlabeled;
    os << "\n";
    os << "aspects    pos " << s.aspect_counts[2] << "  neu " << s.aspect_counts[1] << "  neg "
       << s.aspect_counts[0] << "  nan " << s.absent_aspects << "\n";
    return os.str();
}

std::size_t count_aspect_labels(const Corpus& corpus) {
    std::size_t n = 0;
    for (const auto& r : corpus.reviews) {
        if (r.gold_aspects) n += r.gold_aspects->size();
    }
    return n;
}

Corpus budget_subsample(const Corpus& corpus, std::size_t label_budget, std::uint64_t seed) {
    std::vector<std::pair<std::size_t, std::size_t>> slots;
    for (std::size_t i = 0; i < corpus.reviews.size(); ++i) {
        const auto& r = corpus.reviews[i];
        if (!r.gold_aspects) continue;
        for (std::size_t k = 0; k < r.gold_aspects->size(); ++k) slots.emplace_back(i, k);
    }
    if (label_budget > slots.size()) {
        throw Error("label budget " + std::to_string(label_budget) + " exceeds the " +
                    std::to_string(slots.size()) + " available aspect labels");
    }

    // Partial Fisher-Yates: the first label_budget slots form the sample.
    Rng rng(seed);
    for (std::size_t i = 0; i < label_budget; ++i) {
        const std::size_t j = i + rng.uniform_index(slots.size() - i);
        std::swap(slots[i], slots[j]);
    }
    std::vector<std::vector<bool>> keep(corpus.reviews.size());
    for (std::size_t i = 0; i < corpus.reviews.size(); ++i) {
        if (corpus.reviews[i].gold_aspects) keep[i].assign(corpus.reviews[i].gold_aspects->size(), false);
    }
    for (std::size_t s = 0; s < label_budget; ++s) keep[slots[s].first][slots[s].second] = true;

    Corpus out = corpus;
    for (std::size_t i = 0; i < out.reviews.size(); ++i) {
        auto& r = out.reviews[i];
        if (!r.gold_aspects || r.gold_aspects->empty()) continue;
        std::vector<AspectLabel> kept;
        for (std::size_t k = 0; k < r.gold_aspects->size(); ++k) {
            if (keep[i][k]) kept.push_back((*r.gold_aspects)[k]);
        }
        if (kept.empty()) {
            r.gold_aspects.reset();
        } else {
            r.gold_aspects = std::move(kept);
        }
    }
    return out;
}

}  // namespace dspn
