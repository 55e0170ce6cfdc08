#include "dspn/synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dspn/errors.hpp"
#include "dspn/rng.hpp"

namespace dspn {

using nlohmann::json;

void SynthConfig::validate() const {
    if (aspects.size() < 2) throw ConfigError("generator needs at least 2 aspects");
    std::set<std::string> keyword_owner;
    std::set<std::string> names;
    for (const auto& a : aspects) {
        if (!names.insert(a.name).second) throw ConfigError("duplicate aspect '" + a.name + "'");
        if (a.keywords.empty()) throw ConfigError("aspect '" + a.name + "' has no keywords");
        for (const auto& k : a.keywords) {
            if (!keyword_owner.insert(k).second) {
                throw ConfigError("keyword '" + k + "' appears in more than one aspect");
            }
        }
    }
    std::set<std::string> opinion_owner;
    for (const auto& a : aspects) {
        std::set<std::string> own;
        for (const auto& words : a.opinions) {
            for (const auto& w : words) {
                if (keyword_owner.count(w) != 0) throw ConfigError("opinion word '" + w + "' is also a keyword");
                if (own.insert(w).second && !opinion_owner.insert(w).second) {
                    throw ConfigError("opinion word '" + w + "' appears in more than one aspect");
                }
            }
        }
    }
    if (opinion_prob < 0.0 || opinion_prob > 1.0) throw ConfigError("opinion_prob outside [0,1]");
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (polarity_probs[c] > 0.0 && lexicon[c].empty()) {
            throw ConfigError("empty lexicon for polarity " +
                              std::string(polarity_name(polarity_from_index(c))));
        }
        for (const auto& w : lexicon[c]) {
            if (keyword_owner.count(w) != 0) throw ConfigError("lexicon word '" + w + "' is also a keyword");
        }
    }
    if (min_len > max_len) throw ConfigError("min_len exceeds max_len");
    if (multi_aspect_prob < 0.0 || multi_aspect_prob > 1.0) throw ConfigError("multi_aspect_prob outside [0,1]");
    if (multi_aspect_prob > 0.0 && max_aspects_per_review < 2) {
        throw ConfigError("max_aspects_per_review must be at least 2 when multi_aspect_prob > 0");
    }
    if (max_aspects_per_review > aspects.size()) throw ConfigError("max_aspects_per_review exceeds aspect count");
    if (max_mentions < 1) throw ConfigError("max_mentions must be at least 1");
    if (seeds_per_aspect < 1) throw ConfigError("seeds_per_aspect must be at least 1");
    double total = 0.0;
    for (double p : polarity_probs) {
        if (p < 0.0) throw ConfigError("negative polarity probability");
        total += p;
    }
    if (!(total > 0.0)) throw ConfigError("polarity probabilities sum to zero");
}

SynthConfig default_synth_config(std::size_t num_aspects, std::size_t vocab_size, std::size_t size) {
    static const std::vector<std::string> known = {"food",  "service", "price",   "location",
                                                   "ambience", "room", "value", "cleanliness"};
    constexpr std::size_t kKeywords = 6;
    constexpr std::size_t kOpinions = 2;
    constexpr std::size_t kLexicon = 6;
    const std::size_t fixed =
        2 + num_aspects * (kKeywords + kNumClasses * kOpinions) + kNumClasses * kLexicon;
    if (vocab_size <= fixed) throw ConfigError("vocab_size too small for the default generator");

    SynthConfig cfg;
    cfg.size = size;
    cfg.opinion_prob = 1.0;
    const std::array<std::string, kNumClasses> prefix = {"neg", "neu", "pos"};
    for (std::size_t k = 0; k < num_aspects; ++k) {
        SynthConfig::Aspect a;
        a.name = k < known.size() ? known[k] : "aspect" + std::to_string(k);
        for (std::size_t i = 0; i < kKeywords; ++i) a.keywords.push_back(a.name + "kw" + std::to_string(i));
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            for (std::size_t i = 0; i < kOpinions; ++i) a.opinions[c].push_back(a.name + prefix[c] + std::to_string(i));
        }
        cfg.aspects.push_back(std::move(a));
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        for (std::size_t i = 0; i < kLexicon; ++i) cfg.lexicon[c].push_back(prefix[c] + std::to_string(i));
    }
    for (std::size_t i = 0; i < vocab_size - fixed; ++i) cfg.fillers.push_back("w" + std::to_string(i));
    return cfg;
}

SynthConfig parse_synth_config(std::string_view json_text) {
    SynthConfig cfg;
    try {
        const json doc = json::parse(json_text);
        for (const auto& a : doc.at("aspects")) {
            SynthConfig::Aspect aspect;
            aspect.name = a.at("name").get<std::string>();
            aspect.keywords = a.at("keywords").get<std::vector<std::string>>();
            if (a.contains("opinions")) {
                for (Polarity p : kAllPolarities) {
                    aspect.opinions[polarity_index(p)] =
                        a["opinions"].value(std::string(polarity_name(p)), std::vector<std::string>{});
                }
            }
            cfg.aspects.push_back(std::move(aspect));
        }
        const auto& lex = doc.at("lexicon");
        for (Polarity p : kAllPolarities) {
            cfg.lexicon[polarity_index(p)] =
                lex.value(std::string(polarity_name(p)), std::vector<std::string>{});
        }
        cfg.fillers = doc.value("fillers", std::vector<std::string>{});
        cfg.opinion_prob = doc.value("opinion_prob", cfg.opinion_prob);
        if (doc.contains("polarity_probs")) {
            const auto probs = doc["polarity_probs"].get<std::vector<double>>();
            if (probs.size() != kNumClasses) throw ConfigError("polarity_probs needs 3 entries");
            std::copy(probs.begin(), probs.end(), cfg.polarity_probs.begin());
        }
        cfg.size = doc.value("size", cfg.size);
        cfg.min_len = doc.value("min_len", cfg.min_len);
        cfg.max_len = doc.value("max_len", cfg.max_len);
        cfg.multi_aspect_prob = doc.value("multi_aspect_prob", cfg.multi_aspect_prob);
        cfg.max_aspects_per_review = doc.value("max_aspects_per_review", cfg.max_aspects_per_review);
        cfg.max_mentions = doc.value("max_mentions", cfg.max_mentions);
        cfg.seeds_per_aspect = doc.value("seeds_per_aspect", cfg.seeds_per_aspect);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid generator config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_synth_config(ss.str());
}

std::string synth_config_to_json(const SynthConfig& cfg) {
    json doc;
    doc["aspects"] = json::array();
    for (const auto& a : cfg.aspects) {
        json entry = {{"name", a.name}, {"keywords", a.keywords}};
        for (Polarity p : kAllPolarities) {
            const auto& words = a.opinions[polarity_index(p)];
            if (!words.empty()) entry["opinions"][std::string(polarity_name(p))] = words;
        }
        doc["aspects"].push_back(std::move(entry));
    }
    for (Polarity p : kAllPolarities) {
        doc["lexicon"][std::string(polarity_name(p))] = cfg.lexicon[polarity_index(p)];
    }
    doc["fillers"] = cfg.fillers;
    doc["opinion_prob"] = cfg.opinion_prob;
    doc["polarity_probs"] = cfg.polarity_probs;
    doc["size"] = cfg.size;
    doc["min_len"] = cfg.min_len;
    doc["max_len"] = cfg.max_len;
    doc["multi_aspect_prob"] = cfg.multi_aspect_prob;
    doc["max_aspects_per_review"] = cfg.max_aspects_per_review;
    doc["max_mentions"] = cfg.max_mentions;
    doc["seeds_per_aspect"] = cfg.seeds_per_aspect;
    return doc.dump(2);
}

namespace {

Polarity draw_polarity(Rng& rng, const std::array<double, kNumClasses>& probs) {
    const double total = probs[0] + probs[1] + probs[2];
    double u = rng.uniform() * total;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (u < probs[c]) return polarity_from_index(c);
        u -= probs[c];
    }
    for (std::size_t c = kNumClasses; c-- > 0;) {
        if (probs[c] > 0.0) return polarity_from_index(c);
    }
    return Polarity::neutral;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
    return items[rng.uniform_index(items.size())];
}

}  // namespace

Corpus synth_corpus(const SynthConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);

    std::vector<std::string> words;
    for (const auto& a : config.aspects) words.insert(words.end(), a.keywords.begin(), a.keywords.end());
    for (const auto& a : config.aspects) {
        for (const auto& o : a.opinions) words.insert(words.end(), o.begin(), o.end());
    }
    for (const auto& lex : config.lexicon) words.insert(words.end(), lex.begin(), lex.end());
    words.insert(words.end(), config.fillers.begin(), config.fillers.end());
    std::set<std::string> unique;
    std::vector<std::string> ordered;
    for (auto& w : words) {
        if (unique.insert(w).second) ordered.push_back(w);
    }

    Corpus corpus;
    corpus.vocab = Vocabulary::from_tokens(ordered, 1);
    corpus.max_len = std::max(config.max_len, kDefaultMaxLen);

    const std::size_t n_aspects = config.aspects.size();
    for (std::size_t i = 0; i < config.size; ++i) {
        std::size_t k_count = 1;
        if (rng.bernoulli(config.multi_aspect_prob)) {
            k_count = 2 + rng.uniform_index(config.max_aspects_per_review - 1);
        }
        std::vector<std::size_t> order(n_aspects);
        for (std::size_t k = 0; k < n_aspects; ++k) order[k] = k;
        rng.shuffle(std::span<std::size_t>(order));
        order.resize(k_count);
        std::sort(order.begin(), order.end());

        std::vector<std::vector<std::string>> units;
        std::vector<AspectLabel> labels;
        long long weighted = 0;
        long long mentions = 0;
        for (std::size_t k : order) {
            const Polarity pol = draw_polarity(rng, config.polarity_probs);
            const std::size_t count = 1 + rng.uniform_index(config.max_mentions);
            const auto& own = config.aspects[k].opinions[polarity_index(pol)];
            for (std::size_t m = 0; m < count; ++m) {
                const std::string& keyword = pick(rng, config.aspects[k].keywords);
                const bool use_own = !own.empty() && config.opinion_prob > 0.0 && rng.bernoulli(config.opinion_prob);
                units.push_back({keyword, use_own ? pick(rng, own) : pick(rng, config.lexicon[polarity_index(pol)])});
            }
            weighted += polarity_score(pol) * static_cast<long long>(count);
            mentions += static_cast<long long>(count);
            labels.push_back({config.aspects[k].name, pol});
        }
        rng.shuffle(std::span<std::vector<std::string>>(units));

        const std::size_t target = config.min_len + rng.uniform_index(config.max_len - config.min_len + 1);
        const std::size_t content = 2 * units.size();
        const std::size_t n_fillers = config.fillers.empty() || target <= content ? 0 : target - content;
        // Interleave: each filler lands in one of units.size() + 1 gaps.
        std::vector<std::size_t> gap_fill(units.size() + 1, 0);
        for (std::size_t f = 0; f < n_fillers; ++f) ++gap_fill[rng.uniform_index(gap_fill.size())];

        Review r;
        r.id = "synth-" + std::to_string(i);
        for (std::size_t g = 0; g <= units.size(); ++g) {
            for (std::size_t f = 0; f < gap_fill[g]; ++f) r.words.push_back(pick(rng, config.fillers));
            if (g < units.size()) r.words.insert(r.words.end(), units[g].begin(), units[g].end());
        }

        Polarity overall = Polarity::neutral;
        if (3 * weighted > mentions) overall = Polarity::positive;
        if (3 * weighted < -mentions) overall = Polarity::negative;
        switch (overall) {
            case Polarity::negative: r.stars = 1 + static_cast<int>(rng.uniform_index(2)); break;
            case Polarity::neutral: r.stars = 3; break;
            case Polarity::positive: r.stars = 4 + static_cast<int>(rng.uniform_index(2)); break;
        }
        r.gold_aspects = std::move(labels);
        for (const auto& w : r.words) r.tokens.push_back(corpus.vocab.id(w));
        corpus.reviews.push_back(std::move(r));
    }
    return corpus;
}

AspectSchema synth_schema(const SynthConfig& config) {
    AspectSchema schema;
    for (const auto& a : config.aspects) {
        const std::size_t n = std::min(config.seeds_per_aspect, a.keywords.size());
        schema.aspects.push_back({a.name, {a.keywords.begin(), a.keywords.begin() + static_cast<long>(n)}});
    }
    schema.validate();
    return schema;
}

}  // namespace dspn
