#include "dspn/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "dspn/errors.hpp"
#include "dspn/model.hpp"

namespace dspn {

namespace {

double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double acd_f1(const std::vector<AspectSet>& predicted, const std::vector<AspectSet>& gold) {
    if (predicted.size() != gold.size()) throw Error("acd_f1: prediction and gold lists differ in length");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        for (std::size_t k : predicted[i]) (gold[i].count(k) != 0 ? tp : fp) += 1;
        for (std::size_t k : gold[i]) {
            if (predicted[i].count(k) == 0) ++fn;
        }
    }
    return f1_from_counts(tp, fp, fn);
}

double acd_macro_f1(const std::vector<AspectSet>& predicted, const std::vector<AspectSet>& gold,
                    std::size_t num_aspects) {
    if (predicted.size() != gold.size()) throw Error("acd_macro_f1: prediction and gold lists differ in length");
    if (num_aspects == 0) throw Error("acd_macro_f1: no aspects");
    double total = 0.0;
    for (std::size_t k = 0; k < num_aspects; ++k) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < gold.size(); ++i) {
            const bool p = predicted[i].count(k) != 0;
            const bool g = gold[i].count(k) != 0;
            tp += p && g;
            fp += p && !g;
            fn += !p && g;
        }
        total += f1_from_counts(tp, fp, fn);
    }
    return total / static_cast<double>(num_aspects);
}

double acsa_accuracy(const std::vector<std::vector<std::optional<Polarity>>>& predicted,
                     const std::vector<std::vector<std::optional<Polarity>>>& gold) {
    if (predicted.size() != gold.size()) throw Error("acsa_accuracy: prediction and gold lists differ in length");
    std::size_t total = 0, correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        for (std::size_t k = 0; k < gold[i].size(); ++k) {
            if (!gold[i][k]) continue;
            ++total;
            if (k < predicted[i].size() && predicted[i][k] == gold[i][k]) ++correct;
        }
    }
    if (total == 0) throw Error("acsa_accuracy: no gold aspect annotations to score");
    return static_cast<double>(correct) / static_cast<double>(total);
}

double rp_accuracy(const std::vector<Polarity>& predicted, const std::vector<Polarity>& gold) {
    if (predicted.size() != gold.size()) throw Error("rp_accuracy: prediction and gold lists differ in length");
    if (gold.empty()) throw Error("rp_accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) correct += predicted[i] == gold[i];
    return static_cast<double>(correct) / static_cast<double>(gold.size());
}

Confusion confusion(const std::vector<Polarity>& predicted, const std::vector<Polarity>& gold) {
    if (predicted.size() != gold.size()) throw Error("confusion: prediction and gold lists differ in length");
    if (gold.empty()) throw Error("confusion: empty input");
    Confusion m{};
    for (std::size_t i = 0; i < gold.size(); ++i) ++m[polarity_index(gold[i])][polarity_index(predicted[i])];
    return m;
}

std::optional<Polarity> review_label(const Review& review, LabelSource source) {
    switch (source) {
        case LabelSource::stars:
            if (review.stars) return map_star_to_polarity(*review.stars);
            return std::nullopt;
        case LabelSource::pseudo:
            return review.pseudo_label;
        case LabelSource::derived_from_aspects:
            if (review.gold_aspects && !review.gold_aspects->empty()) return derive_review_label(*review.gold_aspects);
            return std::nullopt;
    }
    return std::nullopt;
}

std::optional<Polarity> review_label_auto(const Review& review) {
    if (auto y = review_label(review, LabelSource::stars)) return y;
    if (auto y = review_label(review, LabelSource::derived_from_aspects)) return y;
    return review_label(review, LabelSource::pseudo);
}

EvalReport evaluate_model(const Model& model, const Corpus& corpus, const EvalOptions& options) {
    const AspectSchema& schema = model.schema();
    const std::size_t n_aspects = schema.size();
    std::vector<PyramidOutput> outputs(corpus.reviews.size());
    parallel_for(corpus.reviews.size(), options.workers, [&](std::size_t i) {
        outputs[i] = model.forward(corpus.reviews[i], options.acd_threshold);
    });

    EvalReport report;
    report.reviews = corpus.reviews.size();
    std::vector<Polarity> rp_pred, rp_gold;
    std::vector<AspectSet> acd_pred, acd_gold;
    std::vector<std::vector<std::optional<Polarity>>> acsa_pred, acsa_gold;
    for (std::size_t i = 0; i < corpus.reviews.size(); ++i) {
        const Review& r = corpus.reviews[i];
        const PyramidOutput& out = outputs[i];
        const auto gold = options.label_source ? review_label(r, *options.label_source) : review_label_auto(r);
        if (gold) {
            rp_gold.push_back(*gold);
            rp_pred.push_back(out.predicted_class());
        }
        if (!r.gold_aspects) continue;
        AspectSet gold_set;
        std::vector<std::optional<Polarity>> gold_pol(n_aspects), pred_pol(n_aspects);
        for (const auto& a : *r.gold_aspects) {
            auto k = schema.index_of(a.name);
            if (!k) throw Error("review '" + r.id + "' annotates unknown aspect '" + a.name + "'");
            gold_set.insert(*k);
            gold_pol[*k] = a.polarity;
        }
        const AspectSet detected(out.detected.begin(), out.detected.end());
        for (std::size_t k = 0; k < n_aspects; ++k) {
            if (options.acsa_on_gold || detected.count(k) != 0) pred_pol[k] = out.aspect_polarity(k);
        }
        acd_gold.push_back(std::move(gold_set));
        acd_pred.push_back(detected);
        acsa_gold.push_back(std::move(gold_pol));
        acsa_pred.push_back(std::move(pred_pol));
    }

    if (!rp_gold.empty()) {
        report.rp_scored = rp_gold.size();
        report.acc_rp = rp_accuracy(rp_pred, rp_gold);
        report.confusion = confusion(rp_pred, rp_gold);
        for (Polarity y : rp_gold) ++report.label_counts[polarity_index(y)];
        report.rp_majority_baseline =
            static_cast<double>(*std::max_element(report.label_counts.begin(), report.label_counts.end())) /
            static_cast<double>(rp_gold.size());
    }
    if (!acd_gold.empty()) {
        report.acd_scored = acd_gold.size();
        report.f1_acd = acd_f1(acd_pred, acd_gold);
        if (options.macro_f1) report.macro_f1_acd = acd_macro_f1(acd_pred, acd_gold, n_aspects);
        std::array<std::size_t, kNumClasses> counts{};
        for (const auto& row : acsa_gold) {
            for (const auto& g : row) {
                if (g) ++counts[polarity_index(*g)];
            }
        }
        report.acsa_pairs = counts[0] + counts[1] + counts[2];
        if (report.acsa_pairs > 0) {
            report.acc_acsa = acsa_accuracy(acsa_pred, acsa_gold);
            report.acsa_majority_baseline = static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
                                            static_cast<double>(report.acsa_pairs);
        }
    }
    return report;
}

std::string format_report(const EvalReport& r) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    auto line = [&](const char* name, const std::optional<double>& v, std::size_t n) {
        os << std::left << std::setw(22) << name;
        if (v) {
            os << *v << "  (n=" << n << ")\n";
        } else {
            os << "n/a\n";
        }
    };
    line("ACD micro-F1", r.f1_acd, r.acd_scored);
    if (r.macro_f1_acd) line("ACD macro-F1", r.macro_f1_acd, r.acd_scored);
    line("ACSA accuracy", r.acc_acsa, r.acsa_pairs);
    line("ACSA majority", r.acsa_majority_baseline, r.acsa_pairs);
    line("RP accuracy", r.acc_rp, r.rp_scored);
    line("RP majority", r.rp_majority_baseline, r.rp_scored);
    if (r.rp_scored > 0) {
        os << "confusion (rows gold, cols predicted: neg neu pos)\n";
        const char* names[] = {"neg", "neu", "pos"};
        for (std::size_t g = 0; g < kNumClasses; ++g) {
            os << "  " << names[g];
            for (std::size_t p = 0; p < kNumClasses; ++p) os << " " << std::setw(7) << std::right << r.confusion[g][p];
            os << std::left << "\n";
        }
    }
    return os.str();
}

std::string report_to_json(const EvalReport& r) {
    using nlohmann::ordered_json;
    auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
    ordered_json doc;
    doc["f1_acd"] = opt(r.f1_acd);
    doc["f1_acd_averaging"] = "micro";
    if (r.macro_f1_acd) doc["macro_f1_acd"] = *r.macro_f1_acd;
    doc["acc_acsa"] = opt(r.acc_acsa);
    doc["acc_rp"] = opt(r.acc_rp);
    doc["confusion"] = r.confusion;
    doc["label_counts"] = {{"neg", r.label_counts[0]}, {"neu", r.label_counts[1]}, {"pos", r.label_counts[2]}};
    doc["reviews"] = r.reviews;
    doc["rp_scored"] = r.rp_scored;
    doc["acd_scored"] = r.acd_scored;
    doc["acsa_pairs"] = r.acsa_pairs;
    doc["acsa_majority_baseline"] = opt(r.acsa_majority_baseline);
    doc["rp_majority_baseline"] = opt(r.rp_majority_baseline);
    return doc.dump();
}

}  // namespace dspn
