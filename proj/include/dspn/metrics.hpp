#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dspn/config.hpp"
#include "dspn/corpus.hpp"

namespace dspn {

class Model;

using AspectSet = std::set<std::size_t>;
using Confusion = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

// Micro-averaged over all (review, aspect) decisions; 0 when there are no
// true positives.
double acd_f1(const std::vector<AspectSet>& predicted, const std::vector<AspectSet>& gold);

// Unweighted mean of per-aspect F1 over aspects [0, num_aspects).
double acd_macro_f1(const std::vector<AspectSet>& predicted, const std::vector<AspectSet>& gold,
                    std::size_t num_aspects);

// predicted[i][k]: predicted polarity of aspect k in review i (nullopt when
// the model offers none). gold[i][k]: nullopt for aspects without a gold
// annotation; those are not scored.
double acsa_accuracy(const std::vector<std::vector<std::optional<Polarity>>>& predicted,
                     const std::vector<std::vector<std::optional<Polarity>>>& gold);

double rp_accuracy(const std::vector<Polarity>& predicted, const std::vector<Polarity>& gold);

// Rows are gold classes, columns predicted classes.
Confusion confusion(const std::vector<Polarity>& predicted, const std::vector<Polarity>& gold);

// Review-level gold label under a label source; nullopt when unavailable.
std::optional<Polarity> review_label(const Review& review, LabelSource source);
// Stars, else aspect-derived, else pseudo label.
std::optional<Polarity> review_label_auto(const Review& review);

struct EvalOptions {
    double acd_threshold = kDefaultAcdThreshold;
    // Score ACSA on gold aspect sets; otherwise only detected aspects carry
    // a prediction and undetected gold aspects count as errors.
    bool acsa_on_gold = true;
    // nullopt: review_label_auto.
    std::optional<LabelSource> label_source;
    bool macro_f1 = false;
    std::size_t workers = 1;
};

struct EvalReport {
    std::size_t reviews = 0;
    std::size_t rp_scored = 0;
    std::size_t acd_scored = 0;
    std::size_t acsa_pairs = 0;
    std::optional<double> f1_acd;
    std::optional<double> macro_f1_acd;
    std::optional<double> acc_acsa;
    std::optional<double> acc_rp;
    Confusion confusion{};
    std::array<std::size_t, kNumClasses> label_counts{};
    // Majority-class accuracy over the scored gold aspect pairs.
    std::optional<double> acsa_majority_baseline;
    std::optional<double> rp_majority_baseline;
};

EvalReport evaluate_model(const Model& model, const Corpus& corpus, const EvalOptions& options);

std::string format_report(const EvalReport& report);
std::string report_to_json(const EvalReport& report);

}  // namespace dspn
