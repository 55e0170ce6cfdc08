#include <doctest.h>

#include <json.hpp>

#include "dspn/gradsuite.hpp"
#include "dspn/metrics.hpp"
#include "support.hpp"

using namespace dspn;

namespace {

using P = Polarity;
using Opt = std::optional<Polarity>;

std::vector<AspectSet> random_sets(std::size_t n, std::size_t aspects, Rng& rng, bool nonempty) {
    std::vector<AspectSet> out(n);
    for (auto& s : out) {
        for (std::size_t k = 0; k < aspects; ++k) if (rng.bernoulli(0.4)) s.insert(k);
        if (nonempty && s.empty()) s.insert(rng.uniform_index(aspects));
    }
    return out;
}

// Counts decisions pair by pair.
double tally_f1(const std::vector<AspectSet>& pred, const std::vector<AspectSet>& gold, std::size_t aspects) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (std::size_t k = 0; k < aspects; ++k) {
            bool p = pred[i].count(k) > 0, g = gold[i].count(k) > 0;
            tp += p && g;
            fp += p && !g;
            fn += !p && g;
        }
    }
    return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

}  // namespace

TEST_CASE("acd f1") {
    std::vector<AspectSet> gold = {{0, 1}, {0}};
    CHECK(acd_f1(gold, gold) == 1.0);
    CHECK(acd_f1({{2}, {1}}, gold) == 0.0);
    std::vector<AspectSet> pred = {{0}, {0, 1}};
    CHECK(std::abs(acd_f1(pred, gold) - 2.0 / 3.0) < 1e-15);
    CHECK_THROWS(acd_f1({{0}}, gold));
}

TEST_CASE("acd f1 properties") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 1 + rng.uniform_index(10);
        auto gold = random_sets(n, 4, rng, true);
        auto pred = random_sets(n, 4, rng, false);
        double f = acd_f1(pred, gold);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
        CHECK(std::abs(f - tally_f1(pred, gold, 4)) < 1e-15);
        CHECK((f == 1.0) == (pred == gold));
        CHECK(acd_f1(gold, gold) == 1.0);

        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(std::span<std::size_t>(order));
        std::vector<AspectSet> pp, gg;
        for (std::size_t i : order) {
            pp.push_back(pred[i]);
            gg.push_back(gold[i]);
        }
        CHECK(std::abs(acd_f1(pp, gg) - f) < 1e-15);
        double macro = acd_macro_f1(pred, gold, 4);
        CHECK(macro >= 0.0);
        CHECK(macro <= 1.0);
    }
}

TEST_CASE("acsa accuracy") {
    std::vector<std::vector<Opt>> gold = {{P::positive, P::negative}, {P::neutral, P::positive}};
    CHECK(acsa_accuracy(gold, gold) == 1.0);
    std::vector<std::vector<Opt>> pred = {{P::positive, P::negative}, {P::neutral, P::negative}};
    CHECK(acsa_accuracy(pred, gold) == 0.75);

    std::vector<std::vector<Opt>> sparse_gold = {{P::positive, std::nullopt, std::nullopt},
                                                 {std::nullopt, P::negative, std::nullopt}};
    std::vector<std::vector<Opt>> sparse_pred = {{P::positive, P::positive, P::neutral},
                                                 {P::negative, P::negative, std::nullopt}};
    CHECK(acsa_accuracy(sparse_pred, sparse_gold) == 1.0);

    std::vector<std::vector<Opt>> missing = {{std::nullopt, P::negative}, {P::neutral, P::positive}};
    CHECK(acsa_accuracy(missing, gold) == 0.75);

    std::vector<std::vector<Opt>> none = {{std::nullopt, std::nullopt}};
    CHECK_THROWS(acsa_accuracy(none, none));
}

TEST_CASE("rp accuracy and confusion") {
    std::vector<P> g = {P::negative, P::neutral, P::positive, P::positive};
    CHECK(rp_accuracy(g, g) == 1.0);
    Confusion c = confusion(g, g);
    CHECK(c[0][0] == 1);
    CHECK(c[2][2] == 2);
    CHECK(c[0][1] + c[0][2] + c[1][0] + c[1][2] + c[2][0] + c[2][1] == 0);

    std::vector<P> bal = {P::negative, P::neutral, P::positive, P::negative, P::neutral, P::positive};
    std::vector<P> constant(6, P::neutral);
    CHECK(std::abs(rp_accuracy(constant, bal) - 1.0 / 3) < 1e-15);
    CHECK_THROWS(rp_accuracy({}, {}));
    CHECK_THROWS(rp_accuracy({P::neutral}, g));

    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<P> pred, gold;
        std::size_t n = 20;
        std::size_t hits = 0;
        std::size_t table[3][3] = {};
        for (std::size_t i = 0; i < n; ++i) {
            pred.push_back(polarity_from_index(rng.uniform_index(3)));
            gold.push_back(polarity_from_index(rng.uniform_index(3)));
            hits += pred.back() == gold.back();
            table[polarity_index(gold.back())][polarity_index(pred.back())]++;
        }
        double acc = rp_accuracy(pred, gold);
        CHECK(acc == static_cast<double>(hits) / n);
        Confusion cm = confusion(pred, gold);
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) CHECK(cm[a][b] == table[a][b]);
        CHECK(static_cast<double>(cm[0][0] + cm[1][1] + cm[2][2]) / n == acc);
    }
}

TEST_CASE("review labels by source") {
    Review r;
    r.stars = 2;
    r.gold_aspects = std::vector<AspectLabel>{{"a", P::positive}, {"b", P::positive}};
    CHECK(review_label(r, LabelSource::stars) == P::negative);
    CHECK(review_label(r, LabelSource::derived_from_aspects) == P::positive);
    CHECK_FALSE(review_label(r, LabelSource::pseudo).has_value());
    CHECK(review_label_auto(r) == P::negative);
    r.stars.reset();
    CHECK(review_label_auto(r) == P::positive);
    r.gold_aspects.reset();
    r.pseudo_label = P::neutral;
    CHECK(review_label_auto(r) == P::neutral);
}

TEST_CASE("model evaluation") {
    ToyInstance inst = make_toy_instance(GradcheckConfig{}, 8);
    Corpus corpus = inst.corpus;
    const auto names = inst.model->schema().names();
    for (std::size_t i = 0; i < corpus.reviews.size(); ++i) {
        corpus.reviews[i].stars = 1 + static_cast<int>(i % 5);
        corpus.reviews[i].gold_aspects = std::vector<AspectLabel>{{names[i % names.size()], P::negative}};
    }
    EvalOptions opt;
    EvalReport rep = evaluate_model(*inst.model, corpus, opt);
    CHECK(rep.reviews == corpus.reviews.size());
    CHECK(rep.rp_scored == corpus.reviews.size());
    CHECK(rep.acsa_pairs == corpus.reviews.size());
    REQUIRE(rep.acc_rp.has_value());
    REQUIRE(rep.f1_acd.has_value());
    REQUIRE(rep.acc_acsa.has_value());
    CHECK(*rep.acsa_majority_baseline == 1.0);

    std::vector<P> pred, gold;
    std::vector<AspectSet> dp, dg;
    for (const Review& r : corpus.reviews) {
        PyramidOutput out = inst.model->forward(r, opt.acd_threshold);
        pred.push_back(out.predicted_class());
        gold.push_back(map_star_to_polarity(*r.stars));
        dp.emplace_back(out.detected.begin(), out.detected.end());
        dg.push_back({*inst.model->schema().index_of((*r.gold_aspects)[0].name)});
    }
    CHECK(*rep.acc_rp == rp_accuracy(pred, gold));
    CHECK(*rep.f1_acd == acd_f1(dp, dg));
    CHECK(rep.confusion == confusion(pred, gold));

    opt.workers = 3;
    EvalReport rep3 = evaluate_model(*inst.model, corpus, opt);
    CHECK(report_to_json(rep3) == report_to_json(rep));
    auto doc = nlohmann::json::parse(report_to_json(rep));
    CHECK(doc.contains("acc_rp"));
    CHECK(format_report(rep).find("RP accuracy") != std::string::npos);

    Corpus unlabeled = inst.corpus;
    EvalReport bare = evaluate_model(*inst.model, unlabeled, EvalOptions{});
    CHECK_FALSE(bare.acc_rp.has_value());
    CHECK_FALSE(bare.f1_acd.has_value());
}
