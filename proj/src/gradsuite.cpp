#include "dspn/gradsuite.hpp"

#include <algorithm>
#include <cmath>

#include "dspn/errors.hpp"
#include "dspn/rng.hpp"

namespace dspn {

std::vector<const Review*> ToyInstance::batch() const {
    std::vector<const Review*> out;
    for (const auto& r : corpus.reviews) out.push_back(&r);
    return out;
}

ToyInstance make_toy_instance(const GradcheckConfig& config, std::uint64_t seed) {
    if (config.aspects < 2) throw ConfigError("gradcheck needs at least 2 aspects");
    if (config.reviews < 2) throw ConfigError("gradcheck needs at least 2 reviews per batch");
    if (config.vocab < config.aspects) throw ConfigError("gradcheck vocabulary smaller than aspect count");
    if (config.max_tokens == 0 || config.dim == 0 || config.hidden_dim == 0) {
        throw ConfigError("gradcheck sizes must be positive");
    }
    Rng rng(seed);

    std::vector<std::string> words;
    for (std::size_t i = 0; i < config.vocab; ++i) words.push_back("t" + std::to_string(i));
    ToyInstance inst;
    inst.corpus.vocab = Vocabulary::from_tokens(words, 1);
    inst.corpus.max_len = config.max_tokens;

    const std::size_t num_aspects = 2 + rng.uniform_index(config.aspects - 1);
    AspectSchema schema;
    for (std::size_t k = 0; k < num_aspects; ++k) {
        schema.aspects.push_back({"a" + std::to_string(k), {words[k]}});
    }

    for (std::size_t i = 0; i < config.reviews; ++i) {
        Review r;
        r.id = "toy-" + std::to_string(i);
        const std::size_t n = 1 + rng.uniform_index(config.max_tokens);
        for (std::size_t j = 0; j < n; ++j) {
            r.words.push_back(words[rng.uniform_index(words.size())]);
            r.tokens.push_back(inst.corpus.vocab.id(r.words.back()));
        }
        inst.labels.push_back(polarity_from_index(rng.uniform_index(kNumClasses)));
        inst.corpus.reviews.push_back(std::move(r));
    }

    EncoderConfig enc;
    enc.dim = config.dim;
    enc.max_len = config.max_tokens;
    inst.model = std::make_unique<Model>(Model::initialize(enc, config.hidden_dim, schema, inst.corpus.vocab,
                                                           derive_seed(seed, 0)));
    for (auto& e : inst.model->params().entries()) {
        for (double& v : e.value.values()) v = rng.uniform(-1.0, 1.0);
    }
    inst.negatives = sample_negatives(config.reviews, NegSampleConfig{config.neg_samples}, rng);
    return inst;
}

namespace {

using Vec = std::vector<long double>;
using Mat = std::vector<Vec>;

Mat to_mat(const Tensor& t) {
    Mat m(t.rows(), Vec(t.rank() == 2 ? t.cols() : 1));
    for (std::size_t r = 0; r < m.size(); ++r) {
        for (std::size_t c = 0; c < m[r].size(); ++c) m[r][c] = t.values()[r * m[r].size() + c];
    }
    return m;
}

Vec to_vec(const Tensor& t) { return Vec(t.values().begin(), t.values().end()); }

Vec softmax_l(const Vec& x) {
    long double mx = x[0];
    for (long double v : x) mx = std::max(mx, v);
    Vec out(x.size());
    long double sum = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) sum += out[i] = std::exp(x[i] - mx);
    for (long double& v : out) v /= sum;
    return out;
}

long double dot_l(const Vec& a, const Vec& b) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Vec affine_l(const Mat& w, const Vec& x, const Vec& b) {
    Vec out(w.size());
    for (std::size_t r = 0; r < w.size(); ++r) out[r] = dot_l(w[r], x) + b[r];
    return out;
}

}  // namespace

long double extended_batch_loss(const Model& model, std::span<const Review* const> batch,
                                std::span<const Polarity> labels,
                                const std::vector<std::vector<std::size_t>>& negatives, const LossSpec& spec) {
    const ParamSet& ps = model.params();
    const Mat emb = to_mat(ps.value(kEmbeddingParam));
    const Mat w1 = to_mat(ps.value(kImportanceWeightParam));
    const Vec b1 = to_vec(ps.value(kImportanceBiasParam));
    const Mat t = to_mat(ps.value(kAspectEmbeddingParam));
    const Mat w2 = to_mat(ps.value(kWordHiddenWeightParam));
    const Vec b2 = to_vec(ps.value(kWordHiddenBiasParam));
    const Mat w3 = to_mat(ps.value(kWordOutputWeightParam));
    const Vec b3 = to_vec(ps.value(kWordOutputBiasParam));
    const std::size_t n_aspects = t.size();
    const std::size_t dim = t[0].size();

    std::vector<Mat> hidden(batch.size());
    std::vector<Vec> sentence(batch.size(), Vec(dim, 0.0L));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (TokenId tok : batch[i]->tokens) {
            hidden[i].push_back(emb[tok]);
            for (std::size_t d = 0; d < dim; ++d) sentence[i][d] += emb[tok][d];
        }
        for (long double& v : sentence[i]) v /= static_cast<long double>(hidden[i].size());
    }

    long double acd = 0.0L, rp = 0.0L;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Vec p = softmax_l(affine_l(w1, sentence[i], b1));
        if (spec.include_acd) {
            Vec r(dim, 0.0L);
            for (std::size_t k = 0; k < n_aspects; ++k) {
                for (std::size_t d = 0; d < dim; ++d) r[d] += p[k] * t[k][d];
            }
            for (std::size_t j : negatives[i]) {
                acd += std::max(0.0L, 1.0L - (dot_l(r, sentence[i]) - dot_l(r, sentence[j])));
            }
        }
        if (spec.include_rp) {
            const Mat& h = hidden[i];
            Mat words;
            for (const Vec& hj : h) {
                Vec a = affine_l(w2, hj, b2);
                for (long double& v : a) v = std::max(0.0L, v);
                words.push_back(affine_l(w3, a, b3));
            }
            Vec mix(kNumClasses, 0.0L);
            for (std::size_t k = 0; k < n_aspects; ++k) {
                Vec scores;
                for (const Vec& hj : h) scores.push_back(dot_l(t[k], hj));
                const Vec attn = softmax_l(scores);
                Vec s(kNumClasses, 0.0L);
                for (std::size_t j = 0; j < h.size(); ++j) {
                    for (std::size_t c = 0; c < kNumClasses; ++c) s[c] += attn[j] * words[j][c];
                }
                const Vec q = softmax_l(s);
                for (std::size_t c = 0; c < kNumClasses; ++c) mix[c] += p[k] * q[c];
            }
            rp -= std::log(softmax_l(mix)[polarity_index(labels[i])]);
        }
    }
    if (spec.include_acd) {
        Mat tn = t;
        for (Vec& row : tn) {
            const long double norm = std::sqrt(dot_l(row, row));
            for (long double& v : row) v /= norm;
        }
        long double sq = 0.0L;
        for (std::size_t a = 0; a < n_aspects; ++a) {
            for (std::size_t b = 0; b < n_aspects; ++b) {
                const long double g = dot_l(tn[a], tn[b]) - (a == b ? 1.0L : 0.0L);
                sq += g * g;
            }
        }
        acd += static_cast<long double>(spec.lambda_acd) * std::sqrt(sq);
    }
    return (spec.include_acd ? static_cast<long double>(spec.acd_weight) * acd : 0.0L) +
           (spec.include_rp ? rp : 0.0L);
}

GradientObjective joint_objective(const ToyInstance& inst, const LossSpec& spec) {
    const Model& model = *inst.model;
    auto batch = std::make_shared<std::vector<const Review*>>(inst.batch());
    GradientObjective obj;
    obj.value = [&model, &inst, spec, batch](const ParamSet&) {
        return extended_batch_loss(model, *batch, inst.labels, inst.negatives, spec);
    };
    obj.gradient = [&model, &inst, spec, batch](ParamSet& params) {
        evaluate_batch(model, *batch, inst.labels, inst.negatives, spec, &params);
    };
    obj.kinks = [&model, &inst, spec, batch](const ParamSet&) {
        return batch_kinks(model, *batch, inst.negatives, spec);
    };
    return obj;
}

GradientSuiteReport run_gradient_suite(const GradcheckConfig& config) {
    LossSpec spec;
    spec.acd_weight = config.lambda;
    spec.lambda_acd = config.lambda_acd;
    const double margin = 10.0 * config.step;

    GradientSuiteReport report;
    std::uint64_t draw = 0;
    while (report.instances < config.instances) {
        const std::uint64_t seed = derive_seed(config.seed, draw++);
        ToyInstance inst = make_toy_instance(config, seed);
        bool on_kink = false;
        for (double k : batch_kinks(*inst.model, inst.batch(), inst.negatives, spec)) {
            if (std::abs(k) < margin) on_kink = true;
        }
        if (on_kink) {
            ++report.resampled;
            continue;
        }
        GradientReport r = check_gradient(joint_objective(inst, spec), inst.model->params(), config.step);
        ++report.instances;
        report.checked += r.checked;
        report.skipped += r.skipped;
        if (report.instances == 1 || r.max_rel_error > report.max_rel_error) {
            report.max_rel_error = r.max_rel_error;
            report.worst_seed = seed;
            report.worst = r;
        }
    }
    return report;
}

}  // namespace dspn
