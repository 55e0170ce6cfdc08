#include "dspn/model.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "dspn/errors.hpp"

namespace dspn {

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < n; i += workers) fn(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

namespace {

Tensor xavier(std::size_t rows, std::size_t cols, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t = Tensor::matrix(rows, cols);
    for (double& v : t.values()) v = rng.uniform(-bound, bound);
    return t;
}

}  // namespace

Model::Model(Encoder encoder, AspectSchema schema, Vocabulary vocab)
    : encoder_(std::move(encoder)), schema_(std::move(schema)), vocab_(std::move(vocab)) {}

Model::Model(const EncoderConfig& encoder, AspectSchema schema, Vocabulary vocab, ParamSet params,
             std::shared_ptr<const PrecomputedStore> store)
    : encoder_(encoder, std::move(store)), schema_(std::move(schema)), vocab_(std::move(vocab)),
      params_(std::move(params)) {
    validate_shapes();
}

Model Model::initialize(const EncoderConfig& encoder, std::size_t hidden_dim, AspectSchema schema,
                        Vocabulary vocab, std::uint64_t seed, std::shared_ptr<const PrecomputedStore> store,
                        double importance_scale) {
    if (!(importance_scale >= 0.0) || !std::isfinite(importance_scale)) {
        throw ConfigError("importance init scale must be finite and non-negative");
    }
    schema.validate();
    if (hidden_dim == 0) throw ConfigError("hidden size must be positive");
    EncoderConfig enc = encoder;
    if (enc.mode == EncoderMode::trainable) enc.vocab_size = vocab.size();
    Model model(Encoder(enc, std::move(store)), std::move(schema), std::move(vocab));

    Rng rng(derive_seed(seed, 0));
    const std::size_t n_aspects = model.schema_.size();
    const std::size_t dim = enc.dim;
    model.encoder_.init_params(model.params_, rng);
    model.params_.add(std::string(kImportanceWeightParam), xavier(n_aspects, dim, rng));
    model.params_.add(std::string(kImportanceBiasParam), Tensor::vector(n_aspects));
    model.params_.add(std::string(kAspectEmbeddingParam),
                      model.encoder_.init_aspect_matrix(model.schema_, model.params_, model.vocab_));
    if (importance_scale > 0.0) {
        const Tensor& t = model.params_.value(kAspectEmbeddingParam);
        Tensor& w1 = model.params_.value(kImportanceWeightParam);
        for (std::size_t i = 0; i < w1.size(); ++i) w1[i] = importance_scale * t[i];
    }
    model.params_.add(std::string(kWordHiddenWeightParam), xavier(hidden_dim, dim, rng));
    model.params_.add(std::string(kWordHiddenBiasParam), Tensor::vector(hidden_dim));
    model.params_.add(std::string(kWordOutputWeightParam), xavier(kNumClasses, hidden_dim, rng));
    model.params_.add(std::string(kWordOutputBiasParam), Tensor::vector(kNumClasses));
    model.validate_shapes();
    return model;
}

void Model::validate_shapes() const {
    const std::size_t n = schema_.size();
    const std::size_t d = encoder_.config().dim;
    auto expect = [&](std::string_view name, std::size_t rank, std::size_t rows, std::size_t cols) {
        const Tensor& t = params_.value(name);
        if (t.rank() != rank || t.rows() != rows || (rank == 2 && t.cols() != cols)) {
            throw ShapeError("parameter '" + std::string(name) + "' has shape " + t.shape_string());
        }
    };
    if (encoder_.config().mode == EncoderMode::trainable) {
        expect(kEmbeddingParam, 2, vocab_.size(), d);
    }
    expect(kImportanceWeightParam, 2, n, d);
    expect(kImportanceBiasParam, 1, n, 1);
    expect(kAspectEmbeddingParam, 2, n, d);
    const std::size_t h = params_.value(kWordHiddenWeightParam).rows();
    expect(kWordHiddenWeightParam, 2, h, d);
    expect(kWordHiddenBiasParam, 1, h, 1);
    expect(kWordOutputWeightParam, 2, kNumClasses, h);
    expect(kWordOutputBiasParam, 1, kNumClasses, 1);
}

AspectModel Model::aspect_model() const {
    return {params_.value(kImportanceWeightParam), params_.value(kImportanceBiasParam),
            params_.value(kAspectEmbeddingParam)};
}

PyramidHead Model::head() const {
    return {params_.value(kWordHiddenWeightParam), params_.value(kWordHiddenBiasParam),
            params_.value(kWordOutputWeightParam), params_.value(kWordOutputBiasParam)};
}

PyramidOutput Model::forward(const Review& review, double acd_threshold) const {
    return pyramid_forward(encode(review), aspect_model(), head(), acd_threshold);
}

// ------------------------------------------------------------ loss/gradient

namespace {

struct InstanceGrad {
    Tensor importance_weight, importance_bias, aspects;
    Tensor hidden_weight, hidden_bias, output_weight, output_bias;
    SparseRows embedding;
    double hinge = 0.0;
    double rp = 0.0;

    explicit InstanceGrad(const Model& m) {
        auto zero_like = [&](std::string_view name) {
            Tensor t = m.params().value(name);
            t.fill(0.0);
            return t;
        };
        importance_weight = zero_like(kImportanceWeightParam);
        importance_bias = zero_like(kImportanceBiasParam);
        aspects = zero_like(kAspectEmbeddingParam);
        hidden_weight = zero_like(kWordHiddenWeightParam);
        hidden_bias = zero_like(kWordHiddenBiasParam);
        output_weight = zero_like(kWordOutputWeightParam);
        output_bias = zero_like(kWordOutputBiasParam);
    }
};

void add_into(Tensor& target, const Tensor& g) { axpy(1.0, g.values(), target.values()); }

// Forward pass for instance i, plus the backward pass when grad != nullptr.
void run_instance(const Model& model, std::size_t i, std::span<const Review* const> batch,
                  const std::vector<EncodedReview>& encoded, std::span<const Polarity> labels,
                  const std::vector<std::size_t>& negatives, const LossSpec& spec, InstanceGrad& out,
                  bool want_grad) {
    const AspectModel am = model.aspect_model();
    const PyramidHead head = model.head();
    const EncodedReview& enc = encoded[i];
    const auto z = enc.sentence.values();
    const std::size_t n_aspects = am.num_aspects();
    const std::size_t dim = am.dim();

    const Tensor p = aspect_importance(z, am);
    Tensor d_p = Tensor::vector(n_aspects);
    Tensor d_z = Tensor::vector(dim);
    Tensor d_hidden = Tensor::matrix(enc.length(), dim);
    std::map<std::size_t, Tensor> d_negative;

    if (spec.include_acd && !negatives.empty()) {
        const Tensor r = reconstruct(am, p.values());
        Tensor d_r = Tensor::vector(dim);
        for (std::size_t j : negatives) {
            const auto neg = encoded[j].sentence.values();
            const double term = hinge_term(r.values(), z, neg);
            out.hinge += term;
            if (!want_grad || term <= 0.0) continue;
            const double w = spec.acd_weight;
            axpy(w, neg, d_r.values());
            axpy(-w, z, d_r.values());
            axpy(-w, r.values(), d_z.values());
            auto [it, inserted] = d_negative.try_emplace(j, Tensor::vector(dim));
            axpy(w, r.values(), it->second.values());
        }
        if (want_grad) {
            for (std::size_t k = 0; k < n_aspects; ++k) {
                axpy(p[k], d_r.values(), out.aspects.row(k));
                d_p[k] += dot(am.aspects.row(k), d_r.values());
            }
        }
    }

    if (spec.include_rp) {
        const Tensor& hidden = enc.hidden;
        const std::size_t n = hidden.rows();
        const std::size_t hdim = head.hidden_bias.size();

        // Word layer, keeping pre-activations for the backward pass.
        Tensor pre = Tensor::matrix(n, hdim);
        Tensor act = Tensor::matrix(n, hdim);
        Tensor words = Tensor::matrix(n, kNumClasses);
        for (std::size_t j = 0; j < n; ++j) {
            const Tensor pj = affine(head.hidden_weight, hidden.row(j), head.hidden_bias.values());
            const Tensor aj = relu(pj.values());
            const Tensor wj = affine(head.output_weight, aj.values(), head.output_bias.values());
            std::copy(pj.values().begin(), pj.values().end(), pre.row(j).begin());
            std::copy(aj.values().begin(), aj.values().end(), act.row(j).begin());
            std::copy(wj.values().begin(), wj.values().end(), words.row(j).begin());
        }
        const Tensor attn = aspect_attention(hidden, am.aspects);
        const Tensor asent = aspect_sentiments(words, attn);
        const Tensor rsent = review_sentiment(asent, p.values());
        const Polarity gold = labels[i];
        out.rp = rp_loss(rsent.values(), gold);

        if (want_grad) {
            // Cross-entropy through the final softmax.
            Tensor d_mix = rsent;
            d_mix[polarity_index(gold)] -= 1.0;

            Tensor d_words = Tensor::matrix(n, kNumClasses);
            std::vector<double> d_attn_row(n);
            for (std::size_t k = 0; k < n_aspects; ++k) {
                d_p[k] += dot(asent.row(k), d_mix.values());
                std::vector<double> d_q(kNumClasses);
                for (std::size_t c = 0; c < kNumClasses; ++c) d_q[c] = p[k] * d_mix[c];
                const Tensor d_s = softmax_backward(asent.row(k), d_q);
                for (std::size_t j = 0; j < n; ++j) {
                    axpy(attn(k, j), d_s.values(), d_words.row(j));
                    d_attn_row[j] = dot(words.row(j), d_s.values());
                }
                const Tensor d_score = softmax_backward(attn.row(k), d_attn_row);
                for (std::size_t j = 0; j < n; ++j) {
                    axpy(d_score[j], hidden.row(j), out.aspects.row(k));
                    axpy(d_score[j], am.aspects.row(k), d_hidden.row(j));
                }
            }
            std::vector<double> d_act(hdim);
            for (std::size_t j = 0; j < n; ++j) {
                std::fill(d_act.begin(), d_act.end(), 0.0);
                affine_backward(head.output_weight, act.row(j), d_words.row(j), &out.output_weight, d_act,
                                out.output_bias.values());
                const Tensor d_pre = relu_backward(pre.row(j), d_act);
                affine_backward(head.hidden_weight, hidden.row(j), d_pre.values(), &out.hidden_weight,
                                d_hidden.row(j), out.hidden_bias.values());
            }
        }
    }

    if (!want_grad) return;
    const Tensor d_logits = softmax_backward(p.values(), d_p.values());
    affine_backward(am.importance_weight, z, d_logits.values(), &out.importance_weight, d_z.values(),
                    out.importance_bias.values());

    const Encoder& encoder = model.encoder();
    encoder.backward(*batch[i], d_z.values(), spec.include_rp ? &d_hidden : nullptr, out.embedding);
    for (const auto& [j, g] : d_negative) encoder.backward(*batch[j], g.values(), nullptr, out.embedding);
}

std::vector<EncodedReview> encode_batch(const Model& model, std::span<const Review* const> batch,
                                        std::size_t workers) {
    std::vector<EncodedReview> encoded(batch.size());
    parallel_for(batch.size(), workers, [&](std::size_t i) { encoded[i] = model.encode(*batch[i]); });
    return encoded;
}

}  // namespace

BatchLoss evaluate_batch(const Model& model, std::span<const Review* const> batch,
                         std::span<const Polarity> labels, const std::vector<std::vector<std::size_t>>& negatives,
                         const LossSpec& spec, ParamSet* grads, std::size_t workers) {
    if (spec.include_rp && labels.size() != batch.size()) throw ShapeError("evaluate_batch: one label per review required");
    if (spec.include_acd && negatives.size() != batch.size()) {
        throw ShapeError("evaluate_batch: one negative list per review required");
    }
    const std::vector<EncodedReview> encoded = encode_batch(model, batch, workers);

    std::vector<InstanceGrad> per_instance;
    per_instance.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) per_instance.emplace_back(model);
    static const std::vector<std::size_t> kNoNegatives;
    const bool want_grad = grads != nullptr;
    parallel_for(batch.size(), workers, [&](std::size_t i) {
        const auto& negs = spec.include_acd ? negatives[i] : kNoNegatives;
        run_instance(model, i, batch, encoded, labels, negs, spec, per_instance[i], want_grad);
    });

    BatchLoss loss;
    for (const auto& g : per_instance) {
        loss.acd += g.hinge;
        loss.rp += g.rp;
    }
    if (spec.include_acd) loss.acd += spec.lambda_acd * uniqueness_penalty(model.aspect_model().aspects);
    loss.total = (spec.include_acd ? spec.acd_weight * loss.acd : 0.0) + (spec.include_rp ? loss.rp : 0.0);
    if (!std::isfinite(loss.total)) throw NumericError("non-finite batch loss");

    if (want_grad) {
        const bool trainable = model.encoder().config().mode == EncoderMode::trainable;
        for (const auto& g : per_instance) {
            add_into(grads->grad(kImportanceWeightParam), g.importance_weight);
            add_into(grads->grad(kImportanceBiasParam), g.importance_bias);
            add_into(grads->grad(kAspectEmbeddingParam), g.aspects);
            add_into(grads->grad(kWordHiddenWeightParam), g.hidden_weight);
            add_into(grads->grad(kWordHiddenBiasParam), g.hidden_bias);
            add_into(grads->grad(kWordOutputWeightParam), g.output_weight);
            add_into(grads->grad(kWordOutputBiasParam), g.output_bias);
            if (trainable) {
                Tensor& table = grads->grad(kEmbeddingParam);
                for (const auto& [id, row] : g.embedding) axpy(1.0, row, table.row(id));
            }
        }
        if (spec.include_acd) {
            uniqueness_penalty_backward(model.aspect_model().aspects, spec.acd_weight * spec.lambda_acd,
                                        grads->grad(kAspectEmbeddingParam));
        }
    }
    return loss;
}

std::vector<double> batch_kinks(const Model& model, std::span<const Review* const> batch,
                                const std::vector<std::vector<std::size_t>>& negatives, const LossSpec& spec) {
    const std::vector<EncodedReview> encoded = encode_batch(model, batch, 1);
    const AspectModel am = model.aspect_model();
    const PyramidHead head = model.head();
    std::vector<double> kinks;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto z = encoded[i].sentence.values();
        if (spec.include_acd) {
            const Tensor r = reconstruct(am, aspect_importance(z, am).values());
            for (std::size_t j : negatives[i]) {
                kinks.push_back(1.0 - (dot(r.values(), z) - dot(r.values(), encoded[j].sentence.values())));
            }
        }
        if (spec.include_rp) {
            for (std::size_t j = 0; j < encoded[i].length(); ++j) {
                const Tensor pre = affine(head.hidden_weight, encoded[i].hidden.row(j), head.hidden_bias.values());
                kinks.insert(kinks.end(), pre.values().begin(), pre.values().end());
            }
        }
    }
    return kinks;
}

}  // namespace dspn
