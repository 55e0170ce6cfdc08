#include "dspn/trainer.hpp"

#include <cmath>
#include <numeric>

#include "dspn/errors.hpp"
#include "dspn/rng.hpp"

namespace dspn {

namespace {

enum Stream : std::uint64_t { kShuffleStream = 1, kNegativeStream = 2, kSplitStream = 3 };

}  // namespace

Optimizer::Optimizer(const TrainConfig& config, const ParamSet& params)
    : kind_(config.optimizer),
      lr_(config.learning_rate),
      beta1_(config.adam_beta1),
      beta2_(config.adam_beta2),
      epsilon_(config.adam_epsilon) {
    if (kind_ == OptimizerKind::adam) {
        for (const auto& e : params.entries()) {
            Tensor zero = e.value;
            zero.fill(0.0);
            first_moment_.push_back(zero);
            second_moment_.push_back(std::move(zero));
        }
    }
}

void Optimizer::step(ParamSet& params) {
    auto& entries = params.entries();
    if (kind_ == OptimizerKind::sgd) {
        for (auto& e : entries) axpy(-lr_, e.grad.values(), e.value.values());
        return;
    }
    ++t_;
    const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t p = 0; p < entries.size(); ++p) {
        auto value = entries[p].value.values();
        auto grad = entries[p].grad.values();
        auto m = first_moment_[p].values();
        auto v = second_moment_[p].values();
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            value[i] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
        }
    }
}

std::vector<Polarity> training_labels(const Corpus& corpus, LabelSource source) {
    std::vector<Polarity> labels;
    labels.reserve(corpus.reviews.size());
    for (const auto& r : corpus.reviews) {
        auto y = review_label(r, source);
        if (!y) {
            throw Error("review '" + r.id + "' has no label for label_source=" +
                        std::string(label_source_name(source)));
        }
        labels.push_back(*y);
    }
    return labels;
}

std::pair<Corpus, Corpus> split_validation(const Corpus& corpus, double fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(corpus.reviews.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, kSplitStream));
    rng.shuffle(std::span<std::size_t>(order));
    const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(order.size())));
    std::vector<bool> is_val(order.size(), false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;

    Corpus train_part, val_part;
    train_part.vocab = val_part.vocab = corpus.vocab;
    train_part.max_len = val_part.max_len = corpus.max_len;
    for (std::size_t i = 0; i < corpus.reviews.size(); ++i) {
        (is_val[i] ? val_part : train_part).reviews.push_back(corpus.reviews[i]);
    }
    return {std::move(train_part), std::move(val_part)};
}

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t begin = 0; begin < n; begin += batch_size) {
        ranges.emplace_back(begin, std::min(n, begin + batch_size));
    }
    if (ranges.size() >= 2 && ranges.back().second - ranges.back().first == 1) {
        ranges.pop_back();
        ranges.back().second = n;
    }
    return ranges;
}

TrainResult train(const Corpus& train_corpus, const Corpus& validation, const AspectSchema& schema,
                  const ModelConfig& model_config, const TrainConfig& config,
                  std::shared_ptr<const PrecomputedStore> store, const TrainOptions& options) {
    config.validate();
    if (train_corpus.reviews.empty()) throw Error("training corpus is empty");
    if (validation.reviews.empty()) throw Error("validation split is empty");
    const std::vector<Polarity> labels = training_labels(train_corpus, config.label_source);
    training_labels(validation, config.label_source);

    EncoderConfig enc;
    enc.mode = model_config.encoder_mode;
    enc.dim = model_config.dim;
    enc.max_len = model_config.max_len;
    Model model = Model::initialize(enc, model_config.effective_hidden_dim(), schema, train_corpus.vocab,
                                    config.seed, std::move(store), model_config.importance_init_scale);
    Optimizer optimizer(config, model.params());

    Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
    Rng negative_rng(derive_seed(config.seed, kNegativeStream));
    const NegSampleConfig neg_cfg{config.neg_samples};

    EvalOptions eval_options;
    eval_options.acd_threshold = model_config.acd_threshold;
    eval_options.label_source = config.label_source;
    eval_options.workers = config.workers;

    TrainResult result;
    std::optional<double> best_accuracy;
    std::vector<std::size_t> order(train_corpus.reviews.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t total_epochs = config.acd_pretrain_epochs + config.epochs;
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= total_epochs; ++epoch) {
        const bool pretrain = epoch <= config.acd_pretrain_epochs;
        LossSpec spec;
        spec.lambda_acd = config.lambda_acd;
        if (pretrain) {
            spec.include_rp = false;
            spec.acd_weight = 1.0;
        } else {
            spec.include_acd = !options.rp_only;
            spec.acd_weight = config.lambda;
        }

        shuffle_rng.shuffle(std::span<std::size_t>(order));
        EpochRecord record;
        record.epoch = epoch;
        record.pretrain = pretrain;
        for (const auto& [begin, end] : batch_ranges(order.size(), config.batch_size)) {
            ++step;
            std::vector<const Review*> batch;
            std::vector<Polarity> batch_labels;
            for (std::size_t b = begin; b < end; ++b) {
                batch.push_back(&train_corpus.reviews[order[b]]);
                batch_labels.push_back(labels[order[b]]);
            }
            std::vector<std::vector<std::size_t>> negatives;
            if (spec.include_acd) negatives = sample_negatives(batch.size(), neg_cfg, negative_rng);

            model.params().zero_grad();
            BatchLoss loss;
            try {
                loss = evaluate_batch(model, batch, batch_labels, negatives, spec, &model.params(), config.workers);
            } catch (const NumericError& e) {
                throw NumericError("training diverged at step " + std::to_string(step) + " (epoch " +
                                   std::to_string(epoch) + "): " + e.what());
            }
            optimizer.step(model.params());
            for (const auto& e : model.params().entries()) {
                if (!e.value.all_finite()) {
                    throw NumericError("training diverged at step " + std::to_string(step) + ": parameter '" +
                                       e.name + "' is non-finite");
                }
            }
            record.loss_total += loss.total;
            record.loss_acd += loss.acd;
            record.loss_rp += loss.rp;
        }

        record.validation = evaluate_model(model, validation, eval_options);
        if (!pretrain) {
            const double accuracy = record.validation.acc_rp.value_or(0.0);
            if (!best_accuracy || accuracy > *best_accuracy) {
                best_accuracy = accuracy;
                result.best_epoch = epoch;
                result.checkpoint = make_checkpoint(model, model_config, config);
                result.checkpoint.epoch = epoch;
                result.checkpoint.loss_total = record.loss_total;
                result.checkpoint.loss_acd = record.loss_acd;
                result.checkpoint.loss_rp = record.loss_rp;
            }
        }
        if (options.on_epoch) options.on_epoch(record);
        result.history.push_back(std::move(record));
    }
    return result;
}

}  // namespace dspn
