#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "dspn/checkpoint.hpp"
#include "dspn/config.hpp"
#include "dspn/corpus.hpp"
#include "dspn/metrics.hpp"
#include "dspn/model.hpp"

namespace dspn {

// First-order update rule over every parameter in a ParamSet.
class Optimizer {
public:
    Optimizer(const TrainConfig& config, const ParamSet& params);
    void step(ParamSet& params);

private:
    OptimizerKind kind_;
    double lr_, beta1_, beta2_, epsilon_;
    std::size_t t_ = 0;
    std::vector<Tensor> first_moment_;
    std::vector<Tensor> second_moment_;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based, pretraining epochs included
    bool pretrain = false;
    double loss_total = 0.0;
    double loss_acd = 0.0;
    double loss_rp = 0.0;
    EvalReport validation;
};

struct TrainResult {
    Checkpoint checkpoint;  // best validation RP accuracy over joint epochs
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
};

struct TrainOptions {
    // Drop the ACD term from the joint epochs entirely (pure rating model).
    bool rp_only = false;
    std::function<void(const EpochRecord&)> on_epoch;
};

// Review-level training labels; throws naming the first review lacking one.
std::vector<Polarity> training_labels(const Corpus& corpus, LabelSource source);

// Seeded split of a corpus into (train, validation) with `fraction` held out.
std::pair<Corpus, Corpus> split_validation(const Corpus& corpus, double fraction, std::uint64_t seed);

// Optional ACD-only epochs, then joint epochs on lambda * L_ACD + L_RP.
// Batches follow a seeded shuffle per epoch; a trailing single-review batch
// is folded into the previous one so negatives can always be drawn.
TrainResult train(const Corpus& train_corpus, const Corpus& validation, const AspectSchema& schema,
                  const ModelConfig& model_config, const TrainConfig& config,
                  std::shared_ptr<const PrecomputedStore> store = nullptr, const TrainOptions& options = {});

// Batch boundaries used by train() for n reviews.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size);

}  // namespace dspn
