#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "dspn/acd.hpp"
#include "dspn/corpus.hpp"
#include "dspn/encoder.hpp"
#include "dspn/gradkernel.hpp"
#include "dspn/pyramid.hpp"

namespace dspn {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are
// rethrown on the calling thread.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

// Encoder, aspect detector and pyramid head sharing one ParamSet.
class Model {
public:
    // Fresh parameters: embeddings uniform in [-0.1, 0.1], weight matrices
    // Xavier-uniform, biases zero, aspect rows from the schema seeds.
    // A positive importance_scale replaces W1 with importance_scale * T.
    static Model initialize(const EncoderConfig& encoder, std::size_t hidden_dim, AspectSchema schema,
                            Vocabulary vocab, std::uint64_t seed,
                            std::shared_ptr<const PrecomputedStore> store = nullptr,
                            double importance_scale = 0.0);

    // Wraps existing parameters (e.g. from a checkpoint); shapes are validated.
    Model(const EncoderConfig& encoder, AspectSchema schema, Vocabulary vocab, ParamSet params,
          std::shared_ptr<const PrecomputedStore> store = nullptr);

    const Encoder& encoder() const { return encoder_; }
    const AspectSchema& schema() const { return schema_; }
    const Vocabulary& vocab() const { return vocab_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    std::size_t hidden_dim() const { return params_.value(kWordHiddenWeightParam).rows(); }

    AspectModel aspect_model() const;
    PyramidHead head() const;

    EncodedReview encode(const Review& review) const { return encoder_.encode(review, params_); }
    PyramidOutput forward(const Review& review, double acd_threshold) const;

private:
    Model(Encoder encoder, AspectSchema schema, Vocabulary vocab);
    void validate_shapes() const;

    Encoder encoder_;
    AspectSchema schema_;
    Vocabulary vocab_;
    ParamSet params_;
};

// Which loss terms a batch evaluation includes:
//   total = acd_weight * (sum of hinge terms + lambda_acd * U(T)) + L_RP
// with either term switched off entirely by its flag.
struct LossSpec {
    bool include_acd = true;
    bool include_rp = true;
    double acd_weight = 0.1;
    double lambda_acd = 1.0;
};

struct BatchLoss {
    double total = 0.0;
    double acd = 0.0;  // hinge sum + lambda_acd * U
    double rp = 0.0;
};

// Evaluates the loss on a batch. With `grads` set, the analytic gradient is
// added to grads' accumulators. Per-review gradients are computed
// independently and reduced in batch order, so results do not depend on
// `workers`. labels may be empty when include_rp is false.
BatchLoss evaluate_batch(const Model& model, std::span<const Review* const> batch,
                         std::span<const Polarity> labels, const std::vector<std::vector<std::size_t>>& negatives,
                         const LossSpec& spec, ParamSet* grads, std::size_t workers = 1);

// Arguments of every ReLU and hinge in the batch loss, for gradient checks.
std::vector<double> batch_kinks(const Model& model, std::span<const Review* const> batch,
                                const std::vector<std::vector<std::size_t>>& negatives, const LossSpec& spec);

}  // namespace dspn
