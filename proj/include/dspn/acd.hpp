#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dspn/rng.hpp"
#include "dspn/tensor.hpp"

namespace dspn {

inline constexpr std::string_view kImportanceWeightParam = "aspect_importance.weight";
inline constexpr std::string_view kImportanceBiasParam = "aspect_importance.bias";
inline constexpr std::string_view kAspectEmbeddingParam = "aspect_embedding";

inline constexpr double kDefaultAcdThreshold = 1e-4;

// Aspect-detection parameters: importance projection [N x d], its bias [N]
// and the aspect embedding matrix [N x d].
struct AspectModel {
    const Tensor& importance_weight;
    const Tensor& importance_bias;
    const Tensor& aspects;

    std::size_t num_aspects() const { return aspects.rows(); }
    std::size_t dim() const { return aspects.cols(); }
};

struct NegSampleConfig {
    std::size_t per_instance = 10;
};

// softmax(W z + b)
Tensor aspect_importance(std::span<const double> sentence, const AspectModel& model);

// T^T p: the importance-weighted mix of aspect rows.
Tensor reconstruct(const AspectModel& model, std::span<const double> importance);

// For each of batch_size instances, `per_instance` indices of other batch
// members drawn uniformly with replacement.
std::vector<std::vector<std::size_t>> sample_negatives(std::size_t batch_size, const NegSampleConfig& cfg,
                                                       Rng& rng);

// || Tn Tn^T - I ||_F with Tn the row-normalized aspect matrix.
double uniqueness_penalty(const Tensor& aspects);

// Accumulates scale * dU/dT into d_aspects. U is not differentiable where
// it is exactly zero; the gradient there is taken as zero.
void uniqueness_penalty_backward(const Tensor& aspects, double scale, Tensor& d_aspects);

// max(0, 1 - r.z + r.n)
double hinge_term(std::span<const double> reconstruction, std::span<const double> sentence,
                  std::span<const double> negative);

// Sum of hinge terms over instances and their negatives plus
// lambda_acd * U(T). sentences holds one sentence embedding per instance.
double acd_loss(const std::vector<Tensor>& sentences, const AspectModel& model,
                const std::vector<std::vector<std::size_t>>& negatives, double lambda_acd);

// {k : p_k > threshold}; threshold must lie in [0, 1).
std::vector<std::size_t> detect_aspects(std::span<const double> importance, double threshold);

}  // namespace dspn
