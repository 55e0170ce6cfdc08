#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "dspn/config.hpp"
#include "dspn/gradkernel.hpp"
#include "dspn/model.hpp"

namespace dspn {

// A small random model with a labeled batch and fixed negatives.
struct ToyInstance {
    std::unique_ptr<Model> model;
    Corpus corpus;
    std::vector<Polarity> labels;
    std::vector<std::vector<std::size_t>> negatives;

    std::vector<const Review*> batch() const;
};

// Review lengths in [1, max_tokens], 2..aspects aspects, parameters drawn
// uniformly from [-1, 1] so that both sides of every ReLU are exercised.
ToyInstance make_toy_instance(const GradcheckConfig& config, std::uint64_t seed);

// The batch loss of evaluate_batch recomputed in long double, used as the
// finite-difference reference. Trainable encoder only.
long double extended_batch_loss(const Model& model, std::span<const Review* const> batch,
                                std::span<const Polarity> labels,
                                const std::vector<std::vector<std::size_t>>& negatives, const LossSpec& spec);

GradientObjective joint_objective(const ToyInstance& instance, const LossSpec& spec);

struct GradientSuiteReport {
    std::size_t instances = 0;
    std::size_t resampled = 0;  // draws rejected for sitting on a kink
    std::size_t checked = 0;
    std::size_t skipped = 0;
    double max_rel_error = 0.0;
    std::uint64_t worst_seed = 0;
    GradientReport worst;
};

// Gradient check of the full joint loss over config.instances toy instances.
GradientSuiteReport run_gradient_suite(const GradcheckConfig& config);

}  // namespace dspn
