#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dspn/tensor.hpp"

namespace dspn {

// Named parameters with gradient accumulators of identical shape.
// Entries keep insertion order, which fixes the checkpoint layout.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
    };

    Tensor& add(std::string name, Tensor value);

    bool contains(std::string_view name) const;
    Tensor& value(std::string_view name);
    const Tensor& value(std::string_view name) const;
    Tensor& grad(std::string_view name);
    const Tensor& grad(std::string_view name) const;

    void zero_grad();
    std::size_t num_scalars() const;

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

private:
    Entry& find(std::string_view name);
    const Entry& find(std::string_view name) const;

    std::vector<Entry> entries_;
};

// W x + bias.
Tensor affine(const Tensor& weight, std::span<const double> x, std::span<const double> bias);

// Accumulates g x^T into d_weight, W^T g into d_x and g into d_bias.
// Pass nullptr / an empty span to skip an output.
void affine_backward(const Tensor& weight, std::span<const double> x,
                     std::span<const double> upstream, Tensor* d_weight,
                     std::span<double> d_x, std::span<double> d_bias);

Tensor softmax(std::span<const double> logits);

// Vector-Jacobian product of softmax given its output: p * (g - p.g).
Tensor softmax_backward(std::span<const double> probs, std::span<const double> upstream);

Tensor relu(std::span<const double> v);

// Subgradient at exactly zero is zero.
Tensor relu_backward(std::span<const double> pre_activation, std::span<const double> upstream);

// A scalar objective over a ParamSet, for finite-difference verification.
struct GradientObjective {
    // Returned in extended precision so that f(x+h) - f(x-h) keeps its low
    // bits for coordinates with very small gradients.
    std::function<long double(const ParamSet&)> value;
    // Writes the analytic gradient into the grad accumulators (already zeroed).
    std::function<void(ParamSet&)> gradient;
    // Optional: arguments of every non-smooth point (ReLU pre-activations,
    // hinge arguments). Coordinates whose perturbation lands within 10h of a
    // kink, or crosses one, are skipped.
    std::function<std::vector<double>(const ParamSet&)> kinks;
};

struct GradientReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
};

// Compares analytic gradients against central differences
// (f(x+h) - f(x-h)) / 2h on every coordinate. Relative error uses the
// denominator max(|analytic|, |numeric|, 1e-8). Parameter values are
// restored on return.
GradientReport check_gradient(const GradientObjective& objective, ParamSet& params, double h);

}  // namespace dspn
