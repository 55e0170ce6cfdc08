#include "dspn/gradkernel.hpp"

#include <algorithm>
#include <cmath>

#include "dspn/errors.hpp"

namespace dspn {

namespace {

void require_finite(std::span<const double> v, const char* op) {
    if (!all_finite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
}

}  // namespace

Tensor& ParamSet::add(std::string name, Tensor value) {
    if (contains(name)) throw Error("duplicate parameter '" + name + "'");
    Tensor grad = value;
    grad.fill(0.0);
    entries_.push_back({std::move(name), std::move(value), std::move(grad)});
    return entries_.back().value;
}

bool ParamSet::contains(std::string_view name) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const Entry& e) { return e.name == name; });
}

ParamSet::Entry& ParamSet::find(std::string_view name) {
    for (auto& e : entries_) {
        if (e.name == name) return e;
    }
    throw Error("unknown parameter '" + std::string(name) + "'");
}

const ParamSet::Entry& ParamSet::find(std::string_view name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e;
    }
    throw Error("unknown parameter '" + std::string(name) + "'");
}

Tensor& ParamSet::value(std::string_view name) { return find(name).value; }
const Tensor& ParamSet::value(std::string_view name) const { return find(name).value; }
Tensor& ParamSet::grad(std::string_view name) { return find(name).grad; }
const Tensor& ParamSet::grad(std::string_view name) const { return find(name).grad; }

void ParamSet::zero_grad() {
    for (auto& e : entries_) e.grad.fill(0.0);
}

std::size_t ParamSet::num_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
}

Tensor affine(const Tensor& weight, std::span<const double> x, std::span<const double> bias) {
    if (weight.rank() != 2 || weight.cols() != x.size() || weight.rows() != bias.size()) {
        throw ShapeError("affine: weight " + weight.shape_string() + ", input [" +
                         std::to_string(x.size()) + "], bias [" + std::to_string(bias.size()) + "]");
    }
    Tensor out = Tensor::vector(weight.rows());
    for (std::size_t r = 0; r < weight.rows(); ++r) {
        out[r] = dot(weight.row(r), x) + bias[r];
    }
    require_finite(out.values(), "affine");
    return out;
}

void affine_backward(const Tensor& weight, std::span<const double> x,
                     std::span<const double> upstream, Tensor* d_weight,
                     std::span<double> d_x, std::span<double> d_bias) {
    if (weight.rows() != upstream.size() || weight.cols() != x.size()) {
        throw ShapeError("affine_backward: shape mismatch");
    }
    for (std::size_t r = 0; r < weight.rows(); ++r) {
        const double g = upstream[r];
        if (d_weight != nullptr) axpy(g, x, d_weight->row(r));
        if (!d_x.empty()) axpy(g, weight.row(r), d_x);
        if (!d_bias.empty()) d_bias[r] += g;
    }
}

Tensor softmax(std::span<const double> logits) {
    if (logits.empty()) throw ShapeError("softmax of empty vector");
    const double top = *std::max_element(logits.begin(), logits.end());
    Tensor out = Tensor::vector(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        total += out[i];
    }
    for (double& p : out.values()) p /= total;
    require_finite(out.values(), "softmax");
    return out;
}

Tensor softmax_backward(std::span<const double> probs, std::span<const double> upstream) {
    if (probs.size() != upstream.size()) throw ShapeError("softmax_backward: shape mismatch");
    const double pg = dot(probs, upstream);
    Tensor out = Tensor::vector(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] * (upstream[i] - pg);
    return out;
}

Tensor relu(std::span<const double> v) {
    Tensor out = Tensor::vector(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
    return out;
}

Tensor relu_backward(std::span<const double> pre_activation, std::span<const double> upstream) {
    if (pre_activation.size() != upstream.size()) throw ShapeError("relu_backward: shape mismatch");
    Tensor out = Tensor::vector(upstream.size());
    for (std::size_t i = 0; i < upstream.size(); ++i) {
        out[i] = pre_activation[i] > 0.0 ? upstream[i] : 0.0;
    }
    return out;
}

GradientReport check_gradient(const GradientObjective& objective, ParamSet& params, double h) {
    if (!(h > 0.0)) throw Error("check_gradient: step must be positive");

    auto eval = [&]() {
        const long double f = objective.value(params);
        if (!std::isfinite(f)) throw NumericError("check_gradient: non-finite loss");
        return f;
    };
    eval();

    params.zero_grad();
    objective.gradient(params);

    std::vector<double> base_kinks;
    if (objective.kinks) base_kinks = objective.kinks(params);
    const bool base_near_kink = objective.kinks && [&] {
        for (double k : base_kinks) {
            if (std::abs(k) < 10.0 * h) return true;
        }
        return false;
    }();
    auto near_kink = [&](const std::vector<double>& moved) {
        for (std::size_t i = 0; i < moved.size(); ++i) {
            if (std::abs(moved[i]) < 10.0 * h) return true;
            if ((moved[i] > 0.0) != (base_kinks[i] > 0.0)) return true;
        }
        return false;
    };

    GradientReport report;
    for (auto& entry : params.entries()) {
        for (std::size_t i = 0; i < entry.value.size(); ++i) {
            const double saved = entry.value[i];

            entry.value[i] = saved + h;
            const double up = entry.value[i];
            const long double f_plus = eval();
            bool skip = objective.kinks && near_kink(objective.kinks(params));

            entry.value[i] = saved - h;
            const double down = entry.value[i];
            const long double f_minus = eval();
            skip = skip || (objective.kinks && near_kink(objective.kinks(params)));

            entry.value[i] = saved;
            if (skip || base_near_kink) {
                ++report.skipped;
                continue;
            }

            const double numeric = static_cast<double>((f_plus - f_minus) / (static_cast<long double>(up) - down));
            const double analytic = entry.grad[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            const double rel = std::abs(analytic - numeric) / denom;
            ++report.checked;
            if (rel > report.max_rel_error || report.checked == 1) {
                report.max_rel_error = rel;
                report.worst_param = entry.name;
                report.worst_index = i;
                report.worst_analytic = analytic;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace dspn
