#include "dspn/acd.hpp"

#include <algorithm>
#include <cmath>

#include "dspn/errors.hpp"
#include "dspn/gradkernel.hpp"

namespace dspn {

Tensor aspect_importance(std::span<const double> sentence, const AspectModel& model) {
    return softmax(affine(model.importance_weight, sentence, model.importance_bias.values()).values());
}

Tensor reconstruct(const AspectModel& model, std::span<const double> importance) {
    if (importance.size() != model.num_aspects()) {
        throw ShapeError("reconstruct: importance has " + std::to_string(importance.size()) +
                         " entries for " + std::to_string(model.num_aspects()) + " aspects");
    }
    Tensor r = Tensor::vector(model.dim());
    for (std::size_t k = 0; k < model.num_aspects(); ++k) axpy(importance[k], model.aspects.row(k), r.values());
    return r;
}

std::vector<std::vector<std::size_t>> sample_negatives(std::size_t batch_size, const NegSampleConfig& cfg,
                                                       Rng& rng) {
    std::vector<std::vector<std::size_t>> out(batch_size);
    if (cfg.per_instance == 0) return out;
    if (batch_size < 2) throw Error("negative sampling needs a batch of at least 2 reviews");
    for (std::size_t i = 0; i < batch_size; ++i) {
        out[i].reserve(cfg.per_instance);
        for (std::size_t s = 0; s < cfg.per_instance; ++s) {
            // Draw from the batch_size - 1 other positions.
            std::size_t j = rng.uniform_index(batch_size - 1);
            if (j >= i) ++j;
            out[i].push_back(j);
        }
    }
    return out;
}

namespace {

struct NormalizedRows {
    Tensor rows;
    std::vector<double> norms;
};

NormalizedRows normalize_rows(const Tensor& aspects) {
    NormalizedRows out{aspects, std::vector<double>(aspects.rows())};
    for (std::size_t k = 0; k < aspects.rows(); ++k) {
        const double norm = l2_norm(aspects.row(k));
        if (!(norm > 0.0)) throw NumericError("uniqueness penalty: aspect row " + std::to_string(k) + " is zero");
        out.norms[k] = norm;
        for (double& v : out.rows.row(k)) v /= norm;
    }
    return out;
}

// Tn Tn^T - I
Tensor gram_minus_identity(const Tensor& normalized) {
    const std::size_t n = normalized.rows();
    Tensor g = Tensor::matrix(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            g(a, b) = dot(normalized.row(a), normalized.row(b)) - (a == b ? 1.0 : 0.0);
        }
    }
    return g;
}

}  // namespace

double uniqueness_penalty(const Tensor& aspects) {
    const Tensor g = gram_minus_identity(normalize_rows(aspects).rows);
    return l2_norm(g.values());
}

void uniqueness_penalty_backward(const Tensor& aspects, double scale, Tensor& d_aspects) {
    const NormalizedRows nr = normalize_rows(aspects);
    const Tensor g = gram_minus_identity(nr.rows);
    const double u = l2_norm(g.values());
    if (u == 0.0 || scale == 0.0) return;
    const std::size_t n = aspects.rows();
    const std::size_t d = aspects.cols();
    // dU/dTn = 2 G Tn / U (G symmetric), then through row normalization:
    // dT_k = (dTn_k - (dTn_k . Tn_k) Tn_k) / |T_k|.
    std::vector<double> d_norm(d);
    for (std::size_t k = 0; k < n; ++k) {
        std::fill(d_norm.begin(), d_norm.end(), 0.0);
        for (std::size_t b = 0; b < n; ++b) axpy(2.0 * g(k, b) / u, nr.rows.row(b), d_norm);
        const double proj = dot(d_norm, nr.rows.row(k));
        auto out = d_aspects.row(k);
        auto tn = nr.rows.row(k);
        for (std::size_t c = 0; c < d; ++c) out[c] += scale * (d_norm[c] - proj * tn[c]) / nr.norms[k];
    }
}

double hinge_term(std::span<const double> reconstruction, std::span<const double> sentence,
                  std::span<const double> negative) {
    return std::max(0.0, 1.0 - (dot(reconstruction, sentence) - dot(reconstruction, negative)));
}

double acd_loss(const std::vector<Tensor>& sentences, const AspectModel& model,
                const std::vector<std::vector<std::size_t>>& negatives, double lambda_acd) {
    if (negatives.size() != sentences.size()) throw ShapeError("acd_loss: one negative list per instance required");
    double total = 0.0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const Tensor p = aspect_importance(sentences[i].values(), model);
        const Tensor r = reconstruct(model, p.values());
        for (std::size_t j : negatives[i]) {
            total += hinge_term(r.values(), sentences[i].values(), sentences.at(j).values());
        }
    }
    return total + lambda_acd * uniqueness_penalty(model.aspects);
}

std::vector<std::size_t> detect_aspects(std::span<const double> importance, double threshold) {
    if (!(threshold >= 0.0 && threshold < 1.0)) throw Error("aspect threshold must lie in [0, 1)");
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < importance.size(); ++k) {
        if (importance[k] > threshold) out.push_back(k);
    }
    return out;
}

}  // namespace dspn
