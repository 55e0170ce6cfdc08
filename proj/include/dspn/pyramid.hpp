#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dspn/acd.hpp"
#include "dspn/corpus.hpp"
#include "dspn/encoder.hpp"
#include "dspn/tensor.hpp"

namespace dspn {

inline constexpr std::string_view kWordHiddenWeightParam = "word_hidden.weight";
inline constexpr std::string_view kWordHiddenBiasParam = "word_hidden.bias";
inline constexpr std::string_view kWordOutputWeightParam = "word_output.weight";
inline constexpr std::string_view kWordOutputBiasParam = "word_output.bias";

// Two-layer word-sentiment network: hidden [dh x d] + [dh], output [3 x dh] + [3].
struct PyramidHead {
    const Tensor& hidden_weight;
    const Tensor& hidden_bias;
    const Tensor& output_weight;
    const Tensor& output_bias;
};

// Per-review predictions at every level of the pyramid.
struct PyramidOutput {
    Tensor importance;      // p [N]
    Tensor word_sentiment;  // [n x 3] logits
    Tensor attention;       // [N x n], rows sum to 1
    Tensor aspect_sentiment;  // [N x 3] probabilities
    Tensor review_sentiment;  // [3] probabilities
    std::vector<std::size_t> detected;

    Polarity predicted_class() const;
    Polarity aspect_polarity(std::size_t aspect) const;
};

// Row j: W3 ReLU(W2 h_j + b2) + b3.
Tensor word_sentiments(const Tensor& hidden, const PyramidHead& head);

// Row k: softmax over tokens of T_k . h_j.
Tensor aspect_attention(const Tensor& hidden, const Tensor& aspects);

// Row k: softmax(sum_j a_kj w_j).
Tensor aspect_sentiments(const Tensor& word_sentiment, const Tensor& attention);

// softmax(Y^T p) with Y the [N x 3] aspect rows.
Tensor review_sentiment(const Tensor& aspect_sentiment, std::span<const double> importance);

// Cross-entropy -log y_gold.
double rp_loss(std::span<const double> review_sentiment, Polarity gold);

// lambda * acd + rp
double joint_loss(double acd_loss_value, double rp_loss_value, double lambda);

PyramidOutput pyramid_forward(const EncodedReview& encoded, const AspectModel& aspects,
                              const PyramidHead& head, double acd_threshold);

// Inspection payload for one review. words may be empty or must match n.
std::string pyramid_output_to_json(const std::string& review_id, const PyramidOutput& out,
                                   const AspectSchema& schema, const std::vector<std::string>& words);

}  // namespace dspn
