#include "dspn/pyramid.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "dspn/errors.hpp"
#include "dspn/gradkernel.hpp"

namespace dspn {

namespace {

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

Polarity PyramidOutput::predicted_class() const { return polarity_from_index(argmax(review_sentiment.values())); }

Polarity PyramidOutput::aspect_polarity(std::size_t aspect) const {
    return polarity_from_index(argmax(aspect_sentiment.row(aspect)));
}

Tensor word_sentiments(const Tensor& hidden, const PyramidHead& head) {
    if (hidden.rows() == 0) throw ShapeError("word_sentiments: review has no tokens");
    if (head.output_weight.rows() != kNumClasses) throw ShapeError("word_sentiments: output layer must have 3 rows");
    Tensor out = Tensor::matrix(hidden.rows(), kNumClasses);
    for (std::size_t j = 0; j < hidden.rows(); ++j) {
        const Tensor pre = affine(head.hidden_weight, hidden.row(j), head.hidden_bias.values());
        const Tensor act = relu(pre.values());
        const Tensor logits = affine(head.output_weight, act.values(), head.output_bias.values());
        std::copy(logits.values().begin(), logits.values().end(), out.row(j).begin());
    }
    return out;
}

Tensor aspect_attention(const Tensor& hidden, const Tensor& aspects) {
    if (hidden.cols() != aspects.cols()) {
        throw ShapeError("aspect_attention: hidden " + hidden.shape_string() + " vs aspects " +
                         aspects.shape_string());
    }
    if (hidden.rows() == 0) throw ShapeError("aspect_attention: review has no tokens");
    const std::size_t n = hidden.rows();
    Tensor attn = Tensor::matrix(aspects.rows(), n);
    std::vector<double> scores(n);
    for (std::size_t k = 0; k < aspects.rows(); ++k) {
        for (std::size_t j = 0; j < n; ++j) scores[j] = dot(aspects.row(k), hidden.row(j));
        const Tensor row = softmax(scores);
        std::copy(row.values().begin(), row.values().end(), attn.row(k).begin());
    }
    return attn;
}

Tensor aspect_sentiments(const Tensor& word_sentiment, const Tensor& attention) {
    if (attention.cols() != word_sentiment.rows() || word_sentiment.cols() != kNumClasses) {
        throw ShapeError("aspect_sentiments: attention " + attention.shape_string() + " vs word sentiment " +
                         word_sentiment.shape_string());
    }
    Tensor out = Tensor::matrix(attention.rows(), kNumClasses);
    std::vector<double> mixed(kNumClasses);
    for (std::size_t k = 0; k < attention.rows(); ++k) {
        std::fill(mixed.begin(), mixed.end(), 0.0);
        for (std::size_t j = 0; j < attention.cols(); ++j) axpy(attention(k, j), word_sentiment.row(j), mixed);
        const Tensor row = softmax(mixed);
        std::copy(row.values().begin(), row.values().end(), out.row(k).begin());
    }
    return out;
}

Tensor review_sentiment(const Tensor& aspect_sentiment, std::span<const double> importance) {
    if (aspect_sentiment.rows() != importance.size() || aspect_sentiment.cols() != kNumClasses) {
        throw ShapeError("review_sentiment: aspect rows " + aspect_sentiment.shape_string() + " vs importance [" +
                         std::to_string(importance.size()) + "]");
    }
    std::vector<double> mixed(kNumClasses, 0.0);
    for (std::size_t k = 0; k < importance.size(); ++k) axpy(importance[k], aspect_sentiment.row(k), mixed);
    return softmax(mixed);
}

double rp_loss(std::span<const double> review_sentiment, Polarity gold) {
    return -std::log(review_sentiment[polarity_index(gold)]);
}

double joint_loss(double acd_loss_value, double rp_loss_value, double lambda) {
    if (lambda < 0.0) throw Error("joint loss weight must be non-negative");
    return lambda * acd_loss_value + rp_loss_value;
}

PyramidOutput pyramid_forward(const EncodedReview& encoded, const AspectModel& aspects,
                              const PyramidHead& head, double acd_threshold) {
    PyramidOutput out;
    out.importance = aspect_importance(encoded.sentence.values(), aspects);
    out.word_sentiment = word_sentiments(encoded.hidden, head);
    out.attention = aspect_attention(encoded.hidden, aspects.aspects);
    out.aspect_sentiment = aspect_sentiments(out.word_sentiment, out.attention);
    out.review_sentiment = review_sentiment(out.aspect_sentiment, out.importance.values());
    out.detected = detect_aspects(out.importance.values(), acd_threshold);
    return out;
}

std::string pyramid_output_to_json(const std::string& review_id, const PyramidOutput& out,
                                   const AspectSchema& schema, const std::vector<std::string>& words) {
    using nlohmann::ordered_json;
    if (!words.empty() && words.size() != out.word_sentiment.rows()) {
        throw ShapeError("inspection: " + std::to_string(words.size()) + " words for " +
                         std::to_string(out.word_sentiment.rows()) + " tokens");
    }
    auto distribution = [](std::span<const double> v) {
        return ordered_json{{"neg", v[0]}, {"neu", v[1]}, {"pos", v[2]}};
    };
    ordered_json doc;
    doc["id"] = review_id;
    if (!words.empty() && words.size() == out.word_sentiment.rows()) doc["tokens"] = words;
    doc["p"] = std::vector<double>(out.importance.values().begin(), out.importance.values().end());
    doc["detected"] = ordered_json::array();
    for (std::size_t k : out.detected) doc["detected"].push_back(schema.aspects.at(k).name);
    doc["word_sent"] = ordered_json::array();
    for (std::size_t j = 0; j < out.word_sentiment.rows(); ++j) {
        auto row = out.word_sentiment.row(j);
        doc["word_sent"].push_back(std::vector<double>(row.begin(), row.end()));
    }
    doc["attention"] = ordered_json::object();
    doc["aspect_sent"] = ordered_json::object();
    for (std::size_t k = 0; k < schema.size(); ++k) {
        auto attn = out.attention.row(k);
        doc["attention"][schema.aspects[k].name] = std::vector<double>(attn.begin(), attn.end());
        doc["aspect_sent"][schema.aspects[k].name] = distribution(out.aspect_sentiment.row(k));
    }
    doc["review_sent"] = distribution(out.review_sentiment.values());
    doc["predicted_class"] = polarity_name(out.predicted_class());
    return doc.dump();
}

}  // namespace dspn
