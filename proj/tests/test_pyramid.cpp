#include <doctest.h>

#include <json.hpp>

#include "dspn/errors.hpp"
#include "dspn/pyramid.hpp"
#include "support.hpp"

using namespace dspn;
using testing::random_matrix;
using testing::random_vector;

namespace {

struct Head {
    Tensor w2, b2, w3, b3;
    PyramidHead view() const { return {w2, b2, w3, b3}; }
};

Head random_head(std::size_t dh, std::size_t d, Rng& rng) {
    return {random_matrix(dh, d, rng), random_vector(dh, rng), random_matrix(3, dh, rng), random_vector(3, rng)};
}

Tensor permute_rows(const Tensor& m, const std::vector<std::size_t>& perm) {
    Tensor out = m;
    for (std::size_t i = 0; i < perm.size(); ++i)
        for (std::size_t c = 0; c < m.cols(); ++c) out(i, c) = m(perm[i], c);
    return out;
}

}  // namespace

TEST_CASE("word sentiments") {
    Rng rng(1);
    Tensor h = random_matrix(4, 5, rng);
    Head zero{Tensor::matrix(3, 5), Tensor::vector(3), random_matrix(3, 3, rng), random_vector(3, rng)};
    Tensor w = word_sentiments(h, zero.view());
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t c = 0; c < 3; ++c) CHECK(w(j, c) == zero.b3[c]);

    // W2 h all negative
    Tensor pos = h;
    for (double& v : pos.values()) v = std::abs(v) + 0.1;
    Head clamp{Tensor::matrix(3, 5, -1.0), Tensor::vector(3), random_matrix(3, 3, rng), random_vector(3, rng)};
    Tensor wc = word_sentiments(pos, clamp.view());
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t c = 0; c < 3; ++c) CHECK(wc(j, c) == clamp.b3[c]);

    for (int trial = 0; trial < 30; ++trial) {
        Head hd = random_head(4, 5, rng);
        Tensor hh = random_matrix(1 + rng.uniform_index(6), 5, rng);
        Tensor out = word_sentiments(hh, hd.view());
        auto expect = oracle::word_sent(oracle::mat(hh), oracle::mat(hd.w2), oracle::vec(hd.b2), oracle::mat(hd.w3),
                                        oracle::vec(hd.b3));
        CHECK(oracle::max_abs_diff(oracle::mat(out), expect) < 1e-12);
    }
    CHECK_THROWS_AS(word_sentiments(Tensor::matrix(0, 5), zero.view()), ShapeError);
    CHECK_THROWS_AS(word_sentiments(random_matrix(2, 4, rng), zero.view()), ShapeError);
}

TEST_CASE("attention") {
    Rng rng(2);
    Tensor t = random_matrix(3, 4, rng);
    Tensor one = aspect_attention(random_matrix(1, 4, rng), t);
    for (std::size_t k = 0; k < 3; ++k) CHECK(one(k, 0) == 1.0);

    Tensor same = Tensor::matrix(5, 4);
    Tensor row = random_vector(4, rng);
    for (std::size_t j = 0; j < 5; ++j)
        for (std::size_t c = 0; c < 4; ++c) same(j, c) = row[c];
    Tensor u = aspect_attention(same, t);
    for (double v : u.values()) CHECK(std::abs(v - 0.2) < 1e-15);

    for (int trial = 0; trial < 30; ++trial) {
        Tensor h = random_matrix(1 + rng.uniform_index(6), 4, rng, 2);
        Tensor a = aspect_attention(h, t);
        CHECK(oracle::max_abs_diff(oracle::mat(a), oracle::attention(oracle::mat(h), oracle::mat(t))) < 1e-12);
        for (std::size_t k = 0; k < 3; ++k) CHECK(testing::sums_to_one(a.row(k), 1e-10));
    }
    CHECK_THROWS_AS(aspect_attention(random_matrix(2, 3, rng), t), ShapeError);
}

TEST_CASE("attention is unchanged by a constant shift of one aspect's scores") {
    // Every h_j has a 1 in the last column, so moving T_k along that axis
    // adds the same constant to all of aspect k's scores.
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor h = random_matrix(4, 3, rng);
        for (std::size_t j = 0; j < 4; ++j) h(j, 2) = 1.0;
        Tensor t = random_matrix(2, 3, rng);
        Tensor a = aspect_attention(h, t);
        Tensor t2 = t;
        t2(1, 2) += rng.uniform(-5, 5);
        Tensor b = aspect_attention(h, t2);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
    }
}

TEST_CASE("aspect sentiments") {
    Rng rng(4);
    Tensor w1 = random_matrix(1, 3, rng);
    Tensor a1 = Tensor::matrix(2, 1, 1.0);
    Tensor s1 = aspect_sentiments(w1, a1);
    Tensor expect = softmax(w1.row(0));
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t c = 0; c < 3; ++c) CHECK(s1(k, c) == expect[c]);

    Tensor w = Tensor::matrix(4, 3);
    Tensor logits = random_vector(3, rng);
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t c = 0; c < 3; ++c) w(j, c) = logits[c];
    Tensor attn = aspect_attention(random_matrix(4, 5, rng), random_matrix(3, 5, rng));
    Tensor s = aspect_sentiments(w, attn);
    Tensor sl = softmax(logits.values());
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(s(k, c) - sl[c]) < 1e-12);

    for (int trial = 0; trial < 30; ++trial) {
        std::size_t n = 1 + rng.uniform_index(5);
        Tensor wr = random_matrix(n, 3, rng, 3);
        Tensor ar = aspect_attention(random_matrix(n, 4, rng), random_matrix(3, 4, rng));
        Tensor out = aspect_sentiments(wr, ar);
        CHECK(oracle::max_abs_diff(oracle::mat(out), oracle::aspect_sent(oracle::mat(wr), oracle::mat(ar))) < 1e-12);
    }
    CHECK_THROWS_AS(aspect_sentiments(random_matrix(3, 3, rng), random_matrix(2, 4, rng)), ShapeError);
}

TEST_CASE("review sentiment") {
    Rng rng(5);
    Tensor y = Tensor::matrix(3, 3);
    for (std::size_t k = 0; k < 3; ++k) {
        Tensor row = softmax(random_vector(3, rng).values());
        for (std::size_t c = 0; c < 3; ++c) y(k, c) = row[c];
    }
    Tensor r = review_sentiment(y, std::vector<double>{0, 0, 1});
    Tensor expect = softmax(y.row(2));
    for (std::size_t c = 0; c < 3; ++c) CHECK(r[c] == expect[c]);

    Tensor v = random_vector(3, rng);
    Tensor eq = Tensor::matrix(3, 3);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t c = 0; c < 3; ++c) eq(k, c) = v[c];
    Tensor p = softmax(random_vector(3, rng).values());
    Tensor re = review_sentiment(eq, p.values());
    Tensor sv = softmax(v.values());
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(re[c] - sv[c]) < 1e-12);

    for (int trial = 0; trial < 30; ++trial) {
        Tensor yr = random_matrix(4, 3, rng);
        Tensor pr = softmax(random_vector(4, rng).values());
        Tensor out = review_sentiment(yr, pr.values());
        CHECK(oracle::max_abs_diff(oracle::vec(out), oracle::review_sent(oracle::mat(yr), oracle::vec(pr))) < 1e-12);
    }
    CHECK_THROWS_AS(review_sentiment(y, std::vector<double>{0.5, 0.5}), ShapeError);
}

TEST_CASE("losses") {
    CHECK(rp_loss(std::vector<double>{1e-300, 1e-300, 1.0}, Polarity::positive) == 0.0);
    std::vector<double> uniform(3, 1.0 / 3);
    CHECK(std::abs(rp_loss(uniform, Polarity::neutral) - std::log(3.0)) < 1e-12);
    CHECK(std::abs(rp_loss(uniform, Polarity::neutral) - 1.09861) < 1e-5);
    double l1 = rp_loss(std::vector<double>{std::exp(-0.5), 0.3, 0.1}, Polarity::negative);
    double l2 = rp_loss(std::vector<double>{0.1, std::exp(-0.25), 0.1}, Polarity::neutral);
    CHECK(std::abs(l1 + l2 - 0.75) < 1e-15);

    CHECK(joint_loss(123.0, 0.5, 0.0) == 0.5);
    CHECK(joint_loss(2.0, 0.5, 1.0) == 2.5);
    CHECK(joint_loss(2.0, 0.5, 0.5) == 1.5);
    CHECK_THROWS(joint_loss(1, 1, -1));
}

TEST_CASE("pyramid forward matches the oracle and normalizes") {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 1 + rng.uniform_index(6), big_n = 2 + rng.uniform_index(3), d = 4;
        EncodedReview enc;
        enc.hidden = random_matrix(n, d, rng);
        enc.sentence = Tensor::vector(d);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t c = 0; c < d; ++c) enc.sentence[c] += enc.hidden(j, c) / static_cast<double>(n);
        Tensor w1 = random_matrix(big_n, d, rng), b1 = random_vector(big_n, rng), t = random_matrix(big_n, d, rng);
        Head hd = random_head(3, d, rng);
        PyramidOutput out = pyramid_forward(enc, AspectModel{w1, b1, t}, hd.view(), 1e-4);

        oracle::Params p{oracle::mat(w1), oracle::vec(b1), oracle::mat(t), oracle::mat(hd.w2),
                         oracle::vec(hd.b2), oracle::mat(hd.w3), oracle::vec(hd.b3)};
        oracle::Forward f = oracle::forward(p, oracle::mat(enc.hidden));
        CHECK(oracle::max_abs_diff(oracle::vec(out.importance), f.p) < 1e-12);
        CHECK(oracle::max_abs_diff(oracle::mat(out.word_sentiment), f.words) < 1e-12);
        CHECK(oracle::max_abs_diff(oracle::mat(out.attention), f.attn) < 1e-12);
        CHECK(oracle::max_abs_diff(oracle::mat(out.aspect_sentiment), f.aspects) < 1e-12);
        CHECK(oracle::max_abs_diff(oracle::vec(out.review_sentiment), f.review) < 1e-12);

        CHECK(testing::sums_to_one(out.importance.values(), 1e-10));
        CHECK(testing::sums_to_one(out.review_sentiment.values(), 1e-10));
        for (std::size_t k = 0; k < big_n; ++k) {
            CHECK(testing::sums_to_one(out.attention.row(k), 1e-10));
            CHECK(testing::sums_to_one(out.aspect_sentiment.row(k), 1e-10));
        }
        for (std::size_t k : out.detected) {
            CHECK(k < big_n);
            CHECK(out.importance[k] > 1e-4);
        }
    }
}

TEST_CASE("token and aspect permutations") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 5, big_n = 3, d = 4;
        EncodedReview enc;
        enc.hidden = random_matrix(n, d, rng);
        enc.sentence = random_vector(d, rng);
        Tensor w1 = random_matrix(big_n, d, rng), b1 = random_vector(big_n, rng), t = random_matrix(big_n, d, rng);
        Head hd = random_head(4, d, rng);
        PyramidOutput base = pyramid_forward(enc, AspectModel{w1, b1, t}, hd.view(), 1e-4);

        std::vector<std::size_t> tp = {2, 4, 0, 1, 3};
        EncodedReview penc{enc.sentence, permute_rows(enc.hidden, tp)};
        PyramidOutput pt = pyramid_forward(penc, AspectModel{w1, b1, t}, hd.view(), 1e-4);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t c = 0; c < 3; ++c) CHECK(pt.word_sentiment(j, c) == base.word_sentiment(tp[j], c));
            for (std::size_t k = 0; k < big_n; ++k) CHECK(std::abs(pt.attention(k, j) - base.attention(k, tp[j])) < 1e-12);
        }
        for (std::size_t i = 0; i < base.aspect_sentiment.size(); ++i)
            CHECK(std::abs(pt.aspect_sentiment[i] - base.aspect_sentiment[i]) < 1e-12);
        for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(pt.review_sentiment[c] - base.review_sentiment[c]) < 1e-12);

        std::vector<std::size_t> ap = {1, 2, 0};
        Tensor b1p = b1;
        for (std::size_t k = 0; k < big_n; ++k) b1p[k] = b1[ap[k]];
        PyramidOutput pa = pyramid_forward(enc, AspectModel{permute_rows(w1, ap), b1p, permute_rows(t, ap)}, hd.view(), 1e-4);
        for (std::size_t k = 0; k < big_n; ++k) {
            CHECK(std::abs(pa.importance[k] - base.importance[ap[k]]) < 1e-12);
            for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(pa.attention(k, j) - base.attention(ap[k], j)) < 1e-12);
            for (std::size_t c = 0; c < 3; ++c)
                CHECK(std::abs(pa.aspect_sentiment(k, c) - base.aspect_sentiment(ap[k], c)) < 1e-12);
        }
        for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(pa.review_sentiment[c] - base.review_sentiment[c]) < 1e-12);
    }
}

TEST_CASE("single word with two identical aspects") {
    Rng rng(8);
    EncodedReview enc;
    enc.hidden = random_matrix(1, 3, rng);
    enc.sentence = Tensor::vector(std::vector<double>(enc.hidden.row(0).begin(), enc.hidden.row(0).end()));
    Tensor w1 = random_matrix(2, 3, rng), b1 = random_vector(2, rng), t = random_matrix(2, 3, rng);
    Head hd = random_head(3, 3, rng);
    PyramidOutput out = pyramid_forward(enc, AspectModel{w1, b1, t}, hd.view(), 1e-4);
    Tensor w = word_sentiments(enc.hidden, hd.view());
    Tensor expect = softmax(softmax(w.row(0)).values());
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(out.review_sentiment[c] - expect[c]) < 1e-15);
}

TEST_CASE("inspection json") {
    Rng rng(9);
    EncodedReview enc;
    enc.hidden = random_matrix(2, 3, rng);
    enc.sentence = random_vector(3, rng);
    Tensor w1 = random_matrix(2, 3, rng), b1 = random_vector(2, rng), t = random_matrix(2, 3, rng);
    Head hd = random_head(3, 3, rng);
    PyramidOutput out = pyramid_forward(enc, AspectModel{w1, b1, t}, hd.view(), 1e-4);
    AspectSchema schema;
    schema.aspects = {{"food", {"food"}}, {"service", {"staff"}}};
    auto doc = nlohmann::json::parse(pyramid_output_to_json("r9", out, schema, {"good", "food"}));
    CHECK(doc["id"] == "r9");
    CHECK(doc["p"].size() == 2);
    CHECK(doc["word_sent"].size() == 2);
    CHECK(doc["attention"]["service"].size() == 2);
    CHECK(doc["aspect_sent"]["food"].contains("neu"));
    CHECK(doc["review_sent"].contains("pos"));
    CHECK(doc["predicted_class"].get<std::string>() == polarity_name(out.predicted_class()));
    CHECK(doc["detected"].size() == out.detected.size());
    CHECK_THROWS(pyramid_output_to_json("r9", out, schema, {"one"}));
}
