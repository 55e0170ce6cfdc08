#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <span>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dspn/acd.hpp"
#include "dspn/corpus.hpp"
#include "dspn/model.hpp"
#include "dspn/pyramid.hpp"
#include "dspn/rng.hpp"
#include "dspn/tensor.hpp"
#include "oracles.hpp"

namespace testing {

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("dspn_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline dspn::Tensor random_matrix(std::size_t rows, std::size_t cols, dspn::Rng& rng, double scale = 1.0) {
    dspn::Tensor t = dspn::Tensor::matrix(rows, cols);
    for (double& v : t.values()) v = rng.uniform(-scale, scale);
    return t;
}

inline dspn::Tensor random_vector(std::size_t n, dspn::Rng& rng, double scale = 1.0) {
    dspn::Tensor t = dspn::Tensor::vector(n);
    for (double& v : t.values()) v = rng.uniform(-scale, scale);
    return t;
}

inline oracle::Params oracle_params(const dspn::Model& model) {
    const auto& p = model.params();
    return {oracle::mat(p.value(dspn::kImportanceWeightParam)), oracle::vec(p.value(dspn::kImportanceBiasParam)),
            oracle::mat(p.value(dspn::kAspectEmbeddingParam)),  oracle::mat(p.value(dspn::kWordHiddenWeightParam)),
            oracle::vec(p.value(dspn::kWordHiddenBiasParam)),   oracle::mat(p.value(dspn::kWordOutputWeightParam)),
            oracle::vec(p.value(dspn::kWordOutputBiasParam))};
}

// Embedding rows of a review's tokens, looked up directly in the table.
inline oracle::Mat token_rows(const dspn::Model& model, const dspn::Review& review) {
    const dspn::Tensor& e = model.params().value(dspn::kEmbeddingParam);
    oracle::Mat rows;
    for (dspn::TokenId id : review.tokens) {
        rows.emplace_back(e.row(id).begin(), e.row(id).end());
    }
    return rows;
}

inline dspn::Review make_review(const std::string& id, const std::vector<std::string>& words,
                                const dspn::Vocabulary& vocab) {
    dspn::Review r;
    r.id = id;
    r.words = words;
    for (const auto& w : words) r.tokens.push_back(vocab.id(w));
    return r;
}

inline bool sums_to_one(std::span<const double> v, double tol) {
    double s = 0.0;
    for (double x : v) s += x;
    return std::abs(s - 1.0) <= tol;
}

}  // namespace testing
