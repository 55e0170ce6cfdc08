#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dspn/corpus.hpp"
#include "dspn/errors.hpp"
#include "dspn/gradkernel.hpp"
#include "dspn/rng.hpp"
#include "dspn/tensor.hpp"

namespace dspn {

enum class EncoderMode { trainable, precomputed };

std::string_view encoder_mode_name(EncoderMode mode);
EncoderMode parse_encoder_mode(std::string_view name);

struct EncoderConfig {
    EncoderMode mode = EncoderMode::trainable;
    std::size_t dim = 32;
    std::size_t vocab_size = 0;
    std::size_t max_len = kDefaultMaxLen;
};

// Sentence embedding plus one hidden state per content token.
struct EncodedReview {
    Tensor sentence;  // [dim]
    Tensor hidden;    // [n x dim]

    std::size_t length() const { return hidden.rows(); }
};

class EmbeddingFileError : public FormatError {
public:
    enum class Kind { bad_magic, truncated, dimension_mismatch, trailing_bytes, duplicate_id };
    EmbeddingFileError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Review id -> encoding, read from a "DSPNEMB1" file.
struct PrecomputedStore {
    std::size_t dim = 0;
    std::map<std::string, EncodedReview> records;

    const EncodedReview* find(std::string_view id) const;
};

// Id under which a precomputed file stores an aspect's seed-sentence embedding.
std::string aspect_seed_record_id(std::string_view aspect_name);

// expected_dim = 0 accepts any header dimension.
PrecomputedStore load_precomputed(const std::filesystem::path& path, std::size_t expected_dim = 0);
PrecomputedStore parse_precomputed(std::span<const unsigned char> bytes, std::size_t expected_dim = 0);

// Writes records in the given order; values are narrowed to 32-bit floats.
std::vector<unsigned char> serialize_precomputed(
    std::size_t dim, const std::vector<std::pair<std::string, EncodedReview>>& records);
void write_precomputed(const std::filesystem::path& path, std::size_t dim,
                       const std::vector<std::pair<std::string, EncodedReview>>& records);

// Token-row gradient for the embedding table, keyed by token id.
using SparseRows = std::map<TokenId, std::vector<double>>;

inline constexpr std::string_view kEmbeddingParam = "embedding";

class Encoder {
public:
    explicit Encoder(EncoderConfig config, std::shared_ptr<const PrecomputedStore> store = nullptr);

    const EncoderConfig& config() const { return config_; }
    const PrecomputedStore* store() const { return store_.get(); }

    // Trainable mode adds the embedding table, uniform in [-0.1, 0.1].
    void init_params(ParamSet& params, Rng& rng) const;

    // Trainable: hidden row j is the embedding of token j, sentence is the row mean.
    // Precomputed: looked up by review id.
    EncodedReview encode(const Review& review, const ParamSet& params) const;

    // Accumulates the embedding-table gradient given upstream gradients on
    // the sentence vector and on the hidden rows (either may be empty).
    // No-op in precomputed mode.
    void backward(const Review& review, std::span<const double> d_sentence, const Tensor* d_hidden,
                  SparseRows& d_embedding) const;

    // Row k: mean of seed-word embeddings (trainable) or the stored seed
    // sentence embedding (precomputed), scaled to unit L2 norm.
    Tensor init_aspect_matrix(const AspectSchema& schema, const ParamSet& params,
                              const Vocabulary& vocab) const;

private:
    EncoderConfig config_;
    std::shared_ptr<const PrecomputedStore> store_;
};

}  // namespace dspn
