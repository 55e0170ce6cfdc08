#include "dspn/encoder.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "dspn/binio.hpp"

namespace dspn {

namespace {

constexpr std::string_view kEmbeddingMagic = "DSPNEMB1";

}  // namespace

std::string_view encoder_mode_name(EncoderMode mode) {
    return mode == EncoderMode::trainable ? "trainable" : "precomputed";
}

EncoderMode parse_encoder_mode(std::string_view name) {
    if (name == "trainable") return EncoderMode::trainable;
    if (name == "precomputed") return EncoderMode::precomputed;
    throw ConfigError("unknown encoder mode '" + std::string(name) + "'");
}

const EncodedReview* PrecomputedStore::find(std::string_view id) const {
    auto it = records.find(std::string(id));
    return it == records.end() ? nullptr : &it->second;
}

std::string aspect_seed_record_id(std::string_view aspect_name) {
    return "aspect:" + std::string(aspect_name);
}

PrecomputedStore parse_precomputed(std::span<const unsigned char> bytes, std::size_t expected_dim) {
    using Kind = EmbeddingFileError::Kind;
    ByteReader in(bytes);
    PrecomputedStore store;
    try {
        if (in.remaining() < kEmbeddingMagic.size() || in.bytes(kEmbeddingMagic.size()) != kEmbeddingMagic) {
            throw EmbeddingFileError(Kind::bad_magic, "embedding file: bad magic");
        }
        store.dim = in.u32();
        if (expected_dim != 0 && store.dim != expected_dim) {
            throw EmbeddingFileError(Kind::dimension_mismatch,
                                     "embedding file: dimension " + std::to_string(store.dim) +
                                         " does not match configured " + std::to_string(expected_dim));
        }
        const std::uint32_t count = in.u32();
        for (std::uint32_t r = 0; r < count; ++r) {
            const std::uint32_t id_len = in.u32();
            std::string id = in.bytes(id_len);
            const std::uint32_t n = in.u32();
            EncodedReview enc;
            enc.sentence = Tensor::vector(store.dim);
            for (std::size_t c = 0; c < store.dim; ++c) enc.sentence[c] = in.f32();
            enc.hidden = Tensor::matrix(n, store.dim);
            for (std::size_t i = 0; i < enc.hidden.size(); ++i) enc.hidden[i] = in.f32();
            if (!enc.sentence.all_finite() || !enc.hidden.all_finite()) {
                throw FormatError("embedding file: non-finite value in record '" + id + "'");
            }
            if (!store.records.emplace(id, std::move(enc)).second) {
                throw EmbeddingFileError(Kind::duplicate_id, "embedding file: duplicate id '" + id + "'");
            }
        }
    } catch (const TruncatedInput&) {
        throw EmbeddingFileError(Kind::truncated, "embedding file: truncated record");
    }
    if (in.remaining() != 0) {
        throw EmbeddingFileError(Kind::trailing_bytes, "embedding file: trailing bytes after last record");
    }
    return store;
}

PrecomputedStore load_precomputed(const std::filesystem::path& path, std::size_t expected_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open embedding file '" + path.string() + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_precomputed(bytes, expected_dim);
}

std::vector<unsigned char> serialize_precomputed(
    std::size_t dim, const std::vector<std::pair<std::string, EncodedReview>>& records) {
    ByteWriter out;
    out.bytes(kEmbeddingMagic);
    out.u32(static_cast<std::uint32_t>(dim));
    out.u32(static_cast<std::uint32_t>(records.size()));
    for (const auto& [id, enc] : records) {
        if (enc.sentence.size() != dim || enc.hidden.cols() != dim) {
            throw ShapeError("embedding record '" + id + "' does not have dimension " + std::to_string(dim));
        }
        out.u32(static_cast<std::uint32_t>(id.size()));
        out.bytes(id);
        out.u32(static_cast<std::uint32_t>(enc.hidden.rows()));
        for (double v : enc.sentence.values()) out.f32(static_cast<float>(v));
        for (double v : enc.hidden.values()) out.f32(static_cast<float>(v));
    }
    return std::move(out.buffer());
}

void write_precomputed(const std::filesystem::path& path, std::size_t dim,
                       const std::vector<std::pair<std::string, EncodedReview>>& records) {
    const auto bytes = serialize_precomputed(dim, records);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Encoder::Encoder(EncoderConfig config, std::shared_ptr<const PrecomputedStore> store)
    : config_(config), store_(std::move(store)) {
    if (config_.dim < 2) throw ConfigError("embedding dimension must be at least 2");
    if (config_.mode == EncoderMode::precomputed) {
        if (!store_) throw ConfigError("precomputed encoder requires an embedding file");
        if (store_->dim != config_.dim) {
            throw EmbeddingFileError(EmbeddingFileError::Kind::dimension_mismatch,
                                     "embedding file dimension " + std::to_string(store_->dim) +
                                         " does not match configured " + std::to_string(config_.dim));
        }
    }
}

void Encoder::init_params(ParamSet& params, Rng& rng) const {
    if (config_.mode != EncoderMode::trainable) return;
    Tensor table = Tensor::matrix(config_.vocab_size, config_.dim);
    for (double& v : table.values()) v = rng.uniform(-0.1, 0.1);
    params.add(std::string(kEmbeddingParam), std::move(table));
}

EncodedReview Encoder::encode(const Review& review, const ParamSet& params) const {
    if (config_.mode == EncoderMode::precomputed) {
        const EncodedReview* found = store_->find(review.id);
        if (found == nullptr) throw Error("no precomputed embedding for review '" + review.id + "'");
        if (found->length() == 0) throw Error("precomputed embedding for '" + review.id + "' has no tokens");
        return *found;
    }
    if (review.tokens.empty()) throw Error("review '" + review.id + "' has no tokens");
    const Tensor& table = params.value(kEmbeddingParam);
    const std::size_t n = review.tokens.size();
    EncodedReview enc;
    enc.hidden = Tensor::matrix(n, config_.dim);
    enc.sentence = Tensor::vector(config_.dim);
    for (std::size_t j = 0; j < n; ++j) {
        const TokenId t = review.tokens[j];
        if (t >= table.rows()) {
            throw Error("token id " + std::to_string(t) + " out of range in review '" + review.id + "'");
        }
        auto src = table.row(t);
        auto dst = enc.hidden.row(j);
        std::copy(src.begin(), src.end(), dst.begin());
        axpy(1.0, src, enc.sentence.values());
    }
    for (double& v : enc.sentence.values()) v /= static_cast<double>(n);
    return enc;
}

void Encoder::backward(const Review& review, std::span<const double> d_sentence, const Tensor* d_hidden,
                       SparseRows& d_embedding) const {
    if (config_.mode != EncoderMode::trainable) return;
    const std::size_t n = review.tokens.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
        auto& row = d_embedding[review.tokens[j]];
        if (row.empty()) row.assign(config_.dim, 0.0);
        if (!d_sentence.empty()) axpy(inv_n, d_sentence, row);
        if (d_hidden != nullptr) axpy(1.0, d_hidden->row(j), row);
    }
}

Tensor Encoder::init_aspect_matrix(const AspectSchema& schema, const ParamSet& params,
                                   const Vocabulary& vocab) const {
    Tensor aspects = Tensor::matrix(schema.size(), config_.dim);
    for (std::size_t k = 0; k < schema.size(); ++k) {
        const auto& aspect = schema.aspects[k];
        auto row = aspects.row(k);
        if (config_.mode == EncoderMode::trainable) {
            const Tensor& table = params.value(kEmbeddingParam);
            for (const auto& seed : aspect.seeds) {
                auto id = vocab.find(seed);
                if (!id) throw Error("seed word '" + seed + "' of aspect '" + aspect.name + "' is not in the vocabulary");
                axpy(1.0, table.row(*id), row);
            }
            for (double& v : row) v /= static_cast<double>(aspect.seeds.size());
        } else {
            const EncodedReview* found = store_->find(aspect_seed_record_id(aspect.name));
            if (found == nullptr) {
                throw Error("embedding file has no seed sentence for aspect '" + aspect.name + "'");
            }
            std::copy(found->sentence.values().begin(), found->sentence.values().end(), row.begin());
        }
        const double norm = l2_norm(row);
        if (!(norm > 0.0)) throw NumericError("aspect '" + aspect.name + "' seed embedding has zero norm");
        for (double& v : row) v /= norm;
    }
    return aspects;
}

}  // namespace dspn
