#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "dspn/acd.hpp"
#include "dspn/encoder.hpp"

namespace dspn {

// Flat `key=value` text. Blank lines and lines starting with '#' are ignored.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::filesystem::path& path);
// One `key=value` line per entry, in key order.
std::string format_key_values(const KeyValues& kv);

// Shortest text that reads back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view text, std::string_view key);
std::uint64_t parse_uint(std::string_view text, std::string_view key);

enum class OptimizerKind { sgd, adam };
enum class LabelSource { stars, pseudo, derived_from_aspects };

std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);
std::string_view label_source_name(LabelSource source);
LabelSource parse_label_source(std::string_view name);

struct ModelConfig {
    EncoderMode encoder_mode = EncoderMode::trainable;
    std::size_t dim = 32;
    std::size_t hidden_dim = 0;  // 0: same as dim
    std::size_t max_len = kDefaultMaxLen;
    std::size_t min_count = kDefaultMinCount;
    double acd_threshold = kDefaultAcdThreshold;
    // 0 keeps Xavier init for W1; otherwise W1 starts as this multiple of T.
    double importance_init_scale = 0.0;
    std::string embeddings_path;

    std::size_t effective_hidden_dim() const { return hidden_dim == 0 ? dim : hidden_dim; }
};

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double lambda = 0.1;
    double lambda_acd = 1.0;
    std::size_t neg_samples = 10;
    std::uint64_t seed = 1;
    std::size_t acd_pretrain_epochs = 1;
    LabelSource label_source = LabelSource::stars;
    // Held-out share of the training file when no validation file is given.
    double val_fraction = 0.1;
    std::size_t workers = 1;

    void validate() const;
};

struct GradcheckConfig {
    std::size_t instances = 100;
    std::size_t reviews = 3;
    std::size_t aspects = 3;
    std::size_t max_tokens = 6;
    std::size_t vocab = 12;
    std::size_t dim = 6;
    std::size_t hidden_dim = 5;
    std::size_t neg_samples = 2;
    double step = 1e-5;
    double lambda = 0.7;
    double lambda_acd = 0.3;
    std::uint64_t seed = 1;
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    GradcheckConfig gradcheck;
};

// Unknown keys and unparsable values raise ConfigError.
RunConfig run_config_from(const KeyValues& kv);
void apply_key_values(RunConfig& config, const KeyValues& kv);
// Model and training keys only; worker count is excluded because it never
// changes results.
KeyValues to_key_values(const ModelConfig& model, const TrainConfig& train);

}  // namespace dspn
