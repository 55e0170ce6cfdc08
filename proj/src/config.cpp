#include "dspn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "dspn/errors.hpp"

namespace dspn {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
    KeyValues kv;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = text.find('\n', pos);
        const auto line = trim(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
        ++line_no;
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + " is not key=value");
        }
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + " has an empty key");
        kv[std::string(key)] = std::string(trim(line.substr(eq + 1)));
    }
    return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str());
}

std::string format_key_values(const KeyValues& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::string_view key) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw ConfigError("invalid number '" + std::string(text) + "' for " + std::string(key));
    }
    return v;
}

std::uint64_t parse_uint(std::string_view text, std::string_view key) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw ConfigError("invalid non-negative integer '" + std::string(text) + "' for " + std::string(key));
    }
    return v;
}

std::string_view optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view label_source_name(LabelSource source) {
    switch (source) {
        case LabelSource::stars: return "stars";
        case LabelSource::pseudo: return "pseudo";
        case LabelSource::derived_from_aspects: return "derived_from_aspects";
    }
    return "?";
}

LabelSource parse_label_source(std::string_view name) {
    if (name == "stars") return LabelSource::stars;
    if (name == "pseudo") return LabelSource::pseudo;
    if (name == "derived_from_aspects") return LabelSource::derived_from_aspects;
    throw ConfigError("unknown label source '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (!(lambda >= 0.0) || !(lambda_acd >= 0.0)) throw ConfigError("loss weights must be non-negative");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");
    if (workers == 0) throw ConfigError("workers must be positive");
}

void apply_key_values(RunConfig& c, const KeyValues& kv) {
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto size = [](std::size_t& field) -> Setter {
        return [&field](const std::string& k, const std::string& v) { field = parse_uint(v, k); };
    };
    auto real = [](double& field) -> Setter {
        return [&field](const std::string& k, const std::string& v) { field = parse_double(v, k); };
    };
    const std::map<std::string, Setter, std::less<>> setters = {
        {"d_w", size(c.model.dim)},
        {"hidden", size(c.model.hidden_dim)},
        {"max_len", size(c.model.max_len)},
        {"min_count", size(c.model.min_count)},
        {"acd_threshold", real(c.model.acd_threshold)},
        {"importance_init_scale", real(c.model.importance_init_scale)},
        {"encoder_mode", [&](const std::string&, const std::string& v) { c.model.encoder_mode = parse_encoder_mode(v); }},
        {"embeddings_path", [&](const std::string&, const std::string& v) { c.model.embeddings_path = v; }},
        {"epochs", size(c.train.epochs)},
        {"batch", size(c.train.batch_size)},
        {"lr", real(c.train.learning_rate)},
        {"optimizer", [&](const std::string&, const std::string& v) { c.train.optimizer = parse_optimizer(v); }},
        {"adam_beta1", real(c.train.adam_beta1)},
        {"adam_beta2", real(c.train.adam_beta2)},
        {"adam_epsilon", real(c.train.adam_epsilon)},
        {"lambda", real(c.train.lambda)},
        {"lambda_acd", real(c.train.lambda_acd)},
        {"neg_samples", size(c.train.neg_samples)},
        {"seed", [&](const std::string& k, const std::string& v) { c.train.seed = parse_uint(v, k); }},
        {"acd_pretrain_epochs", size(c.train.acd_pretrain_epochs)},
        {"label_source", [&](const std::string&, const std::string& v) { c.train.label_source = parse_label_source(v); }},
        {"val_fraction", real(c.train.val_fraction)},
        {"workers", size(c.train.workers)},
        {"gradcheck_instances", size(c.gradcheck.instances)},
        {"gradcheck_reviews", size(c.gradcheck.reviews)},
        {"gradcheck_aspects", size(c.gradcheck.aspects)},
        {"gradcheck_max_tokens", size(c.gradcheck.max_tokens)},
        {"gradcheck_vocab", size(c.gradcheck.vocab)},
        {"gradcheck_d_w", size(c.gradcheck.dim)},
        {"gradcheck_hidden", size(c.gradcheck.hidden_dim)},
        {"gradcheck_neg_samples", size(c.gradcheck.neg_samples)},
        {"gradcheck_step", real(c.gradcheck.step)},
        {"gradcheck_lambda", real(c.gradcheck.lambda)},
        {"gradcheck_lambda_acd", real(c.gradcheck.lambda_acd)},
        {"gradcheck_seed", [&](const std::string& k, const std::string& v) { c.gradcheck.seed = parse_uint(v, k); }},
    };
    for (const auto& [key, value] : kv) {
        auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
        it->second(key, value);
    }
    c.train.validate();
}

RunConfig run_config_from(const KeyValues& kv) {
    RunConfig c;
    apply_key_values(c, kv);
    return c;
}

KeyValues to_key_values(const ModelConfig& m, const TrainConfig& t) {
    return {
        {"d_w", std::to_string(m.dim)},
        {"hidden", std::to_string(m.effective_hidden_dim())},
        {"max_len", std::to_string(m.max_len)},
        {"min_count", std::to_string(m.min_count)},
        {"acd_threshold", format_double(m.acd_threshold)},
        {"importance_init_scale", format_double(m.importance_init_scale)},
        {"encoder_mode", std::string(encoder_mode_name(m.encoder_mode))},
        {"embeddings_path", m.embeddings_path},
        {"epochs", std::to_string(t.epochs)},
        {"batch", std::to_string(t.batch_size)},
        {"lr", format_double(t.learning_rate)},
        {"optimizer", std::string(optimizer_name(t.optimizer))},
        {"adam_beta1", format_double(t.adam_beta1)},
        {"adam_beta2", format_double(t.adam_beta2)},
        {"adam_epsilon", format_double(t.adam_epsilon)},
        {"lambda", format_double(t.lambda)},
        {"lambda_acd", format_double(t.lambda_acd)},
        {"neg_samples", std::to_string(t.neg_samples)},
        {"seed", std::to_string(t.seed)},
        {"acd_pretrain_epochs", std::to_string(t.acd_pretrain_epochs)},
        {"label_source", std::string(label_source_name(t.label_source))},
        {"val_fraction", format_double(t.val_fraction)},
    };
}

}  // namespace dspn
