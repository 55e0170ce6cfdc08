#include "dspn/cli.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "dspn/checkpoint.hpp"
#include "dspn/errors.hpp"
#include "dspn/gradsuite.hpp"
#include "dspn/metrics.hpp"
#include "dspn/synth.hpp"
#include "dspn/trainer.hpp"

namespace dspn {

namespace {

struct Options {
    std::string corpus, schema, config, out, ckpt, val, id, embeddings, json_out, schema_out, label_source;
    std::vector<std::string> corpora;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::size_t> budget;
    std::optional<std::size_t> size;
    std::optional<double> threshold;
    bool acsa_on_detected = false;
    bool macro_f1 = false;
};

KeyValues parse_overrides(const std::vector<std::string>& overrides) {
    KeyValues kv;
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + o + "'");
        kv[o.substr(0, eq)] = o.substr(eq + 1);
    }
    return kv;
}

std::shared_ptr<const PrecomputedStore> load_store(const ModelConfig& model, const std::string& flag_path) {
    if (model.encoder_mode != EncoderMode::precomputed) return nullptr;
    const std::string path = flag_path.empty() ? model.embeddings_path : flag_path;
    if (path.empty()) throw ConfigError("precomputed encoder mode needs embeddings_path");
    return std::make_shared<const PrecomputedStore>(load_precomputed(path, model.dim));
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw Error("failed writing '" + path + "'");
}

int cmd_train(const Options& o, std::ostream& out) {
    RunConfig config;
    if (!o.config.empty()) config = run_config_from(load_key_values(o.config));
    KeyValues kv = parse_overrides(o.overrides);
    if (o.seed) kv["seed"] = std::to_string(*o.seed);
    if (o.workers) kv["workers"] = std::to_string(*o.workers);
    apply_key_values(config, kv);

    const AspectSchema schema = load_schema(o.schema);
    Corpus corpus = load_corpus(o.corpus, config.model.min_count, config.model.max_len);
    Corpus train_part, val_part;
    if (!o.val.empty()) {
        train_part = std::move(corpus);
        val_part = load_corpus(o.val, train_part.vocab, config.model.max_len);
    } else if (config.train.val_fraction > 0.0) {
        std::tie(train_part, val_part) = split_validation(corpus, config.train.val_fraction, config.train.seed);
    } else {
        val_part = corpus;
        train_part = std::move(corpus);
    }
    auto store = load_store(config.model, o.embeddings);

    out << "training on " << train_part.reviews.size() << " reviews, validating on " << val_part.reviews.size()
        << ", vocabulary " << train_part.vocab.size() << "\n";
    TrainOptions options;
    options.on_epoch = [&out](const EpochRecord& r) {
        out << "epoch " << r.epoch << (r.pretrain ? " (acd pretrain)" : "") << std::fixed << std::setprecision(4)
            << " loss=" << r.loss_total << " acd=" << r.loss_acd << " rp=" << r.loss_rp;
        if (r.validation.acc_rp) out << " val_rp=" << *r.validation.acc_rp;
        if (r.validation.f1_acd) out << " val_acd_f1=" << *r.validation.f1_acd;
        out << std::defaultfloat << "\n";
    };
    TrainResult result = train(train_part, val_part, schema, config.model, config.train, store, options);
    save_checkpoint(result.checkpoint, o.out);
    out << "best epoch " << result.best_epoch << ", checkpoint written to " << o.out << "\n";
    return kExitOk;
}

struct LoadedModel {
    Checkpoint ckpt;
    std::unique_ptr<Model> model;
};

LoadedModel load_model(const Options& o) {
    LoadedModel lm;
    lm.ckpt = load_checkpoint(o.ckpt);
    auto store = load_store(lm.ckpt.model, o.embeddings);
    lm.model = std::make_unique<Model>(model_from_checkpoint(lm.ckpt, store));
    return lm;
}

int cmd_eval(const Options& o, std::ostream& out) {
    LoadedModel lm = load_model(o);
    Corpus corpus = load_corpus(o.corpus, lm.ckpt.vocab, lm.ckpt.model.max_len);
    if (o.budget) {
        corpus = budget_subsample(corpus, *o.budget, o.seed.value_or(lm.ckpt.train.seed));
    }
    EvalOptions options;
    options.acd_threshold = o.threshold.value_or(lm.ckpt.model.acd_threshold);
    options.acsa_on_gold = !o.acsa_on_detected;
    options.macro_f1 = o.macro_f1;
    options.workers = o.workers.value_or(1);
    if (!o.label_source.empty()) options.label_source = parse_label_source(o.label_source);
    const EvalReport report = evaluate_model(*lm.model, corpus, options);
    out << format_report(report);
    if (!o.json_out.empty()) write_text(o.json_out, report_to_json(report) + "\n");
    return kExitOk;
}

int cmd_predict(const Options& o, std::ostream& out) {
    LoadedModel lm = load_model(o);
    const Corpus corpus = load_corpus(o.corpus, lm.ckpt.vocab, lm.ckpt.model.max_len);
    const double threshold = o.threshold.value_or(lm.ckpt.model.acd_threshold);
    std::string text;
    for (const auto& r : corpus.reviews) {
        text += pyramid_output_to_json(r.id, lm.model->forward(r, threshold), lm.ckpt.schema, r.words);
        text += '\n';
    }
    write_text(o.out, text);
    out << "wrote " << corpus.reviews.size() << " predictions to " << o.out << "\n";
    return kExitOk;
}

int cmd_inspect(const Options& o, std::ostream& out) {
    LoadedModel lm = load_model(o);
    const Corpus corpus = load_corpus(o.corpus, lm.ckpt.vocab, lm.ckpt.model.max_len);
    const Review* review = corpus.find(o.id);
    if (!review) throw Error("no review with id '" + o.id + "' in " + o.corpus);
    const double threshold = o.threshold.value_or(lm.ckpt.model.acd_threshold);
    const std::string json =
        pyramid_output_to_json(review->id, lm.model->forward(*review, threshold), lm.ckpt.schema, review->words);
    out << nlohmann::ordered_json::parse(json).dump(2) << "\n";
    return kExitOk;
}

int cmd_stats(const Options& o, std::ostream& out) {
    std::vector<Corpus> corpora;
    corpora.reserve(o.corpora.size());
    for (const auto& path : o.corpora) corpora.push_back(load_corpus(path, 1, kDefaultMaxLen));
    std::vector<NamedSplit> splits;
    for (std::size_t i = 0; i < corpora.size(); ++i) {
        splits.push_back({std::filesystem::path(o.corpora[i]).stem().string(), &corpora[i]});
    }
    std::size_t num_aspects = 0;
    if (!o.schema.empty()) num_aspects = load_schema(o.schema).size();
    out << format_stats(corpus_stats(splits, num_aspects));
    return kExitOk;
}

int cmd_gencorpus(const Options& o, std::ostream& out) {
    SynthConfig config = o.config.empty() ? default_synth_config() : load_synth_config(o.config);
    if (o.size) config.size = *o.size;
    config.validate();
    const Corpus corpus = synth_corpus(config, o.seed.value_or(1));
    save_corpus(corpus, std::filesystem::path(o.out));
    if (!o.schema_out.empty()) save_schema(synth_schema(config), o.schema_out);
    out << "wrote " << corpus.reviews.size() << " reviews to " << o.out << "\n";
    return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
    RunConfig config;
    if (!o.config.empty()) config = run_config_from(load_key_values(o.config));
    KeyValues kv = parse_overrides(o.overrides);
    if (o.seed) kv["gradcheck_seed"] = std::to_string(*o.seed);
    apply_key_values(config, kv);

    const auto start = std::chrono::steady_clock::now();
    const GradientSuiteReport r = run_gradient_suite(config.gradcheck);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << "instances " << r.instances << " (resampled " << r.resampled << ")\n";
    out << "coordinates checked " << r.checked << ", skipped near kinks " << r.skipped << "\n";
    out << std::scientific << std::setprecision(3);
    out << "max rel err " << r.max_rel_error << " at " << r.worst.worst_param << "[" << r.worst.worst_index
        << "] analytic " << r.worst.worst_analytic << " numeric " << r.worst.worst_numeric << "\n";
    out << std::fixed << std::setprecision(2) << "time " << seconds << " s\n" << std::defaultfloat;
    return r.max_rel_error < 1e-4 ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Distantly supervised pyramid network for unified sentiment analysis", "dspn"};
    app.require_subcommand(1);
    Options o;

    auto add_seed = [&](CLI::App* c, const char* what) { c->add_option("--seed", o.seed, what); };

    auto* train_cmd = app.add_subcommand("train", "Train a model from star-rated reviews");
    train_cmd->add_option("--corpus", o.corpus, "Training corpus (JSONL)")->required();
    train_cmd->add_option("--schema", o.schema, "Aspect schema (JSON)")->required();
    train_cmd->add_option("--config", o.config, "key=value config file");
    train_cmd->add_option("--out", o.out, "Checkpoint to write")->required();
    train_cmd->add_option("--val", o.val, "Validation corpus; otherwise a seeded holdout of --corpus");
    train_cmd->add_option("--embeddings", o.embeddings, "Precomputed embedding file (overrides embeddings_path)");
    train_cmd->add_option("--set", o.overrides, "Override a config key, e.g. --set lr=0.01");
    add_seed(train_cmd, "Random seed (overrides config)");
    train_cmd->add_option("--workers", o.workers, "Gradient worker threads")->check(CLI::PositiveNumber);

    auto* eval_cmd = app.add_subcommand("eval", "Report ACD, ACSA and RP metrics on a labeled corpus");
    eval_cmd->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
    eval_cmd->add_option("--corpus", o.corpus, "Evaluation corpus (JSONL)")->required();
    eval_cmd->add_option("--budget", o.budget, "Keep only this many randomly chosen gold aspect labels");
    add_seed(eval_cmd, "Seed for --budget sampling (default: training seed)");
    eval_cmd->add_option("--threshold", o.threshold, "ACD threshold (default: from checkpoint)");
    eval_cmd->add_option("--label-source", o.label_source, "stars, pseudo or derived_from_aspects");
    eval_cmd->add_flag("--acsa-on-detected", o.acsa_on_detected, "Score ACSA only through detected aspects");
    eval_cmd->add_flag("--macro-f1", o.macro_f1, "Also report macro-averaged ACD F1");
    eval_cmd->add_option("--json", o.json_out, "Also write the report as JSON");
    eval_cmd->add_option("--embeddings", o.embeddings, "Precomputed embedding file");
    eval_cmd->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);

    auto* predict_cmd = app.add_subcommand("predict", "Write the prediction pyramid for every review");
    predict_cmd->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
    predict_cmd->add_option("--corpus", o.corpus, "Corpus (JSONL)")->required();
    predict_cmd->add_option("--out", o.out, "Output JSONL")->required();
    predict_cmd->add_option("--threshold", o.threshold, "ACD threshold (default: from checkpoint)");
    predict_cmd->add_option("--embeddings", o.embeddings, "Precomputed embedding file");

    auto* inspect_cmd = app.add_subcommand("inspect", "Print the prediction pyramid for one review");
    inspect_cmd->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
    inspect_cmd->add_option("--corpus", o.corpus, "Corpus containing the review")->required();
    inspect_cmd->add_option("--id", o.id, "Review id")->required();
    inspect_cmd->add_option("--threshold", o.threshold, "ACD threshold (default: from checkpoint)");
    inspect_cmd->add_option("--embeddings", o.embeddings, "Precomputed embedding file");

    auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics with MA and MAS");
    stats_cmd->add_option("--corpus", o.corpora, "Corpus file; repeat for several splits")->required();
    stats_cmd->add_option("--schema", o.schema, "Aspect schema, to count absent aspects");

    auto* gen_cmd = app.add_subcommand("gencorpus", "Generate a synthetic star-rated corpus");
    gen_cmd->add_option("--config", o.config, "Generator config (JSON); defaults when omitted");
    add_seed(gen_cmd, "Generator seed (default 1)");
    gen_cmd->add_option("--out", o.out, "Output JSONL")->required();
    gen_cmd->add_option("--size", o.size, "Number of reviews (overrides config)");
    gen_cmd->add_option("--schema-out", o.schema_out, "Also write the matching aspect schema");

    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the joint loss gradient");
    grad_cmd->add_option("--config", o.config, "key=value config file (gradcheck_* keys)");
    grad_cmd->add_option("--set", o.overrides, "Override a config key");
    add_seed(grad_cmd, "Seed (overrides gradcheck_seed)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kExitUsage;
    }

    try {
        if (*train_cmd) return cmd_train(o, out);
        if (*eval_cmd) return cmd_eval(o, out);
        if (*predict_cmd) return cmd_predict(o, out);
        if (*inspect_cmd) return cmd_inspect(o, out);
        if (*stats_cmd) return cmd_stats(o, out);
        if (*gen_cmd) return cmd_gencorpus(o, out);
        if (*grad_cmd) return cmd_gradcheck(o, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace dspn
