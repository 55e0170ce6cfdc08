#include "dspn/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "dspn/binio.hpp"
#include "dspn/hash.hpp"
#include "dspn/model.hpp"

namespace dspn {

namespace {

constexpr std::string_view kCheckpointMagic = "DSPNCKPT";

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::uint64_t checksum(std::span<const unsigned char> bytes) {
    Fnv1a h;
    h.update(bytes);
    return h.digest();
}

std::string schema_line(const AspectSchema& schema) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& a : schema.aspects) doc.push_back({{"name", a.name}, {"seeds", a.seeds}});
    return doc.dump();
}

std::string vocab_line(const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 2; i < vocab.size(); ++i) {
        if (i > 2) out.push_back(' ');
        out += vocab.tokens()[i];
    }
    return out;
}

std::string text_block(const Checkpoint& c) {
    KeyValues kv = to_key_values(c.model, c.train);
    kv["epoch"] = std::to_string(c.epoch);
    kv["loss_total"] = format_double(c.loss_total);
    kv["loss_acd"] = format_double(c.loss_acd);
    kv["loss_rp"] = format_double(c.loss_rp);
    kv["schema"] = schema_line(c.schema);
    kv["schema_fingerprint"] = hex64(c.schema.fingerprint());
    kv["vocab"] = vocab_line(c.vocab);
    kv["vocab_min_count"] = std::to_string(c.vocab.min_count());
    kv["vocab_fingerprint"] = hex64(c.vocab.fingerprint());
    return format_key_values(kv);
}

std::string take(KeyValues& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw CheckpointError(CheckpointError::Kind::malformed, "checkpoint text lacks '" + key + "'");
    std::string v = std::move(it->second);
    kv.erase(it);
    return v;
}

void parse_text_block(const std::string& text, Checkpoint& c) {
    using Kind = CheckpointError::Kind;
    KeyValues kv;
    try {
        kv = parse_key_values(text);
    } catch (const ConfigError& e) {
        throw CheckpointError(Kind::malformed, std::string("checkpoint text: ") + e.what());
    }
    try {
        c.epoch = parse_uint(take(kv, "epoch"), "epoch");
        c.loss_total = parse_double(take(kv, "loss_total"), "loss_total");
        c.loss_acd = parse_double(take(kv, "loss_acd"), "loss_acd");
        c.loss_rp = parse_double(take(kv, "loss_rp"), "loss_rp");

        const auto schema_json = nlohmann::json::parse(take(kv, "schema"));
        for (const auto& a : schema_json) {
            c.schema.aspects.push_back({a.at("name").get<std::string>(), a.at("seeds").get<std::vector<std::string>>()});
        }
        const std::string schema_fp = take(kv, "schema_fingerprint");

        std::vector<std::string> tokens;
        std::istringstream vs(take(kv, "vocab"));
        for (std::string t; vs >> t;) tokens.push_back(t);
        c.vocab = Vocabulary::from_tokens(tokens, parse_uint(take(kv, "vocab_min_count"), "vocab_min_count"));
        const std::string vocab_fp = take(kv, "vocab_fingerprint");

        RunConfig rc = run_config_from(kv);
        c.model = rc.model;
        c.train = rc.train;

        if (schema_fp != hex64(c.schema.fingerprint())) {
            throw CheckpointError(Kind::fingerprint, "checkpoint aspect schema does not match its fingerprint");
        }
        if (vocab_fp != hex64(c.vocab.fingerprint())) {
            throw CheckpointError(Kind::fingerprint, "checkpoint vocabulary does not match its fingerprint");
        }
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(Kind::malformed, std::string("checkpoint text: ") + e.what());
    }
}

}  // namespace

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& c) {
    ByteWriter out;
    out.bytes(kCheckpointMagic);
    out.u32(c.version);
    out.u32(static_cast<std::uint32_t>(c.params.entries().size()));
    for (const auto& e : c.params.entries()) {
        out.u32(static_cast<std::uint32_t>(e.name.size()));
        out.bytes(e.name);
        out.u32(static_cast<std::uint32_t>(e.value.rank()));
        out.u32(static_cast<std::uint32_t>(e.value.rows()));
        if (e.value.rank() == 2) out.u32(static_cast<std::uint32_t>(e.value.cols()));
        for (double v : e.value.values()) out.f64(v);
    }
    const std::string text = text_block(c);
    out.u32(static_cast<std::uint32_t>(text.size()));
    out.bytes(text);
    out.u64(checksum(out.buffer()));
    return std::move(out.buffer());
}

Checkpoint parse_checkpoint(std::span<const unsigned char> bytes) {
    using Kind = CheckpointError::Kind;
    if (bytes.size() < kCheckpointMagic.size() + 4 ||
        std::string_view(reinterpret_cast<const char*>(bytes.data()), kCheckpointMagic.size()) != kCheckpointMagic) {
        if (bytes.size() < kCheckpointMagic.size()) throw CheckpointError(Kind::truncated, "checkpoint: file too short");
        throw CheckpointError(Kind::bad_magic, "checkpoint: bad magic");
    }
    Checkpoint c;
    ByteReader header(bytes.subspan(kCheckpointMagic.size(), 4));
    c.version = header.u32();
    if (c.version != kCheckpointVersion) {
        throw CheckpointError(Kind::version, "checkpoint: unsupported format version " + std::to_string(c.version));
    }
    if (bytes.size() < kCheckpointMagic.size() + 4 + 8) throw CheckpointError(Kind::truncated, "checkpoint: truncated");

    const auto body = bytes.first(bytes.size() - 8);
    ByteReader in(body.subspan(kCheckpointMagic.size() + 4));
    std::string text;
    try {
        const std::uint32_t count = in.u32();
        for (std::uint32_t t = 0; t < count; ++t) {
            std::string name = in.bytes(in.u32());
            const std::uint32_t rank = in.u32();
            if (rank != 1 && rank != 2) throw CheckpointError(Kind::malformed, "checkpoint: tensor '" + name + "' has rank " + std::to_string(rank));
            const std::uint32_t rows = in.u32();
            const std::uint32_t cols = rank == 2 ? in.u32() : 1;
            if (static_cast<std::uint64_t>(rows) * cols * 8 > in.remaining()) throw TruncatedInput();
            Tensor value = rank == 2 ? Tensor::matrix(rows, cols) : Tensor::vector(rows);
            for (double& v : value.values()) v = in.f64();
            c.params.add(std::move(name), std::move(value));
        }
        text = in.bytes(in.u32());
    } catch (const TruncatedInput&) {
        throw CheckpointError(Kind::truncated, "checkpoint: truncated");
    } catch (const CheckpointError&) {
        throw;
    } catch (const Error& e) {
        throw CheckpointError(Kind::malformed, std::string("checkpoint: ") + e.what());
    }
    if (in.remaining() != 0) throw CheckpointError(Kind::malformed, "checkpoint: unexpected bytes before checksum");

    ByteReader tail(bytes.last(8));
    if (tail.u64() != checksum(body)) throw CheckpointError(Kind::checksum, "checkpoint: checksum mismatch");

    parse_text_block(text, c);
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

void verify_fingerprints(const Checkpoint& ckpt, const Vocabulary& vocab, const AspectSchema& schema) {
    if (ckpt.vocab.fingerprint() != vocab.fingerprint()) {
        throw CheckpointError(CheckpointError::Kind::fingerprint, "vocabulary fingerprint does not match the checkpoint");
    }
    if (ckpt.schema.fingerprint() != schema.fingerprint()) {
        throw CheckpointError(CheckpointError::Kind::fingerprint, "aspect schema fingerprint does not match the checkpoint");
    }
}

Checkpoint make_checkpoint(const Model& model, const ModelConfig& model_config, const TrainConfig& train) {
    Checkpoint c;
    c.model = model_config;
    c.model.hidden_dim = model.hidden_dim();
    c.train = train;
    c.schema = model.schema();
    c.vocab = model.vocab();
    for (const auto& e : model.params().entries()) c.params.add(e.name, e.value);
    return c;
}

Model model_from_checkpoint(const Checkpoint& ckpt, std::shared_ptr<const PrecomputedStore> store) {
    EncoderConfig enc;
    enc.mode = ckpt.model.encoder_mode;
    enc.dim = ckpt.model.dim;
    enc.max_len = ckpt.model.max_len;
    enc.vocab_size = ckpt.vocab.size();
    ParamSet params;
    for (const auto& e : ckpt.params.entries()) params.add(e.name, e.value);
    return Model(enc, ckpt.schema, ckpt.vocab, std::move(params), std::move(store));
}

}  // namespace dspn
