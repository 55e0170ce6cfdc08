#include <doctest.h>

#include "dspn/checkpoint.hpp"
#include "dspn/gradsuite.hpp"
#include "support.hpp"

using namespace dspn;

namespace {

Checkpoint toy_checkpoint(std::uint64_t seed) {
    ToyInstance inst = make_toy_instance(GradcheckConfig{}, seed);
    ModelConfig mc;
    mc.dim = inst.model->encoder().config().dim;
    mc.acd_threshold = 0.003;
    mc.importance_init_scale = 12.5;
    TrainConfig tc;
    tc.lambda = 0.25;
    tc.seed = seed;
    tc.label_source = LabelSource::derived_from_aspects;
    Checkpoint c = make_checkpoint(*inst.model, mc, tc);
    c.epoch = 7;
    c.loss_total = 1.0 / 3.0;
    c.loss_acd = 2.5e-17;
    c.loss_rp = 0.1;
    return c;
}

int kind_of(const std::vector<unsigned char>& bytes) {
    try {
        parse_checkpoint(bytes);
    } catch (const CheckpointError& e) {
        return static_cast<int>(e.kind());
    }
    return -1;
}

}  // namespace

TEST_CASE("round trip keeps every field") {
    Checkpoint c = toy_checkpoint(3);
    auto bytes = serialize_checkpoint(c);
    Checkpoint d = parse_checkpoint(bytes);
    CHECK(d.version == kCheckpointVersion);
    REQUIRE(d.params.entries().size() == c.params.entries().size());
    for (std::size_t i = 0; i < c.params.entries().size(); ++i) {
        CHECK(d.params.entries()[i].name == c.params.entries()[i].name);
        CHECK(d.params.entries()[i].value == c.params.entries()[i].value);
    }
    CHECK(d.epoch == 7);
    CHECK(d.loss_total == c.loss_total);
    CHECK(d.loss_acd == c.loss_acd);
    CHECK(d.model.acd_threshold == 0.003);
    CHECK(d.model.importance_init_scale == 12.5);
    CHECK(d.model.hidden_dim == c.model.hidden_dim);
    CHECK(d.train.lambda == 0.25);
    CHECK(d.train.label_source == LabelSource::derived_from_aspects);
    CHECK(d.vocab.tokens() == c.vocab.tokens());
    CHECK(d.schema.fingerprint() == c.schema.fingerprint());
    CHECK(serialize_checkpoint(d) == bytes);
}

TEST_CASE("file round trip and inference") {
    testing::TempDir dir;
    ToyInstance inst = make_toy_instance(GradcheckConfig{}, 5);
    ModelConfig mc;
    mc.dim = inst.model->encoder().config().dim;
    Checkpoint c = make_checkpoint(*inst.model, mc, TrainConfig{});
    save_checkpoint(c, dir / "m.ckpt");
    Checkpoint d = load_checkpoint(dir / "m.ckpt");
    save_checkpoint(d, dir / "m2.ckpt");
    CHECK(testing::read_file(dir / "m.ckpt") == testing::read_file(dir / "m2.ckpt"));

    Model m = model_from_checkpoint(d);
    for (const Review& r : inst.corpus.reviews) {
        PyramidOutput a = inst.model->forward(r, 1e-4), b = m.forward(r, 1e-4);
        CHECK(a.importance == b.importance);
        CHECK(a.word_sentiment == b.word_sentiment);
        CHECK(a.attention == b.attention);
        CHECK(a.aspect_sentiment == b.aspect_sentiment);
        CHECK(a.review_sentiment == b.review_sentiment);
        CHECK(a.detected == b.detected);
    }
    CHECK_THROWS(load_checkpoint(dir / "missing.ckpt"));
}

TEST_CASE("corrupted files give distinct errors") {
    using K = CheckpointError::Kind;
    auto bytes = serialize_checkpoint(toy_checkpoint(4));

    auto version = bytes;
    version[8] ^= 0x01;
    CHECK(kind_of(version) == static_cast<int>(K::version));

    auto magic = bytes;
    magic[0] = 'X';
    CHECK(kind_of(magic) == static_cast<int>(K::bad_magic));

    for (std::size_t cut : {std::size_t{1}, std::size_t{9}, bytes.size() / 2, bytes.size() - 14}) {
        auto truncated = bytes;
        truncated.resize(truncated.size() - cut);
        CHECK(kind_of(truncated) == static_cast<int>(K::truncated));
    }

    // magic, version, count, name length, "embedding", rank, two dims
    const std::size_t first_value = 8 + 4 + 4 + 4 + 9 + 4 + 8;
    auto flipped = bytes;
    flipped[first_value + 3] ^= 0x10;
    CHECK(kind_of(flipped) == static_cast<int>(K::checksum));

    for (std::size_t pos = 12; pos < bytes.size(); pos += 37) {
        auto any = bytes;
        any[pos] ^= 0x5a;
        CHECK(kind_of(any) >= 0);
    }

    auto value_bit = bytes;
    // last byte of the stored checksum
    value_bit.back() ^= 0xff;
    CHECK(kind_of(value_bit) == static_cast<int>(K::checksum));
}

TEST_CASE("fingerprints") {
    Checkpoint c = toy_checkpoint(6);
    CHECK_NOTHROW(verify_fingerprints(c, c.vocab, c.schema));
    Vocabulary other = Vocabulary::from_tokens({"zz"}, 1);
    try {
        verify_fingerprints(c, other, c.schema);
        FAIL("expected a fingerprint error");
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointError::Kind::fingerprint);
    }
    AspectSchema schema = c.schema;
    schema.aspects[0].seeds.push_back("t5");
    CHECK_THROWS_AS(verify_fingerprints(c, c.vocab, schema), CheckpointError);
}
