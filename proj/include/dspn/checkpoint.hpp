#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dspn/config.hpp"
#include "dspn/corpus.hpp"
#include "dspn/errors.hpp"
#include "dspn/gradkernel.hpp"

namespace dspn {

class Model;

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public FormatError {
public:
    enum class Kind { bad_magic, version, truncated, checksum, fingerprint, malformed };
    CheckpointError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    ModelConfig model;
    TrainConfig train;
    AspectSchema schema;
    Vocabulary vocab;
    ParamSet params;
    std::size_t epoch = 0;
    double loss_total = 0.0;
    double loss_acd = 0.0;
    double loss_rp = 0.0;
};

// Layout: "DSPNCKPT", u32 version, u32 tensor count, per tensor
// (u32 name length, name, u32 rank, u32 dims..., f64 values), u32 text
// length, canonical key=value text, u64 FNV-1a checksum of all prior bytes.
std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws CheckpointError(fingerprint) unless the vocabulary and schema match
// the fingerprints recorded in the checkpoint.
void verify_fingerprints(const Checkpoint& ckpt, const Vocabulary& vocab, const AspectSchema& schema);

Checkpoint make_checkpoint(const Model& model, const ModelConfig& model_config, const TrainConfig& train);

// Rebuilds the model; precomputed-mode checkpoints need the embedding store.
Model model_from_checkpoint(const Checkpoint& ckpt, std::shared_ptr<const PrecomputedStore> store = nullptr);

}  // namespace dspn
