#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "quweit/config.hpp"
#include "quweit/model.hpp"
#include "quweit/optim.hpp"

namespace quweit {

constexpr int kCheckpointFormatVersion = 1;

struct TensorBlob {
    Shape shape;
    std::vector<float> data;
};

/// Per-LUT-layer export data: the mapping and the packed entry sign bits
/// (one hex string per LUT, 2^n bits, address 0 is the least significant).
struct LutFragment {
    std::size_t num_luts = 0;
    std::size_t fan_in = 0;
    std::vector<std::int32_t> mapping;
    std::vector<std::string> init_hex;
};

/// Everything the netlist generator needs for one weightless block.
struct WeightlessFragment {
    std::size_t layer_index = 0;
    std::size_t features = 0;
    std::size_t bits_per_feature = 0;
    std::size_t output_dim = 0;
    std::size_t group_size = 0;
    float surrogate_width = 1.0f;
    std::vector<float> thresholds;  // [F x T]
    std::vector<LutFragment> layers;
    std::vector<float> encoded;  // [D x G]
    std::optional<float> quant_scale;
    std::vector<std::int32_t> quant_levels;

    bool quantized() const { return quant_scale.has_value(); }
};

struct Checkpoint {
    int format_version = kCheckpointFormatVersion;
    ModelConfig model;
    std::map<std::string, TensorBlob> params;
    std::vector<WeightlessFragment> weightless;
    std::map<std::string, AdamW::Slot> optimizer_slots;
    std::uint64_t optimizer_steps = 0;
    std::uint64_t optimizer_rejected = 0;
    std::uint64_t step = 0;
    std::string rng_state;
    std::string digest;  // SHA-256 of the canonical payload, filled on save
};

std::string pack_theta_signs(const Tensor& theta_row_major, std::size_t lut, std::size_t table_size);
std::uint64_t parse_init_hex(const std::string& hex, std::size_t table_size);

/// Deep-copies the model (and optionally optimizer) state.
Checkpoint snapshot(const Model& model, const AdamW* opt, std::uint64_t step,
                    const std::string& rng_state);

/// Rebuilds a model from a checkpoint: parameters, thermometer thresholds,
/// LUT mappings and quantization state all restored bit-exactly.
Model restore_model(const Checkpoint& ckpt);
void restore_optimizer(AdamW& opt, const Checkpoint& ckpt);

/// Copies every parameter whose name and shape match from a (possibly
/// differently-configured) checkpoint into the model; returns the number
/// copied. Used to seed a weightless model from a trained baseline.
std::size_t warm_start(Model& model, const Checkpoint& ckpt);

json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const json& j);

/// SHA-256 of the canonical (digest-free) payload.
std::string checkpoint_digest(const Checkpoint& ckpt);

/// Serialization with content digest; load verifies the digest and the
/// format version and fails loudly on any mismatch.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace quweit
