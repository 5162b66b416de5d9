#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "quweit/random.hpp"
#include "quweit/tensor.hpp"

namespace quweit {

/// Character-level corpus with a byte vocabulary built from the unique
/// symbols of the file, split front/back into train and validation.
class TextDataset {
public:
    static TextDataset load(const std::string& path, double split_fraction);
    static TextDataset from_string(const std::string& text, double split_fraction);

    std::size_t vocab_size() const { return vocab_.size(); }
    const std::vector<char>& vocab() const { return vocab_; }

    std::vector<std::int32_t> encode(const std::string& s) const;
    std::string decode(std::span<const std::int32_t> ids) const;

    std::span<const std::int32_t> train() const { return {ids_.data(), train_len_}; }
    std::span<const std::int32_t> val() const { return {ids_.data() + train_len_, ids_.size() - train_len_}; }

private:
    std::vector<char> vocab_;            // sorted unique symbols
    std::int32_t char_to_id_[256];
    std::vector<std::int32_t> ids_;
    std::size_t train_len_ = 0;
};

/// B offset-sampled (input, target) windows; targets are inputs shifted by
/// one. Both are returned flattened [B*N].
std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> sample_batch(
    std::span<const std::int32_t> split, std::size_t batch, std::size_t context, Rng& rng);

/// Deterministic playscript-style character corpus used for desk-scale
/// language runs when no external text file is supplied.
std::string synthetic_playscript(std::uint64_t seed, std::size_t approx_bytes);

/// Synthetic two-class patch dataset for the vision smoke test: class 0 has
/// a bright top-left patch, class 1 a bright bottom-right patch, plus noise.
struct VisionSample {
    Tensor patches;  // [P x patch_dim]
    std::int32_t label;
};
std::vector<VisionSample> synthetic_vision_set(std::size_t count, std::size_t patches,
                                               std::size_t patch_dim, Rng& rng);

}  // namespace quweit
