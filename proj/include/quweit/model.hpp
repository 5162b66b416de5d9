#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quweit/parameter.hpp"
#include "quweit/random.hpp"
#include "quweit/tensor.hpp"
#include "quweit/weightless.hpp"

namespace quweit {

enum class ModelKind { Decoder, Encoder };
enum class BlockKind { Mlp, Weightless };

ModelKind model_kind_from_string(const std::string& s);
BlockKind block_kind_from_string(const std::string& s);
std::string to_string(ModelKind k);
std::string to_string(BlockKind k);

/// Weightless-block sizing relative to the host model; widths default to the
/// MLP scaling rule L1 = mlp_ratio*D, L2 = D*G when left empty.
struct WeightlessSpec {
    std::size_t bits_per_feature = 8;  // thermometer T
    std::vector<std::size_t> layer_widths;
    std::size_t fan_in = 6;
    std::size_t group_size = 1;
    std::string mode = "hard-efd";
    double temperature = 1.0 / 3.0;
    float theta_lr_mult = 1.0f;
    float encoded_lr_mult = 1.0f;
};

struct ModelConfig {
    ModelKind kind = ModelKind::Decoder;
    std::size_t n_layers = 2;
    std::size_t latent_dim = 64;   // D
    std::size_t n_heads = 4;
    std::size_t context = 128;     // N (tokens for decoder, patches for encoder)
    std::size_t vocab = 0;         // decoder only
    std::size_t patch_dim = 0;     // encoder only: values per patch
    std::size_t num_classes = 0;   // encoder only
    double mlp_ratio = 4.0;
    BlockKind block_kind = BlockKind::Mlp;
    std::optional<WeightlessSpec> weightless;
    bool causal = true;

    std::size_t head_dim() const { return latent_dim / n_heads; }
    /// require_vocab=false defers the decoder vocabulary check (it is filled
    /// in from the corpus at training time).
    void validate(bool require_vocab = true) const;
    WeightlessBlockConfig weightless_block_config(std::uint64_t seed) const;
};

/// Transformer with pre-norm residual blocks whose feed-forward sublayer is
/// either a GELU MLP or the weightless block; decoder (causal LM head) and
/// encoder (class-token head) variants.
class Model {
public:
    Model(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    /// Next-token logits [n x V] for one token sequence (n <= N).
    Tensor forward_tokens(std::span<const std::int32_t> tokens);
    /// Class logits [1 x C] for one image given as [P x patch_dim] patches.
    Tensor forward_patches(const Tensor& patches);

    /// Multi-head self-attention sublayer on [n x D]; causal per the config.
    Tensor attention_forward(Tensor x, std::size_t layer);
    /// Feed-forward sublayer on [n x D] rows (rows processed independently).
    Tensor feedforward(Tensor x, std::size_t layer);

    bool uses_weightless() const { return cfg_.block_kind == BlockKind::Weightless; }
    WeightlessBlock& weightless_block(std::size_t layer);
    const WeightlessBlock& weightless_block(std::size_t layer) const;
    bool calibrated() const;

    /// Fits every block's thermometer encoder from the given sequences,
    /// processing layers in order so earlier fitted blocks shape the
    /// activations seen by later ones.
    void calibrate(const std::vector<std::vector<std::int32_t>>& token_seqs);
    void calibrate_patches(const std::vector<Tensor>& patch_batches);

    /// Freeze all weightless blocks for export (int8 encodings, snapped
    /// thresholds).
    void quantize_weightless();

private:
    struct Layer {
        Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;
        Tensor wq, wk, wv, wo;
        Tensor mlp_w1, mlp_w2;                       // BlockKind::Mlp
        std::shared_ptr<WeightlessBlock> weightless;  // BlockKind::Weightless
    };

    Tensor attention(Tensor x, const Layer& layer);
    Tensor backbone(Tensor x);  // residual stack over [n x D]
    Tensor embed_tokens(std::span<const std::int32_t> tokens);
    Tensor embed_patches(const Tensor& patches);
    void calibrate_rows(std::vector<Tensor> xs);

    ModelConfig cfg_;
    ParameterStore params_;
    std::vector<Layer> layers_;
    Tensor wte_, wpe_, head_;           // decoder
    Tensor wpatch_, cls_token_;         // encoder
    Tensor lnf_gain_, lnf_bias_;
    static constexpr float kLnEps = 1e-5f;
};

/// Autoregressive sampling; temperature 0 is greedy argmax. Deterministic
/// for a fixed seed.
std::vector<std::int32_t> generate(Model& model, std::span<const std::int32_t> prompt,
                                   std::size_t steps, double temperature, std::uint64_t seed);

}  // namespace quweit
