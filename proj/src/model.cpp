#include "quweit/model.hpp"

#include <cmath>
#include <stdexcept>

#include "quweit/ops.hpp"

namespace quweit {

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "decoder") return ModelKind::Decoder;
    if (s == "encoder") return ModelKind::Encoder;
    throw std::invalid_argument("unknown model kind '" + s + "' (expected decoder or encoder)");
}

BlockKind block_kind_from_string(const std::string& s) {
    if (s == "mlp") return BlockKind::Mlp;
    if (s == "weightless") return BlockKind::Weightless;
    throw std::invalid_argument("unknown block kind '" + s + "' (expected mlp or weightless)");
}

std::string to_string(ModelKind k) { return k == ModelKind::Decoder ? "decoder" : "encoder"; }
std::string to_string(BlockKind k) { return k == BlockKind::Mlp ? "mlp" : "weightless"; }

void ModelConfig::validate(bool require_vocab) const {
    if (n_layers == 0 || latent_dim == 0 || n_heads == 0 || context == 0)
        throw std::invalid_argument("model config: layers, latent dim, heads, context must be positive");
    if (latent_dim % n_heads != 0)
        throw std::invalid_argument("model config: latent dim " + std::to_string(latent_dim) +
                                    " not divisible by " + std::to_string(n_heads) + " heads");
    if (!(mlp_ratio > 0)) throw std::invalid_argument("model config: mlp ratio must be positive");
    if (require_vocab && kind == ModelKind::Decoder && vocab == 0)
        throw std::invalid_argument("model config: decoder requires a vocabulary size");
    if (kind == ModelKind::Encoder && (patch_dim == 0 || num_classes == 0))
        throw std::invalid_argument("model config: encoder requires patch_dim and num_classes");
    if (block_kind == BlockKind::Weightless && !weightless)
        throw std::invalid_argument("model config: weightless block kind without weightless settings");
}

WeightlessBlockConfig ModelConfig::weightless_block_config(std::uint64_t seed) const {
    if (!weightless) throw std::logic_error("no weightless settings in config");
    const WeightlessSpec& spec = *weightless;
    WeightlessBlockConfig bc;
    bc.num_features = latent_dim;
    bc.bits_per_feature = spec.bits_per_feature;
    bc.output_dim = latent_dim;
    bc.group_size = spec.group_size;
    bc.fan_in = spec.fan_in;
    bc.mode = training_mode_from_string(spec.mode);
    bc.temperature = spec.temperature;
    bc.seed = seed;
    if (spec.layer_widths.empty()) {
        // same scaling rule as the MLP it replaces: hidden 4x, then D*G
        bc.layer_widths = {static_cast<std::size_t>(std::llround(mlp_ratio * double(latent_dim))),
                           latent_dim * spec.group_size};
    } else {
        bc.layer_widths = spec.layer_widths;
    }
    bc.validate();
    return bc;
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    const std::size_t d = cfg_.latent_dim;
    const std::size_t hidden = static_cast<std::size_t>(std::llround(cfg_.mlp_ratio * double(d)));

    auto dense = [&](std::size_t r, std::size_t c) {
        std::vector<float> w(r * c);
        for (auto& v : w) v = float(rng.normal(0.0, 0.02));
        return Tensor::from_data({r, c}, std::move(w));
    };

    if (cfg_.kind == ModelKind::Decoder) {
        wte_ = params_.add("wte", dense(cfg_.vocab, d));
        wpe_ = params_.add("wpe", dense(cfg_.context, d));
    } else {
        wpatch_ = params_.add("wpatch", dense(cfg_.patch_dim, d));
        cls_token_ = params_.add("cls_token", dense(1, d), 1.0f, false);
        wpe_ = params_.add("wpe", dense(cfg_.context + 1, d));
    }

    for (std::size_t i = 0; i < cfg_.n_layers; ++i) {
        Layer layer;
        const std::string prefix = "layer" + std::to_string(i) + ".";
        layer.ln1_gain = params_.add(prefix + "ln1.gain", Tensor::full({d}, 1.0f), 1.0f, false);
        layer.ln1_bias = params_.add(prefix + "ln1.bias", Tensor::zeros({d}), 1.0f, false);
        layer.wq = params_.add(prefix + "attn.wq", dense(d, d));
        layer.wk = params_.add(prefix + "attn.wk", dense(d, d));
        layer.wv = params_.add(prefix + "attn.wv", dense(d, d));
        layer.wo = params_.add(prefix + "attn.wo", dense(d, d));
        layer.ln2_gain = params_.add(prefix + "ln2.gain", Tensor::full({d}, 1.0f), 1.0f, false);
        layer.ln2_bias = params_.add(prefix + "ln2.bias", Tensor::zeros({d}), 1.0f, false);
        if (cfg_.block_kind == BlockKind::Mlp) {
            layer.mlp_w1 = params_.add(prefix + "ff.w1", dense(d, hidden));
            layer.mlp_w2 = params_.add(prefix + "ff.w2", dense(hidden, d));
        } else {
            Rng block_rng(rng.next_u64());
            auto bc = cfg_.weightless_block_config(seed);
            layer.weightless = std::make_shared<WeightlessBlock>(bc, block_rng);
            const WeightlessSpec& spec = *cfg_.weightless;
            auto& luts = layer.weightless->layers();
            for (std::size_t k = 0; k < luts.size(); ++k)
                params_.add(prefix + "ff.lut" + std::to_string(k) + ".theta", luts[k].theta,
                            spec.theta_lr_mult, false);
            params_.add(prefix + "ff.e", layer.weightless->summation().encoded, spec.encoded_lr_mult,
                        true);
        }
        layers_.push_back(std::move(layer));
    }

    lnf_gain_ = params_.add("ln_f.gain", Tensor::full({d}, 1.0f), 1.0f, false);
    lnf_bias_ = params_.add("ln_f.bias", Tensor::zeros({d}), 1.0f, false);

    if (cfg_.kind == ModelKind::Decoder)
        head_ = params_.add("head", dense(d, cfg_.vocab));
    else
        head_ = params_.add("head", dense(d, cfg_.num_classes));
}

Tensor Model::attention(Tensor x, const Layer& layer) {
    const std::size_t hd = cfg_.head_dim();
    Tensor q = matmul(x, layer.wq);
    Tensor k = matmul(x, layer.wk);
    Tensor v = matmul(x, layer.wv);
    std::vector<Tensor> heads;
    heads.reserve(cfg_.n_heads);
    const float inv_sqrt = 1.0f / std::sqrt(float(hd));
    for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
        Tensor qh = slice_cols(q, h * hd, hd);
        Tensor kh = slice_cols(k, h * hd, hd);
        Tensor vh = slice_cols(v, h * hd, hd);
        Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        if (cfg_.causal) scores = causal_mask(scores);
        Tensor att = softmax(scores, 1);
        heads.push_back(matmul(att, vh));
    }
    return matmul(concat_cols(heads), layer.wo);
}

Tensor Model::attention_forward(Tensor x, std::size_t layer) { return attention(x, layers_.at(layer)); }

Tensor Model::feedforward(Tensor x, std::size_t layer_idx) {
    Layer& layer = layers_.at(layer_idx);
    if (cfg_.block_kind == BlockKind::Mlp)
        return matmul(gelu(matmul(x, layer.mlp_w1)), layer.mlp_w2);
    return layer.weightless->forward(x);
}

Tensor Model::backbone(Tensor x) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Layer& layer = layers_[i];
        x = add(x, attention(layer_norm(x, layer.ln1_gain, layer.ln1_bias, kLnEps), layer));
        x = add(x, feedforward(layer_norm(x, layer.ln2_gain, layer.ln2_bias, kLnEps), i));
    }
    return layer_norm(x, lnf_gain_, lnf_bias_, kLnEps);
}

Tensor Model::embed_tokens(std::span<const std::int32_t> tokens) {
    if (tokens.empty()) throw std::invalid_argument("model: empty token sequence");
    if (tokens.size() > cfg_.context)
        throw std::invalid_argument("model: sequence length " + std::to_string(tokens.size()) +
                                    " exceeds context " + std::to_string(cfg_.context));
    std::vector<std::int32_t> ids(tokens.begin(), tokens.end());
    return add(embedding(wte_, ids), slice_rows(wpe_, 0, ids.size()));
}

Tensor Model::embed_patches(const Tensor& patches) {
    if (patches.ndim() != 2 || patches.rows() != cfg_.context || patches.cols() != cfg_.patch_dim)
        throw std::invalid_argument("model: patches " + shape_str(patches.shape()) + ", expected [" +
                                    std::to_string(cfg_.context) + "x" + std::to_string(cfg_.patch_dim) +
                                    "]");
    Tensor x = matmul(patches, wpatch_);
    x = concat_rows(std::vector<Tensor>{cls_token_, x});  // class token at row 0
    return add(x, slice_rows(wpe_, 0, cfg_.context + 1));
}

Tensor Model::forward_tokens(std::span<const std::int32_t> tokens) {
    if (cfg_.kind != ModelKind::Decoder) throw std::logic_error("forward_tokens on an encoder model");
    return matmul(backbone(embed_tokens(tokens)), head_);
}

Tensor Model::forward_patches(const Tensor& patches) {
    if (cfg_.kind != ModelKind::Encoder) throw std::logic_error("forward_patches on a decoder model");
    Tensor x = backbone(embed_patches(patches));
    return matmul(slice_rows(x, 0, 1), head_);
}

WeightlessBlock& Model::weightless_block(std::size_t layer) {
    if (!uses_weightless()) throw std::logic_error("model has no weightless blocks");
    return *layers_.at(layer).weightless;
}

const WeightlessBlock& Model::weightless_block(std::size_t layer) const {
    if (!uses_weightless()) throw std::logic_error("model has no weightless blocks");
    return *layers_.at(layer).weightless;
}

bool Model::calibrated() const {
    if (!uses_weightless()) return true;
    for (const auto& layer : layers_)
        if (!layer.weightless->fitted()) return false;
    return true;
}

void Model::calibrate_rows(std::vector<Tensor> xs) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Layer& layer = layers_[i];
        std::vector<Tensor> ff_inputs;
        for (auto& x : xs) {
            x = add(x, attention(layer_norm(x, layer.ln1_gain, layer.ln1_bias, kLnEps), layer));
            ff_inputs.push_back(layer_norm(x, layer.ln2_gain, layer.ln2_bias, kLnEps));
        }
        if (uses_weightless() && !layer.weightless->fitted())
            layer.weightless->fit_encoder(concat_rows(ff_inputs));
        for (std::size_t s = 0; s < xs.size(); ++s)
            xs[s] = add(xs[s], feedforward(ff_inputs[s], i));
    }
}

void Model::calibrate(const std::vector<std::vector<std::int32_t>>& token_seqs) {
    if (token_seqs.empty()) throw std::invalid_argument("calibrate: no sequences");
    std::vector<Tensor> xs;
    xs.reserve(token_seqs.size());
    for (const auto& seq : token_seqs) xs.push_back(embed_tokens(seq));
    calibrate_rows(std::move(xs));
}

void Model::calibrate_patches(const std::vector<Tensor>& patch_batches) {
    if (patch_batches.empty()) throw std::invalid_argument("calibrate: no patch batches");
    std::vector<Tensor> xs;
    xs.reserve(patch_batches.size());
    for (const auto& p : patch_batches) xs.push_back(embed_patches(p));
    calibrate_rows(std::move(xs));
}

void Model::quantize_weightless() {
    if (!uses_weightless()) return;
    for (auto& layer : layers_) layer.weightless->quantize();
}

std::vector<std::int32_t> generate(Model& model, std::span<const std::int32_t> prompt,
                                   std::size_t steps, double temperature, std::uint64_t seed) {
    if (model.config().kind != ModelKind::Decoder)
        throw std::logic_error("generate requires a decoder model");
    if (prompt.empty()) throw std::invalid_argument("generate: empty prompt");
    if (prompt.size() > model.config().context)
        throw std::invalid_argument("generate: prompt length " + std::to_string(prompt.size()) +
                                    " exceeds context " + std::to_string(model.config().context));
    Rng rng(seed);
    std::vector<std::int32_t> out(prompt.begin(), prompt.end());
    const std::size_t n_ctx = model.config().context;
    const std::size_t v = model.config().vocab;
    for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t start = out.size() > n_ctx ? out.size() - n_ctx : 0;
        std::span<const std::int32_t> ctx(out.data() + start, out.size() - start);
        Tensor logits = model.forward_tokens(ctx);
        const std::size_t last = logits.rows() - 1;
        std::int32_t next = 0;
        if (temperature <= 1e-8) {
            float best = logits.at2(last, 0);
            for (std::size_t j = 1; j < v; ++j)
                if (logits.at2(last, j) > best) {
                    best = logits.at2(last, j);
                    next = static_cast<std::int32_t>(j);
                }
        } else {
            std::vector<double> p(v);
            double mx = -1e30;
            for (std::size_t j = 0; j < v; ++j) mx = std::max(mx, double(logits.at2(last, j)) / temperature);
            double denom = 0;
            for (std::size_t j = 0; j < v; ++j) {
                p[j] = std::exp(double(logits.at2(last, j)) / temperature - mx);
                denom += p[j];
            }
            double u = rng.uniform() * denom;
            for (std::size_t j = 0; j < v; ++j) {
                u -= p[j];
                if (u <= 0) {
                    next = static_cast<std::int32_t>(j);
                    break;
                }
            }
        }
        out.push_back(next);
    }
    return out;
}

}  // namespace quweit
