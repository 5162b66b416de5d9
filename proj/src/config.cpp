#include "quweit/config.hpp"

#include <set>
#include <stdexcept>

namespace quweit {

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw std::invalid_argument("unknown config key '" + where + "." + it.key() + "'");
}

}  // namespace

json model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["kind"] = to_string(cfg.kind);
    j["n_layers"] = cfg.n_layers;
    j["latent_dim"] = cfg.latent_dim;
    j["n_heads"] = cfg.n_heads;
    j["context"] = cfg.context;
    j["vocab"] = cfg.vocab;
    j["patch_dim"] = cfg.patch_dim;
    j["num_classes"] = cfg.num_classes;
    j["mlp_ratio"] = cfg.mlp_ratio;
    j["block_kind"] = to_string(cfg.block_kind);
    j["causal"] = cfg.causal;
    if (cfg.weightless) {
        const auto& w = *cfg.weightless;
        json wj;
        wj["bits_per_feature"] = w.bits_per_feature;
        wj["layer_widths"] = w.layer_widths;
        wj["fan_in"] = w.fan_in;
        wj["group_size"] = w.group_size;
        wj["mode"] = w.mode;
        wj["temperature"] = w.temperature;
        wj["theta_lr_mult"] = w.theta_lr_mult;
        wj["encoded_lr_mult"] = w.encoded_lr_mult;
        j["weightless"] = wj;
    }
    return j;
}

ModelConfig model_config_from_json(const json& j) {
    reject_unknown(j,
                   {"kind", "n_layers", "latent_dim", "n_heads", "context", "vocab", "patch_dim",
                    "num_classes", "mlp_ratio", "block_kind", "causal", "weightless"},
                   "model");
    ModelConfig cfg;
    if (j.contains("kind")) cfg.kind = model_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("n_layers")) cfg.n_layers = j.at("n_layers").get<std::size_t>();
    if (j.contains("latent_dim")) cfg.latent_dim = j.at("latent_dim").get<std::size_t>();
    if (j.contains("n_heads")) cfg.n_heads = j.at("n_heads").get<std::size_t>();
    if (j.contains("context")) cfg.context = j.at("context").get<std::size_t>();
    if (j.contains("vocab")) cfg.vocab = j.at("vocab").get<std::size_t>();
    if (j.contains("patch_dim")) cfg.patch_dim = j.at("patch_dim").get<std::size_t>();
    if (j.contains("num_classes")) cfg.num_classes = j.at("num_classes").get<std::size_t>();
    if (j.contains("mlp_ratio")) cfg.mlp_ratio = j.at("mlp_ratio").get<double>();
    if (j.contains("block_kind")) cfg.block_kind = block_kind_from_string(j.at("block_kind").get<std::string>());
    if (j.contains("causal")) cfg.causal = j.at("causal").get<bool>();
    if (j.contains("weightless") && !j.at("weightless").is_null()) {
        const json& wj = j.at("weightless");
        reject_unknown(wj,
                       {"bits_per_feature", "layer_widths", "fan_in", "group_size", "mode",
                        "temperature", "theta_lr_mult", "encoded_lr_mult"},
                       "model.weightless");
        WeightlessSpec w;
        if (wj.contains("bits_per_feature")) w.bits_per_feature = wj.at("bits_per_feature").get<std::size_t>();
        if (wj.contains("layer_widths")) w.layer_widths = wj.at("layer_widths").get<std::vector<std::size_t>>();
        if (wj.contains("fan_in")) w.fan_in = wj.at("fan_in").get<std::size_t>();
        if (wj.contains("group_size")) w.group_size = wj.at("group_size").get<std::size_t>();
        if (wj.contains("mode")) w.mode = wj.at("mode").get<std::string>();
        if (wj.contains("temperature")) w.temperature = wj.at("temperature").get<double>();
        if (wj.contains("theta_lr_mult")) w.theta_lr_mult = wj.at("theta_lr_mult").get<float>();
        if (wj.contains("encoded_lr_mult")) w.encoded_lr_mult = wj.at("encoded_lr_mult").get<float>();
        cfg.weightless = w;
    } else if (cfg.block_kind == BlockKind::Weightless) {
        cfg.weightless = WeightlessSpec{};
    }
    cfg.causal = cfg.kind == ModelKind::Decoder ? cfg.causal : false;
    cfg.validate(/*require_vocab=*/false);
    return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["batch_size"] = cfg.batch_size;
    j["context"] = cfg.context;
    j["steps"] = cfg.steps;
    j["lr"] = cfg.lr;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["eps"] = cfg.eps;
    j["weight_decay"] = cfg.weight_decay;
    j["warmup_steps"] = cfg.warmup_steps;
    j["lr_floor"] = cfg.lr_floor;
    j["grad_clip"] = cfg.grad_clip;
    j["seed"] = cfg.seed;
    j["eval_interval"] = cfg.eval_interval;
    j["eval_batches"] = cfg.eval_batches;
    j["log_interval"] = cfg.log_interval;
    j["calibration_sequences"] = cfg.calibration_sequences;
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    reject_unknown(j,
                   {"batch_size", "context", "steps", "lr", "beta1", "beta2", "eps", "weight_decay",
                    "warmup_steps", "lr_floor", "grad_clip", "seed", "eval_interval", "eval_batches",
                    "log_interval", "calibration_sequences"},
                   "train");
    TrainConfig cfg;
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("context")) cfg.context = j.at("context").get<std::size_t>();
    if (j.contains("steps")) cfg.steps = j.at("steps").get<std::size_t>();
    if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
    if (j.contains("beta1")) cfg.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2")) cfg.beta2 = j.at("beta2").get<double>();
    if (j.contains("eps")) cfg.eps = j.at("eps").get<double>();
    if (j.contains("weight_decay")) cfg.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("warmup_steps")) cfg.warmup_steps = j.at("warmup_steps").get<std::size_t>();
    if (j.contains("lr_floor")) cfg.lr_floor = j.at("lr_floor").get<double>();
    if (j.contains("grad_clip")) cfg.grad_clip = j.at("grad_clip").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("eval_interval")) cfg.eval_interval = j.at("eval_interval").get<std::size_t>();
    if (j.contains("eval_batches")) cfg.eval_batches = j.at("eval_batches").get<std::size_t>();
    if (j.contains("log_interval")) cfg.log_interval = j.at("log_interval").get<std::size_t>();
    if (j.contains("calibration_sequences"))
        cfg.calibration_sequences = j.at("calibration_sequences").get<std::size_t>();
    cfg.validate();
    return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
    json j;
    j["model"] = model_config_to_json(cfg.model);
    j["train"] = train_config_to_json(cfg.train);
    return j;
}

RunConfig run_config_from_json(const json& j) {
    reject_unknown(j, {"model", "train"}, "config");
    RunConfig cfg;
    if (j.contains("model")) cfg.model = model_config_from_json(j.at("model"));
    if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
    return cfg;
}

RunConfig preset(const std::string& name) {
    RunConfig cfg;
    if (name == "gpt3") {
        cfg.model.kind = ModelKind::Decoder;
        cfg.model.n_layers = 96;
        cfg.model.latent_dim = 12288;
        cfg.model.n_heads = 96;
        cfg.model.context = 4096;
        cfg.model.vocab = 50257;
        cfg.model.causal = true;
        return cfg;
    }
    if (name == "ivit-t") {
        cfg.model.kind = ModelKind::Encoder;
        cfg.model.n_layers = 12;
        cfg.model.latent_dim = 192;
        cfg.model.n_heads = 3;
        cfg.model.context = 196;  // 14x14 patches; class token appended internally
        cfg.model.patch_dim = 768;  // 16x16x3 pixels per patch
        cfg.model.num_classes = 10;
        cfg.model.causal = false;
        cfg.model.block_kind = BlockKind::Weightless;
        WeightlessSpec w;
        w.bits_per_feature = 8;
        w.layer_widths = {768, 192};
        w.fan_in = 6;
        w.group_size = 1;
        cfg.model.weightless = w;
        return cfg;
    }
    if (name == "nano-shakespeare") {
        cfg.model.kind = ModelKind::Decoder;
        cfg.model.n_layers = 2;
        cfg.model.latent_dim = 64;
        cfg.model.n_heads = 4;
        cfg.model.context = 128;
        cfg.model.vocab = 0;  // filled from the corpus
        cfg.model.causal = true;
        WeightlessSpec w;
        w.bits_per_feature = 8;
        // layer widths left empty: derived as {mlp_ratio*D, D*G} so latent-dim
        // overrides rescale the block the same way they rescale the MLP
        w.fan_in = 6;
        w.group_size = 1;
        w.theta_lr_mult = 20.0f;
        cfg.model.weightless = w;  // used when --mode weightless selects the block
        cfg.train.batch_size = 16;
        cfg.train.context = 128;
        cfg.train.steps = 2000;
        return cfg;
    }
    throw std::invalid_argument("unknown preset '" + name + "' (available: gpt3, ivit-t, nano-shakespeare)");
}

std::vector<std::string> preset_names() { return {"gpt3", "ivit-t", "nano-shakespeare"}; }

void apply_override(json& doc, const std::string& key_value) {
    const auto eq = key_value.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("override '" + key_value + "' must look like key.path=value");
    const std::string path = key_value.substr(0, eq);
    const std::string value = key_value.substr(eq + 1);

    json* node = &doc;
    std::size_t pos = 0;
    while (true) {
        const auto dot = path.find('.', pos);
        const std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (key.empty()) throw std::invalid_argument("override '" + key_value + "' has an empty key");
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        pos = dot + 1;
    }
}

}  // namespace quweit
