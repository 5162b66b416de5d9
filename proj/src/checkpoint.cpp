#include "quweit/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "quweit/digest.hpp"

namespace quweit {

std::string pack_theta_signs(const Tensor& theta, std::size_t lut, std::size_t table_size) {
    std::uint64_t bits = 0;
    for (std::size_t a = 0; a < table_size; ++a)
        if (theta.at(lut * table_size + a) > 0.0f) bits |= (std::uint64_t{1} << a);
    const std::size_t hex_chars = (table_size + 3) / 4;
    char buf[18];
    std::snprintf(buf, sizeof(buf), "%0*llx", static_cast<int>(hex_chars),
                  static_cast<unsigned long long>(bits));
    return buf;
}

std::uint64_t parse_init_hex(const std::string& hex, std::size_t table_size) {
    if (hex.empty() || hex.size() > 16) throw std::runtime_error("invalid LUT init hex '" + hex + "'");
    const std::uint64_t bits = std::stoull(hex, nullptr, 16);
    if (table_size < 64 && bits >> table_size)
        throw std::runtime_error("LUT init hex '" + hex + "' wider than table size");
    return bits;
}

namespace {

WeightlessFragment fragment_of(const WeightlessBlock& block, std::size_t layer_index) {
    WeightlessFragment f;
    const auto& cfg = block.config();
    f.layer_index = layer_index;
    f.features = cfg.num_features;
    f.bits_per_feature = cfg.bits_per_feature;
    f.output_dim = cfg.output_dim;
    f.group_size = cfg.group_size;
    f.surrogate_width = block.encoder().surrogate_width;
    f.thresholds = block.encoder().thresholds;
    for (const auto& lut : block.layers()) {
        LutFragment lf;
        lf.num_luts = lut.num_luts;
        lf.fan_in = lut.fan_in;
        lf.mapping = lut.mapping;
        for (std::size_t l = 0; l < lut.num_luts; ++l)
            lf.init_hex.push_back(pack_theta_signs(lut.theta, l, lut.table_size()));
        f.layers.push_back(std::move(lf));
    }
    const auto& cs = block.summation();
    f.encoded.assign(cs.encoded.data().begin(), cs.encoded.data().end());
    if (cs.quant) {
        f.quant_scale = cs.quant->scale;
        f.quant_levels.assign(cs.quant->levels.begin(), cs.quant->levels.end());
    }
    return f;
}

}  // namespace

Checkpoint snapshot(const Model& model, const AdamW* opt, std::uint64_t step,
                    const std::string& rng_state) {
    Checkpoint ckpt;
    ckpt.model = model.config();
    for (const auto& p : model.params().all()) {
        TensorBlob blob;
        blob.shape = p.tensor.shape();
        blob.data.assign(p.tensor.data().begin(), p.tensor.data().end());
        ckpt.params.emplace(p.name, std::move(blob));
    }
    if (model.uses_weightless())
        for (std::size_t i = 0; i < model.config().n_layers; ++i)
            ckpt.weightless.push_back(fragment_of(model.weightless_block(i), i));
    if (opt) {
        ckpt.optimizer_slots = opt->slots();
        ckpt.optimizer_steps = opt->steps_taken();
        ckpt.optimizer_rejected = opt->rejected_steps();
    }
    ckpt.step = step;
    ckpt.rng_state = rng_state;
    return ckpt;
}

Model restore_model(const Checkpoint& ckpt) {
    Model model(ckpt.model, /*seed=*/0);
    for (auto& p : model.params().all()) {
        auto it = ckpt.params.find(p.name);
        if (it == ckpt.params.end())
            throw std::runtime_error("checkpoint is missing parameter '" + p.name + "'");
        if (it->second.shape != p.tensor.shape())
            throw std::runtime_error("checkpoint parameter '" + p.name + "' has shape " +
                                     shape_str(it->second.shape) + ", model expects " +
                                     shape_str(p.tensor.shape()));
        std::copy(it->second.data.begin(), it->second.data.end(), p.tensor.data().begin());
    }
    if (model.uses_weightless()) {
        if (ckpt.weightless.size() != model.config().n_layers)
            throw std::runtime_error("checkpoint schema error: weightless model expects " +
                                     std::to_string(model.config().n_layers) + " fragments, found " +
                                     std::to_string(ckpt.weightless.size()));
        for (const auto& f : ckpt.weightless) {
            WeightlessBlock& block = model.weightless_block(f.layer_index);
            auto& enc = block.encoder();
            if (f.thresholds.size() != f.features * f.bits_per_feature)
                throw std::runtime_error("checkpoint fragment: threshold matrix size mismatch");
            enc.num_features = f.features;
            enc.bits_per_feature = f.bits_per_feature;
            enc.thresholds = f.thresholds;
            enc.surrogate_width = f.surrogate_width;
            enc.validate();
            auto& luts = block.layers();
            if (luts.size() != f.layers.size())
                throw std::runtime_error("checkpoint fragment: LUT layer count mismatch");
            for (std::size_t k = 0; k < luts.size(); ++k) {
                const LutFragment& lf = f.layers[k];
                if (lf.num_luts != luts[k].num_luts || lf.fan_in != luts[k].fan_in)
                    throw std::runtime_error("checkpoint fragment: LUT layer geometry mismatch");
                luts[k].mapping = lf.mapping;
                // the sign bits are derived from theta; a disagreement means corruption
                for (std::size_t l = 0; l < lf.num_luts; ++l)
                    if (pack_theta_signs(luts[k].theta, l, luts[k].table_size()) != lf.init_hex[l])
                        throw std::runtime_error(
                            "checkpoint fragment: LUT init bits disagree with theta signs");
                luts[k].validate();
            }
            auto& cs = block.summation();
            if (f.quantized()) {
                ConditionalSummation::Quantization q;
                q.scale = *f.quant_scale;
                q.levels.reserve(f.quant_levels.size());
                for (auto v : f.quant_levels) q.levels.push_back(static_cast<std::int8_t>(v));
                q.dequant.resize(q.levels.size());
                for (std::size_t i = 0; i < q.levels.size(); ++i) q.dequant[i] = q.scale * float(q.levels[i]);
                cs.quant = std::move(q);
            }
            block.validate();
        }
    }
    return model;
}

void restore_optimizer(AdamW& opt, const Checkpoint& ckpt) {
    opt.slots() = ckpt.optimizer_slots;
    opt.set_counters(ckpt.optimizer_steps, ckpt.optimizer_rejected);
}

std::size_t warm_start(Model& model, const Checkpoint& ckpt) {
    std::size_t copied = 0;
    for (auto& p : model.params().all()) {
        auto it = ckpt.params.find(p.name);
        if (it == ckpt.params.end() || it->second.shape != p.tensor.shape()) continue;
        std::copy(it->second.data.begin(), it->second.data.end(), p.tensor.data().begin());
        ++copied;
    }
    return copied;
}

json checkpoint_to_json(const Checkpoint& ckpt) {
    json j;
    j["format_version"] = ckpt.format_version;
    j["model"] = model_config_to_json(ckpt.model);
    json params = json::object();
    for (const auto& [name, blob] : ckpt.params) {
        params[name] = {{"shape", blob.shape}, {"data", blob.data}};
    }
    j["params"] = params;
    json frags = json::array();
    for (const auto& f : ckpt.weightless) {
        json fj;
        fj["layer_index"] = f.layer_index;
        fj["features"] = f.features;
        fj["bits_per_feature"] = f.bits_per_feature;
        fj["output_dim"] = f.output_dim;
        fj["group_size"] = f.group_size;
        fj["surrogate_width"] = f.surrogate_width;
        fj["thresholds"] = f.thresholds;
        json layers = json::array();
        for (const auto& lf : f.layers)
            layers.push_back({{"num_luts", lf.num_luts},
                              {"fan_in", lf.fan_in},
                              {"mapping", lf.mapping},
                              {"init_hex", lf.init_hex}});
        fj["layers"] = layers;
        fj["encoded"] = f.encoded;
        if (f.quantized()) fj["quant"] = {{"scale", *f.quant_scale}, {"levels", f.quant_levels}};
        frags.push_back(fj);
    }
    j["weightless"] = frags;
    json slots = json::object();
    for (const auto& [name, slot] : ckpt.optimizer_slots)
        slots[name] = {{"m", slot.m}, {"v", slot.v}};
    j["optimizer"] = {{"steps", ckpt.optimizer_steps},
                      {"rejected", ckpt.optimizer_rejected},
                      {"slots", slots}};
    j["step"] = ckpt.step;
    j["rng_state"] = ckpt.rng_state;
    return j;
}

Checkpoint checkpoint_from_json(const json& j) {
    Checkpoint ckpt;
    ckpt.format_version = j.at("format_version").get<int>();
    if (ckpt.format_version != kCheckpointFormatVersion)
        throw std::runtime_error("checkpoint format version " + std::to_string(ckpt.format_version) +
                                 " unsupported (expected " + std::to_string(kCheckpointFormatVersion) + ")");
    ckpt.model = model_config_from_json(j.at("model"));
    for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it) {
        TensorBlob blob;
        blob.shape = it.value().at("shape").get<Shape>();
        blob.data = it.value().at("data").get<std::vector<float>>();
        if (blob.data.size() != shape_numel(blob.shape))
            throw std::runtime_error("checkpoint parameter '" + it.key() + "' data/shape mismatch");
        ckpt.params.emplace(it.key(), std::move(blob));
    }
    for (const auto& fj : j.at("weightless")) {
        WeightlessFragment f;
        f.layer_index = fj.at("layer_index").get<std::size_t>();
        f.features = fj.at("features").get<std::size_t>();
        f.bits_per_feature = fj.at("bits_per_feature").get<std::size_t>();
        f.output_dim = fj.at("output_dim").get<std::size_t>();
        f.group_size = fj.at("group_size").get<std::size_t>();
        f.surrogate_width = fj.at("surrogate_width").get<float>();
        f.thresholds = fj.at("thresholds").get<std::vector<float>>();
        for (const auto& lj : fj.at("layers")) {
            LutFragment lf;
            lf.num_luts = lj.at("num_luts").get<std::size_t>();
            lf.fan_in = lj.at("fan_in").get<std::size_t>();
            lf.mapping = lj.at("mapping").get<std::vector<std::int32_t>>();
            lf.init_hex = lj.at("init_hex").get<std::vector<std::string>>();
            if (lf.init_hex.size() != lf.num_luts)
                throw std::runtime_error("checkpoint fragment: init hex count mismatch");
            f.layers.push_back(std::move(lf));
        }
        f.encoded = fj.at("encoded").get<std::vector<float>>();
        if (fj.contains("quant")) {
            f.quant_scale = fj.at("quant").at("scale").get<float>();
            f.quant_levels = fj.at("quant").at("levels").get<std::vector<std::int32_t>>();
        }
        ckpt.weightless.push_back(std::move(f));
    }
    if (ckpt.model.block_kind == BlockKind::Weightless &&
        ckpt.weightless.size() != ckpt.model.n_layers)
        throw std::runtime_error("checkpoint schema error: weightless model requires one fragment per layer");
    const json& oj = j.at("optimizer");
    ckpt.optimizer_steps = oj.at("steps").get<std::uint64_t>();
    ckpt.optimizer_rejected = oj.at("rejected").get<std::uint64_t>();
    for (auto it = oj.at("slots").begin(); it != oj.at("slots").end(); ++it) {
        AdamW::Slot slot;
        slot.m = it.value().at("m").get<std::vector<float>>();
        slot.v = it.value().at("v").get<std::vector<float>>();
        ckpt.optimizer_slots.emplace(it.key(), std::move(slot));
    }
    ckpt.step = j.at("step").get<std::uint64_t>();
    ckpt.rng_state = j.at("rng_state").get<std::string>();
    if (j.contains("digest")) ckpt.digest = j.at("digest").get<std::string>();
    return ckpt;
}

std::string checkpoint_digest(const Checkpoint& ckpt) {
    return sha256_hex(checkpoint_to_json(ckpt).dump());
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json j = checkpoint_to_json(ckpt);
    const std::string canonical = j.dump();
    j["digest"] = sha256_hex(canonical);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint to '" + path + "'");
    out << j.dump(1);
    out << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint from '" + path + "'");
    json j = json::parse(in, nullptr, /*allow_exceptions=*/true);
    if (!j.contains("digest")) throw std::runtime_error("checkpoint has no digest field");
    const std::string stored = j.at("digest").get<std::string>();
    j.erase("digest");
    const std::string actual = sha256_hex(j.dump());
    if (stored != actual)
        throw std::runtime_error("checkpoint digest mismatch: file is corrupt (stored " + stored +
                                 ", computed " + actual + ")");
    Checkpoint ckpt = checkpoint_from_json(j);
    ckpt.digest = stored;
    return ckpt;
}

}  // namespace quweit
