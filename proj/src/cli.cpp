#include "quweit/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "quweit/checkpoint.hpp"
#include "quweit/config.hpp"
#include "quweit/costmodel.hpp"
#include "quweit/dataset.hpp"
#include "quweit/model.hpp"
#include "quweit/netlist.hpp"
#include "quweit/trainer.hpp"
#include "quweit/workload.hpp"

namespace quweit {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr std::uint64_t kDefaultCorpusSeed = 1;
constexpr std::size_t kDefaultCorpusBytes = 1 << 19;

struct CommonOpts {
    std::string config_path;
    std::string preset_name;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::string mode;
    long long seed = -1;
};

RunConfig resolve_config(const CommonOpts& o) {
    json doc;
    if (!o.preset_name.empty() && !o.config_path.empty())
        throw UsageError("--preset and --config are mutually exclusive");
    try {
        if (!o.preset_name.empty()) {
            doc = run_config_to_json(preset(o.preset_name));
        } else if (!o.config_path.empty()) {
            std::ifstream in(o.config_path);
            if (!in) throw UsageError("cannot open config file '" + o.config_path + "'");
            doc = json::parse(in);
        } else {
            throw UsageError("either --preset or --config is required");
        }
        for (const auto& kv : o.overrides) apply_override(doc, kv);
        if (!o.mode.empty()) doc["model"]["block_kind"] = o.mode;
        if (o.seed >= 0) doc["train"]["seed"] = static_cast<std::uint64_t>(o.seed);
        return run_config_from_json(doc);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    } catch (const json::exception& e) {
        throw UsageError(std::string("config parse error: ") + e.what());
    }
}

void ensure_out(const std::string& dir) {
    if (dir.empty()) throw UsageError("--out directory is required for this command");
    fs::create_directories(dir);
}

TextDataset open_corpus(const std::string& data_path) {
    if (!data_path.empty()) return TextDataset::load(data_path, 0.9);
    return TextDataset::from_string(synthetic_playscript(kDefaultCorpusSeed, kDefaultCorpusBytes), 0.9);
}

cost::HardwareProfile resolve_profile(const std::string& spec) {
    if (spec.find(".json") != std::string::npos || spec.find('/') != std::string::npos) {
        std::ifstream in(spec);
        if (!in) throw UsageError("cannot open profile file '" + spec + "'");
        return cost::profile_from_json(json::parse(in));
    }
    try {
        return cost::profile_by_label(spec);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

int cmd_train(const CommonOpts& o, const std::string& data_path, const std::string& init_from) {
    RunConfig cfg = resolve_config(o);
    ensure_out(o.out_dir);
    TextDataset ds = open_corpus(data_path);
    if (cfg.model.vocab == 0) cfg.model.vocab = ds.vocab_size();

    Model model(cfg.model, cfg.train.seed);
    if (!init_from.empty()) {
        const std::size_t copied = warm_start(model, load_checkpoint(init_from));
        std::cout << "warm start: copied " << copied << " parameter tensors from " << init_from
                  << "\n";
    }
    TrainSinks sinks;
    sinks.metrics_path = (fs::path(o.out_dir) / "metrics.csv").string();
    sinks.console = &std::cout;
    TrainResult result = train(model, ds, cfg.train, sinks);

    const std::string ckpt_path = (fs::path(o.out_dir) / "checkpoint.json").string();
    save_checkpoint(result.best, ckpt_path);
    std::cout << "best val loss " << result.best_val_loss << " at step " << result.best_step << "\n";
    std::cout << "checkpoint: " << ckpt_path << "\n";

    if (cfg.model.block_kind == BlockKind::Weightless) {
        Model frozen = restore_model(load_checkpoint(ckpt_path));
        frozen.quantize_weightless();
        Checkpoint qckpt = snapshot(frozen, nullptr, result.best_step, result.best.rng_state);
        const std::string qpath = (fs::path(o.out_dir) / "checkpoint_quantized.json").string();
        save_checkpoint(qckpt, qpath);
        std::cout << "quantized checkpoint: " << qpath << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, std::size_t batches) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model model = restore_model(ckpt);
    TextDataset ds = open_corpus(data_path);
    if (model.config().vocab != ds.vocab_size())
        throw std::runtime_error("corpus vocab " + std::to_string(ds.vocab_size()) +
                                 " does not match checkpoint vocab " +
                                 std::to_string(model.config().vocab));
    const double loss = evaluate(model, ds.val(), batches, 8, model.config().context, 123);
    std::cout << "val loss " << loss << " over " << batches << " batches\n";
    return 0;
}

int cmd_generate(const std::string& ckpt_path, const std::string& data_path, const std::string& prompt,
                 std::size_t steps, double temperature, std::uint64_t seed) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model model = restore_model(ckpt);
    TextDataset ds = open_corpus(data_path);
    const auto ids = ds.encode(prompt.empty() ? "\n" : prompt);
    const auto out = generate(model, ids, steps, temperature, seed);
    std::cout << ds.decode(out) << "\n";
    return 0;
}

int cmd_workload(const CommonOpts& o, bool as_json) {
    RunConfig cfg = resolve_config(o);
    WorkloadBreakdown wl = count_workload(cfg.model);
    if (as_json) {
        json j;
        j["stages"] = json::array();
        for (const auto& s : wl.stages)
            j["stages"].push_back(
                {{"stage", s.name}, {"params", s.params}, {"macs_per_token", s.macs_per_token}});
        j["total_params"] = wl.total_params;
        j["total_macs"] = wl.total_macs;
        j["mlp_param_fraction"] = wl.mlp_param_fraction;
        j["mlp_mac_fraction"] = wl.mlp_mac_fraction;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << workload_text(wl);
    }
    if (!o.out_dir.empty()) {
        ensure_out(o.out_dir);
        std::ofstream out(fs::path(o.out_dir) / "workload.txt");
        out << workload_text(wl);
    }
    return 0;
}

int cmd_cost(const CommonOpts& o, const std::string& profile_spec, bool do_compare, bool table,
             std::uint64_t factor, bool as_json) {
    RunConfig cfg = resolve_config(o);
    cost::HardwareProfile profile = resolve_profile(profile_spec);
    auto csv_out = [&](const std::string& name, const std::string& csv) {
        if (o.out_dir.empty()) return;
        ensure_out(o.out_dir);
        std::ofstream out(fs::path(o.out_dir) / name, std::ios::binary);
        out << csv;
    };
    if (table) {
        const std::string family = profile.label.substr(0, profile.label.find('-'));
        std::vector<cost::HardwareProfile> systolic;
        for (const auto& p : cost::builtin_profiles())
            if (p.label.rfind(family, 0) == 0) systolic.push_back(p);
        auto rows = cost::mlp_vs_pe_table(cfg.model, systolic, profile);
        std::cout << (as_json ? cost::mlp_vs_pe_json(rows).dump(2) + "\n" : cost::mlp_vs_pe_text(rows));
        csv_out("mlp_vs_pe.csv", cost::mlp_vs_pe_csv(rows));
        return 0;
    }
    if (do_compare) {
        auto baseline = cost::encoder_layer_report(cfg.model, profile, false, factor);
        auto quweit = cost::encoder_layer_report(cfg.model, profile, true, factor);
        auto report = cost::compare(baseline, quweit);
        std::cout << (as_json ? cost::comparison_to_json(report).dump(2) + "\n"
                              : cost::comparison_text(report));
        csv_out("cost_baseline.csv", cost::stage_reports_csv(report.baseline_stages));
        csv_out("cost_quweit.csv", cost::stage_reports_csv(report.quweit_stages));
        return 0;
    }
    const bool weightless = cfg.model.block_kind == BlockKind::Weightless;
    auto stages = cost::encoder_layer_report(cfg.model, profile, weightless, factor);
    std::cout << (as_json ? cost::stage_reports_to_json(stages).dump(2) + "\n"
                          : cost::stage_reports_text(stages));
    csv_out("cost_stages.csv", cost::stage_reports_csv(stages));
    return 0;
}

int cmd_export_netlist(const std::string& ckpt_path, long long block, const std::string& out_dir) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    ensure_out(out_dir);
    std::vector<std::size_t> blocks;
    if (block >= 0) {
        blocks.push_back(static_cast<std::size_t>(block));
    } else {
        for (const auto& f : ckpt.weightless) blocks.push_back(f.layer_index);
    }
    if (blocks.empty()) throw std::runtime_error("checkpoint contains no weightless blocks");
    for (std::size_t b : blocks) {
        netlist::Netlist nl = netlist::build_netlist(ckpt, b);
        const std::string path = (fs::path(out_dir) / ("block" + std::to_string(b) + ".v")).string();
        std::ofstream out(path, std::ios::binary);
        out << netlist::emit_hdl(nl);
        const auto census = nl.census();
        std::cout << "block " << b << ": " << census.comparators << " comparators, " << census.luts
                  << " LUTs, " << census.sum_units << " sum units -> " << path << "\n";
    }
    return 0;
}

int cmd_verify_netlist(const std::string& ckpt_path, long long block, std::size_t vectors,
                       std::uint64_t seed, const std::string& out_dir) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    std::vector<std::size_t> blocks;
    if (block >= 0) {
        blocks.push_back(static_cast<std::size_t>(block));
    } else {
        for (const auto& f : ckpt.weightless) blocks.push_back(f.layer_index);
    }
    if (blocks.empty()) throw std::runtime_error("checkpoint contains no weightless blocks");
    bool clean = true;
    for (std::size_t b : blocks) {
        auto report = netlist::verify_equivalence(ckpt, b, vectors, seed);
        std::cout << "block " << b << ": " << report.vectors_tested << " vectors, "
                  << report.mismatches << " mismatches\n";
        if (!out_dir.empty()) {
            ensure_out(out_dir);
            std::ofstream out(fs::path(out_dir) / ("equivalence_block" + std::to_string(b) + ".json"));
            out << netlist::report_to_json(report).dump(2) << "\n";
        }
        if (report.mismatches) {
            clean = false;
            std::cout << "first failing vector:";
            for (auto v : report.first_failing) std::cout << " " << v;
            std::cout << "\n";
        }
    }
    return clean ? 0 : 1;
}

}  // namespace

int cli_run(const std::vector<std::string>& args) {
    CLI::App app{"quasi-weightless transformer toolkit: training, inference, netlist export and "
                 "hardware cost analysis"};
    app.require_subcommand(1);

    CommonOpts common;
    std::string data_path, ckpt_path, profile_spec = "fpga-32x32", prompt;
    std::size_t gen_steps = 200, eval_batches = 16, vectors = 10000;
    double temperature = 0.8;
    std::uint64_t sample_seed = 0;
    long long block = -1;
    bool as_json = false, do_compare = false, table = false;
    std::uint64_t factor = 1;

    auto add_common = [&](CLI::App* sub, bool with_mode = true) {
        sub->add_option("--config", common.config_path, "run configuration JSON file");
        sub->add_option("--preset", common.preset_name, "built-in configuration name");
        sub->add_option("--set", common.overrides, "dotted-key override, e.g. train.lr=0.002");
        sub->add_option("--out", common.out_dir, "output directory for artifacts");
        sub->add_option("--seed", common.seed, "seed override for all RNG consumers");
        if (with_mode)
            sub->add_option("--mode", common.mode, "feed-forward block kind: mlp or weightless")
                ->check(CLI::IsMember({"mlp", "weightless"}));
    };

    std::string init_from;
    auto* tr = app.add_subcommand("train", "train a model and write metrics + best checkpoint");
    add_common(tr);
    tr->add_option("--data", data_path, "corpus file (default: bundled synthetic playscript)");
    tr->add_option("--init-from", init_from,
                   "checkpoint whose matching (non-weightless) weights seed the new model");

    auto* ev = app.add_subcommand("eval", "validation loss of a checkpoint");
    ev->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    ev->add_option("--data", data_path, "corpus file (default: bundled synthetic playscript)");
    ev->add_option("--batches", eval_batches, "number of validation batches");

    auto* ge = app.add_subcommand("generate", "sample text from a trained decoder");
    ge->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    ge->add_option("--data", data_path, "corpus file used to rebuild the vocabulary");
    ge->add_option("--prompt", prompt, "prompt text");
    ge->add_option("--steps", gen_steps, "tokens to generate");
    ge->add_option("--temperature", temperature, "sampling temperature (0 = greedy)");
    ge->add_option("--seed", sample_seed, "sampling seed");

    auto* wl = app.add_subcommand("workload", "per-stage parameter and MAC breakdown");
    add_common(wl);
    wl->add_flag("--json", as_json, "JSON output");

    auto* co = app.add_subcommand("cost", "cycle and energy model for one encoder/decoder layer");
    add_common(co);
    co->add_option("--profile", profile_spec, "hardware profile label or JSON file");
    co->add_flag("--compare", do_compare, "baseline MLP vs weightless comparison");
    co->add_flag("--mlp-pe-table", table, "feed-forward GEMMs across array sizes vs the PE");
    co->add_option("--factor", factor, "PE accumulation factor (cycles per row)");
    co->add_flag("--json", as_json, "JSON output");

    auto* ex = app.add_subcommand("export-netlist", "emit structural Verilog for trained blocks");
    ex->add_option("--ckpt", ckpt_path, "quantized checkpoint file")->required();
    ex->add_option("--block", block, "block index (default: all)");
    ex->add_option("--out", common.out_dir, "output directory")->required();

    auto* ve = app.add_subcommand("verify-netlist", "netlist vs inference equivalence check");
    ve->add_option("--ckpt", ckpt_path, "quantized checkpoint file")->required();
    ve->add_option("--block", block, "block index (default: all)");
    ve->add_option("--vectors", vectors, "random vectors per block");
    ve->add_option("--seed", sample_seed, "vector generator seed");
    ve->add_option("--out", common.out_dir, "directory for the JSON report");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (tr->parsed()) return cmd_train(common, data_path, init_from);
        if (ev->parsed()) return cmd_eval(ckpt_path, data_path, eval_batches);
        if (ge->parsed()) return cmd_generate(ckpt_path, data_path, prompt, gen_steps, temperature,
                                              sample_seed);
        if (wl->parsed()) return cmd_workload(common, as_json);
        if (co->parsed()) return cmd_cost(common, profile_spec, do_compare, table, factor, as_json);
        if (ex->parsed()) return cmd_export_netlist(ckpt_path, block, common.out_dir);
        if (ve->parsed()) return cmd_verify_netlist(ckpt_path, block, vectors, sample_seed, common.out_dir);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace quweit
