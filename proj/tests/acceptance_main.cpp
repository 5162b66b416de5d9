// Acceptance suite: every release criterion as one pass/fail line.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "quweit/checkpoint.hpp"
#include "quweit/config.hpp"
#include "quweit/costmodel.hpp"
#include "quweit/dataset.hpp"
#include "quweit/netlist.hpp"
#include "quweit/ops.hpp"
#include "quweit/tape.hpp"
#include "quweit/trainer.hpp"
#include "quweit/workload.hpp"
#include "../tests/support/gradcheck.hpp"

using namespace quweit;
using DTensor = TensorT<double>;

namespace {

struct Check {
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

double now_s() {
    using clock = std::chrono::steady_clock;
    static const auto t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

bool within(double value, double reference, double rel) {
    return std::abs(value - reference) <= rel * std::abs(reference);
}

DTensor random_tensor(Shape shape, Rng& rng) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.normal(0.0, 1.0);
    return DTensor::from_data(std::move(shape), std::move(v));
}

// shared artifacts between criteria
struct Context {
    TrainResult mlp_run;
    TrainResult weightless_run;
    bool trained = false;
    Checkpoint small_quantized;  // criterion 6 artifact, reused by 9
};

// --- criterion bodies -------------------------------------------------------

void c1_workload(Check& c) {
    const auto start = std::chrono::steady_clock::now();
    WorkloadBreakdown wl = count_workload(preset("gpt3").model);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::uint64_t expect_params[] = {43486543872ULL, 0, 0, 14495514624ULL, 57982058496ULL,
                                           57982058496ULL};
    const std::uint64_t expect_macs[] = {43486543872ULL, 4831838208ULL, 4831838208ULL,
                                         14495514624ULL, 57982058496ULL, 57982058496ULL};
    for (int i = 0; i < 6; ++i) {
        c.expect(wl.stages[i].params == expect_params[i],
                 "stage " + wl.stages[i].name + " params " + std::to_string(wl.stages[i].params));
        c.expect(wl.stages[i].macs_per_token == expect_macs[i],
                 "stage " + wl.stages[i].name + " macs " + std::to_string(wl.stages[i].macs_per_token));
    }
    c.expect(secs < 1.0, "workload runtime " + std::to_string(secs) + " s");
}

void c2_cycles(Check& c) {
    const auto start = std::chrono::steady_clock::now();
    const cost::GemmShape d1{196, 192, 768}, d2{196, 768, 192};
    const std::uint64_t expect[] = {921600, 239616, 64512, 18432};
    std::size_t i = 0;
    for (std::size_t a : {8, 16, 32, 64}) {
        const std::uint64_t got = cost::systolic_cycles(d1, a) + cost::systolic_cycles(d2, a);
        c.expect(got == expect[i], "array " + std::to_string(a) + " cycles " + std::to_string(got));
        ++i;
    }
    c.expect(cost::pe_cycles(196, 1) == 196, "PE cycles");
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(secs < 1.0, "cycle model runtime " + std::to_string(secs) + " s");
}

void c3_energy(Check& c) {
    const std::uint64_t cycles[] = {921600, 239616, 64512, 18432};
    const double fpga_uj[] = {585.22, 327.07, 188.69, 135.38};
    const double asic_uj[] = {52.5, 28.18, 16.12, 10.34};
    const char* sizes[] = {"8x8", "16x16", "32x32", "64x64"};
    for (int i = 0; i < 4; ++i) {
        const double f =
            cost::energy_j(cycles[i], cost::profile_by_label(std::string("fpga-") + sizes[i]),
                           "systolic") * 1e6;
        const double a =
            cost::energy_j(cycles[i], cost::profile_by_label(std::string("asic-") + sizes[i]),
                           "systolic") * 1e6;
        c.expect(within(f, fpga_uj[i], 0.005), std::string("fpga ") + sizes[i] + " energy");
        c.expect(within(a, asic_uj[i], 0.005), std::string("asic ") + sizes[i] + " energy");
    }
    c.expect(within(cost::energy_j(196, cost::profile_by_label("fpga-32x32"), "pe") * 1e6, 0.15, 0.005),
             "fpga PE energy");
    c.expect(within(cost::energy_j(196, cost::profile_by_label("asic-32x32"), "pe") * 1e6, 0.001, 0.005),
             "asic PE energy");

    const ModelConfig ivit = preset("ivit-t").model;
    struct Expect {
        const char* label;
        double stages[8];
        double base_total, quweit_total;
    };
    const Expect tables[] = {
        {"fpga-32x32", {23.59, 23.59, 23.59, 27.52, 27.52, 23.59, 94.35, 94.35}, 338.10, 149.55},
        {"asic-32x32", {2.02, 2.02, 2.02, 2.35, 2.35, 2.02, 8.06, 8.06}, 28.90, 12.78},
    };
    for (const auto& t : tables) {
        const auto profile = cost::profile_by_label(t.label);
        const auto baseline = cost::encoder_layer_report(ivit, profile, false);
        for (int i = 0; i < 8; ++i)
            c.expect(within(baseline[i].energy * 1e6, t.stages[i], 0.005),
                     std::string(t.label) + " stage " + baseline[i].stage + " " +
                         std::to_string(baseline[i].energy * 1e6));
        const auto report = cost::compare(baseline, cost::encoder_layer_report(ivit, profile, true));
        c.expect(within(report.baseline_j * 1e6, t.base_total, 0.005),
                 std::string(t.label) + " baseline total " + std::to_string(report.baseline_j * 1e6));
        c.expect(within(report.quweit_j * 1e6, t.quweit_total, 0.005),
                 std::string(t.label) + " quweit total " + std::to_string(report.quweit_j * 1e6));
        c.expect(report.ratio >= 2.2, std::string(t.label) + " ratio " + std::to_string(report.ratio));
    }
}

void c4_fraction(Check& c) {
    WorkloadBreakdown wl = count_workload(preset("ivit-t").model);
    const double share = 100.0 * wl.mlp_mac_fraction;
    c.expect(std::abs(share - 57.0) <= 5.0, "per-layer MLP MAC share " + std::to_string(share) + "%");
}

void c5_gradients(Check& c) {
    Rng rng(20240810);
    double worst = 0;
    std::size_t cases = 0;
    auto track = [&](gradcheck::Result r) {
        worst = std::max(worst, r.max_rel_err);
        ++cases;
    };
    for (int rep = 0; rep < 18; ++rep) {
        const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(4), n = 1 + rng.below(4);
        track(gradcheck::compare([](std::vector<DTensor>& in) { return sum(matmul(in[0], in[1])); },
                                 {random_tensor({m, k}, rng), random_tensor({k, n}, rng)}));
        track(gradcheck::compare([](std::vector<DTensor>& in) { return sum(gelu(in[0])); },
                                 {random_tensor({m, n}, rng)}));
        track(gradcheck::compare(
            [](std::vector<DTensor>& in) { return sum(mul(softmax(in[0], 1), in[1])); },
            {random_tensor({m, n}, rng), random_tensor({m, n}, rng)}));
        track(gradcheck::compare(
            [](std::vector<DTensor>& in) {
                return sum(mul(layer_norm(in[0], in[1], in[2], 1e-5), in[3]));
            },
            {random_tensor({m, k + 1}, rng), random_tensor({k + 1}, rng), random_tensor({k + 1}, rng),
             random_tensor({m, k + 1}, rng)}));
        std::vector<std::int32_t> targets;
        for (std::size_t i = 0; i < m; ++i) targets.push_back(std::int32_t(rng.below(n)));
        track(gradcheck::compare(
            [targets](std::vector<DTensor>& in) { return cross_entropy(in[0], targets); },
            {random_tensor({m, n}, rng)}));
        track(gradcheck::compare(
            [](std::vector<DTensor>& in) { return sum(mul(add(in[0], in[1]), in[0])); },
            {random_tensor({m, n}, rng), random_tensor({m, n}, rng)}));
    }

    // soft-mode weightless block, end to end
    WeightlessBlockConfig cfg;
    cfg.num_features = 4;
    cfg.bits_per_feature = 2;
    cfg.layer_widths = {6, 4};
    cfg.fan_in = 2;
    cfg.output_dim = 2;
    cfg.group_size = 2;
    Rng brng(7);
    WeightlessBlockT<double> block(cfg, brng);
    block.fit_encoder(random_tensor({32, 4}, brng));
    track(gradcheck::compare(
        [&block](std::vector<DTensor>& in) {
            block.layers()[0].theta = in[1];
            block.layers()[1].theta = in[2];
            block.summation().encoded = in[3];
            return sum(mul(block.forward(in[0], TrainingMode::Soft), in[4]));
        },
        {random_tensor({3, 4}, brng), block.layers()[0].theta, block.layers()[1].theta,
         block.summation().encoded, random_tensor({3, 2}, brng)}));

    c.expect(cases * 2 >= 100 || cases >= 100,
             "only " + std::to_string(cases) + " randomized gradient cases");
    c.expect(cases >= 100, std::to_string(cases) + " cases");
    c.expect(worst < 1e-4, "worst relative error " + std::to_string(worst));

    // EFD input gradients equal the multilinear derivative, exhaustively for n <= 4
    for (std::size_t n = 1; n <= 4; ++n) {
        LutLayerT<double> layer;
        layer.num_luts = 2;
        layer.fan_in = n;
        layer.input_width = n;
        for (std::size_t l = 0; l < 2; ++l)
            for (std::size_t j = 0; j < n; ++j) layer.mapping.push_back(std::int32_t(j));
        std::vector<double> th(2 << n);
        for (auto& v : th) v = rng.uniform(-1.0, 1.0);
        layer.theta = DTensor::from_data({2, std::size_t{1} << n}, std::move(th));

        const std::size_t ts = std::size_t{1} << n;
        for (std::uint32_t a = 0; a < ts; ++a) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j) p[j] = (a >> (n - 1 - j)) & 1u ? 1.0 : 0.0;
            auto bits = DTensor::from_data({1, n}, p);
            bits.set_requires_grad(true);
            TapeT<double> tape;
            {
                TapeT<double>::Scope scope(tape);
                tape.backward(sum(lut_forward_hard(bits, layer)));
            }
            for (std::size_t j = 0; j < n; ++j) {
                double expect = 0;
                for (std::size_t l = 0; l < 2; ++l)
                    for (std::uint32_t addr = 0; addr < ts; ++addr) {
                        const double h = layer.theta.at(l * ts + addr) > 0 ? 1.0 : 0.0;
                        double prod = 1.0;
                        for (std::size_t kk = 0; kk < n; ++kk) {
                            if (kk == j) continue;
                            prod *= (addr >> (n - 1 - kk)) & 1u ? p[kk] : 1.0 - p[kk];
                        }
                        expect += h * ((addr >> (n - 1 - j)) & 1u ? 1.0 : -1.0) * prod;
                    }
                c.expect(std::abs(bits.grad()[j] - expect) < 1e-12,
                         "EFD/multilinear n=" + std::to_string(n));
            }
        }
    }
}

void c6_bit_exactness(Check& c, Context& ctx, const std::string& golden_path) {
    const auto start = std::chrono::steady_clock::now();

    // a small trained, quantized block
    auto ds = TextDataset::from_string(synthetic_playscript(11, 40000), 0.9);
    ModelConfig mc;
    mc.kind = ModelKind::Decoder;
    mc.n_layers = 1;
    mc.latent_dim = 32;
    mc.n_heads = 4;
    mc.context = 48;
    mc.vocab = ds.vocab_size();
    mc.causal = true;
    mc.block_kind = BlockKind::Weightless;
    WeightlessSpec w;
    w.bits_per_feature = 4;
    w.layer_widths = {64, 32};
    w.fan_in = 6;
    mc.weightless = w;
    TrainConfig tc;
    tc.batch_size = 4;
    tc.context = 48;
    tc.steps = 40;
    tc.warmup_steps = 10;
    tc.eval_interval = 40;
    tc.eval_batches = 1;
    tc.calibration_sequences = 4;
    Model model(mc, tc.seed);
    TrainResult run = train(model, ds, tc);

    Model frozen = restore_model(run.best);
    frozen.quantize_weightless();
    Checkpoint ckpt = snapshot(frozen, nullptr, run.best_step, "");
    ckpt.digest = checkpoint_digest(ckpt);
    ctx.small_quantized = ckpt;

    WeightlessBlock& block = frozen.weightless_block(0);
    const auto nl = netlist::build_netlist(ckpt, 0);
    const std::size_t f_count = block.config().num_features;
    const std::size_t d_count = block.config().output_dim;
    const float scale = block.summation().quant->scale;

    Rng rng(424242);
    std::size_t mismatches = 0;
    std::vector<float> x(f_count);
    std::vector<std::int32_t> sw(d_count);
    for (int rep = 0; rep < 10000; ++rep) {
        std::vector<std::int16_t> v(f_count);
        for (auto& e : v) e = std::int16_t(std::int32_t(rng.below(65536)) - 32768);
        for (std::size_t f = 0; f < f_count; ++f) x[f] = float(v[f]) / 256.0f;

        // training-path hard forward
        auto fw = block.forward(Tensor::from_data({1, f_count}, std::vector<float>(x)),
                                TrainingMode::HardEfd);
        // inference engine
        auto inf = block.infer_row(std::vector<float>(x.begin(), x.end()));
        // netlist interpreter
        block.infer_row_ints(x.data(), sw.data());
        const auto hw = netlist::interpret(nl, v);
        for (std::size_t d = 0; d < d_count; ++d) {
            if (fw.at2(0, d) != inf[d]) ++mismatches;
            if (hw[d] != sw[d]) ++mismatches;
            if (inf[d] != scale * float(hw[d])) ++mismatches;
        }
    }
    c.expect(mismatches == 0, std::to_string(mismatches) + " chain mismatches over 10^4 vectors");

    // corner vectors (all-min, all-max, threshold-adjacent) via the reporter
    auto report = netlist::verify_equivalence(ckpt, 0, 100, 7);
    c.expect(report.mismatches == 0,
             "corner-vector mismatches: " + std::to_string(report.mismatches));

    // golden HDL fixture: byte-stable emission
    {
        Checkpoint xor_ckpt;
        xor_ckpt.model.kind = ModelKind::Decoder;
        xor_ckpt.model.vocab = 2;
        xor_ckpt.digest = "fixed-test-digest";
        WeightlessFragment f;
        f.layer_index = 0;
        f.features = 1;
        f.bits_per_feature = 2;
        f.output_dim = 1;
        f.group_size = 1;
        f.surrogate_width = 1.0f;
        f.thresholds = {-0.5f, 0.5f};
        LutFragment lf;
        lf.num_luts = 1;
        lf.fan_in = 2;
        lf.mapping = {0, 1};
        lf.init_hex = {"6"};
        f.layers.push_back(lf);
        f.encoded = {1.0f};
        f.quant_scale = 1.0f / 127.0f;
        f.quant_levels = {127};
        xor_ckpt.weightless.push_back(f);
        const std::string emitted = netlist::emit_hdl(netlist::build_netlist(xor_ckpt, 0));
        std::ifstream golden(golden_path, std::ios::binary);
        std::ostringstream buf;
        buf << golden.rdbuf();
        c.expect(golden.good() && emitted == buf.str(), "golden HDL fixture mismatch");
        c.expect(emitted == netlist::emit_hdl(netlist::build_netlist(xor_ckpt, 0)),
                 "HDL emission not byte-stable");
    }

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(secs < 60.0, "bit-exactness runtime " + std::to_string(secs) + " s");
}

void c7_training_parity(Check& c, Context& ctx) {
    const auto start = std::chrono::steady_clock::now();
    auto ds = TextDataset::from_string(synthetic_playscript(1, 1 << 19), 0.9);
    RunConfig rc = preset("nano-shakespeare");
    rc.model.vocab = ds.vocab_size();

    Model mlp(rc.model, rc.train.seed);
    ctx.mlp_run = train(mlp, ds, rc.train);

    RunConfig wrc = preset("nano-shakespeare");
    wrc.model.vocab = ds.vocab_size();
    wrc.model.block_kind = BlockKind::Weightless;
    Model weightless(wrc.model, wrc.train.seed);
    ctx.weightless_run = train(weightless, ds, wrc.train);
    ctx.trained = true;

    const double lm = ctx.mlp_run.best_val_loss;
    const double lw = ctx.weightless_run.best_val_loss;
    c.expect(lm < 2.6, "mlp val loss " + std::to_string(lm));
    c.expect(lw < 2.6, "weightless val loss " + std::to_string(lw));
    c.expect(std::abs(lw - lm) <= 0.15,
             "parity gap " + std::to_string(std::abs(lw - lm)) + " (mlp " + std::to_string(lm) +
                 ", weightless " + std::to_string(lw) + ")");
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(secs < 1800.0, "training runtime " + std::to_string(secs) + " s");
    std::printf("      mlp %.4f, weightless %.4f, gap %.4f, %.0f s\n", lm, lw, std::abs(lw - lm),
                secs);
}

void c8_determinism(Check& c) {
    auto ds = TextDataset::from_string(synthetic_playscript(1, 1 << 17), 0.9);
    RunConfig rc = preset("nano-shakespeare");
    rc.model.vocab = ds.vocab_size();
    rc.model.block_kind = BlockKind::Weightless;
    rc.train.steps = 150;
    rc.train.eval_interval = 50;

    std::vector<std::string> digests;
    std::vector<std::vector<MetricRow>> logs;
    for (int run_i = 0; run_i < 2; ++run_i) {
        Model model(rc.model, rc.train.seed);
        TrainResult r = train(model, ds, rc.train);
        digests.push_back(checkpoint_digest(r.best));
        logs.push_back(r.metrics);
    }
    c.expect(digests[0] == digests[1], "checkpoint digests differ");
    bool logs_equal = logs[0].size() == logs[1].size();
    if (logs_equal)
        for (std::size_t i = 0; i < logs[0].size(); ++i)
            logs_equal = logs_equal && logs[0][i].step == logs[1][i].step &&
                         logs[0][i].split == logs[1][i].split && logs[0][i].loss == logs[1][i].loss &&
                         logs[0][i].lr == logs[1][i].lr;
    c.expect(logs_equal, "metric logs differ");
}

void c9_quantization(Check& c, Context& ctx) {
    std::vector<Checkpoint> checkpoints;
    checkpoints.push_back(ctx.small_quantized);
    if (ctx.trained) {
        Model frozen = restore_model(ctx.weightless_run.best);
        frozen.quantize_weightless();
        Checkpoint ckpt = snapshot(frozen, nullptr, ctx.weightless_run.best_step, "");
        ckpt.digest = checkpoint_digest(ckpt);
        checkpoints.push_back(ckpt);
    }

    for (const auto& ckpt : checkpoints) {
        Model frozen = restore_model(ckpt);
        for (std::size_t b = 0; b < frozen.config().n_layers; ++b) {
            const WeightlessBlock& qblock = frozen.weightless_block(b);
            const auto& quant = qblock.summation().quant;
            c.expect(quant.has_value(), "block not quantized");
            if (!quant) continue;
            const float s = quant->scale;
            const auto e = qblock.summation().encoded.data();
            for (std::size_t i = 0; i < e.size(); ++i)
                c.expect(std::abs(quant->dequant[i] - e[i]) <= s / 2 + 1e-12f,
                         "dequantization error above s/2 at entry " + std::to_string(i));

            // end-to-end bound against the float path sharing the same thresholds
            WeightlessBlock fblock = qblock;
            fblock.summation().quant.reset();
            const std::size_t f_count = qblock.config().num_features;
            const std::size_t g = qblock.config().group_size;
            Rng rng(1000 + b);
            for (int rep = 0; rep < 200; ++rep) {
                std::vector<float> x(f_count);
                for (auto& v : x) v = float(rng.normal(0.0, 1.0));
                auto qf = qblock.infer_row(x);
                auto ff = fblock.infer_row(x);
                for (std::size_t d = 0; d < qf.size(); ++d)
                    c.expect(std::abs(qf[d] - ff[d]) <= double(g) * s / 2 + 1e-6,
                             "quantized output outside the summed bound");
            }
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    const std::string golden =
        std::string(QUWEIT_GOLDEN_DIR) + "/xor_block.v";
    Context ctx;
    struct Entry {
        int id;
        const char* name;
        std::function<void(Check&)> body;
    };
    const std::vector<Entry> criteria = {
        {1, "workload exactness", [&](Check& c) { c1_workload(c); }},
        {2, "cycle exactness", [&](Check& c) { c2_cycles(c); }},
        {3, "energy consistency", [&](Check& c) { c3_energy(c); }},
        {4, "multiplication-replacement fraction", [&](Check& c) { c4_fraction(c); }},
        {5, "gradient suite", [&](Check& c) { c5_gradients(c); }},
        {6, "bit-exactness chain", [&](Check& c) { c6_bit_exactness(c, ctx, golden); }},
        {7, "desk-scale training parity", [&](Check& c) { c7_training_parity(c, ctx); }},
        {8, "determinism", [&](Check& c) { c8_determinism(c); }},
        {9, "quantization bound", [&](Check& c) { c9_quantization(c, ctx); }},
    };
    (void)argc;
    (void)argv;

    int failed = 0;
    for (const auto& entry : criteria) {
        Check check;
        const double t0 = now_s();
        try {
            entry.body(check);
        } catch (const std::exception& e) {
            check.failures.push_back(std::string("exception: ") + e.what());
        }
        const double dt = now_s() - t0;
        std::printf("[%d] %-38s %s (%.1f s)\n", entry.id, entry.name,
                    check.failures.empty() ? "PASS" : "FAIL", dt);
        for (const auto& f : check.failures) std::printf("      - %s\n", f.c_str());
        std::fflush(stdout);
        if (!check.failures.empty()) ++failed;
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
    return failed;
}
