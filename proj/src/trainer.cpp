#include "quweit/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "quweit/ops.hpp"
#include "quweit/tape.hpp"

namespace quweit {

namespace {

/// Forward a [B*N] flat batch through the model; returns the mean NLL.
Tensor batch_loss(Model& model, const std::vector<std::int32_t>& inputs,
                  const std::vector<std::int32_t>& targets, std::size_t batch, std::size_t context) {
    std::vector<Tensor> logits;
    logits.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        std::span<const std::int32_t> seq(inputs.data() + b * context, context);
        logits.push_back(model.forward_tokens(seq));
    }
    return cross_entropy(concat_rows(logits), targets);
}

}  // namespace

std::string metrics_csv_header() { return "step,split,loss,lr,wallclock"; }

std::string metric_row_csv(const MetricRow& row) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu,%s,%.6f,%.8f,%.3f", row.step, row.split.c_str(), row.loss,
                  row.lr, row.wallclock);
    return buf;
}

double evaluate(Model& model, std::span<const std::int32_t> split, std::size_t batches,
                std::size_t batch_size, std::size_t context, std::uint64_t seed) {
    Rng rng(seed);
    double total = 0;
    for (std::size_t i = 0; i < batches; ++i) {
        auto [inputs, targets] = sample_batch(split, batch_size, context, rng);
        total += double(batch_loss(model, inputs, targets, batch_size, context).item());
    }
    return total / double(batches);
}

TrainResult train(Model& model, const TextDataset& ds, const TrainConfig& cfg, const TrainSinks& sinks) {
    cfg.validate();
    if (model.config().kind != ModelKind::Decoder)
        throw std::invalid_argument("train: text training requires a decoder model");
    if (model.config().vocab != ds.vocab_size())
        throw std::invalid_argument("train: model vocab " + std::to_string(model.config().vocab) +
                                    " does not match corpus vocab " + std::to_string(ds.vocab_size()));
    if (cfg.context > model.config().context)
        throw std::invalid_argument("train: batch context exceeds model context");

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&]() {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    std::ofstream metrics_file;
    if (!sinks.metrics_path.empty()) {
        metrics_file.open(sinks.metrics_path, std::ios::binary);
        if (!metrics_file) throw std::runtime_error("cannot write metrics to '" + sinks.metrics_path + "'");
        metrics_file << metrics_csv_header() << "\n";
    }

    TrainResult result;
    auto emit = [&](MetricRow row) {
        if (metrics_file.is_open()) metrics_file << metric_row_csv(row) << "\n" << std::flush;
        result.metrics.push_back(std::move(row));
    };

    Rng rng(cfg.seed);

    // thermometer calibration happens once, before any optimization
    if (model.uses_weightless() && !model.calibrated()) {
        Rng calib_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        auto [calib_inputs, _] =
            sample_batch(ds.train(), cfg.calibration_sequences, cfg.context, calib_rng);
        std::vector<std::vector<std::int32_t>> seqs;
        for (std::size_t b = 0; b < cfg.calibration_sequences; ++b)
            seqs.emplace_back(calib_inputs.begin() + b * cfg.context,
                              calib_inputs.begin() + (b + 1) * cfg.context);
        model.calibrate(seqs);
    }

    AdamW opt;
    opt.init(model.params());

    double best_val = std::numeric_limits<double>::infinity();
    std::size_t consecutive_bad = 0;

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const double lr = lr_at(step, cfg);
        auto [inputs, targets] = sample_batch(ds.train(), cfg.batch_size, cfg.context, rng);

        Tape tape;
        double loss_value;
        {
            Tape::Scope scope(tape);
            Tensor loss = batch_loss(model, inputs, targets, cfg.batch_size, cfg.context);
            loss_value = double(loss.item());
            tape.backward(loss);
        }

        if (!std::isfinite(loss_value)) {
            if (++consecutive_bad >= 2)
                throw std::runtime_error("training diverged: non-finite loss at step " +
                                         std::to_string(step) + " (twice consecutively)");
        } else {
            consecutive_bad = 0;
        }

        clip_gradients(model.params(), cfg.grad_clip);
        opt.step(model.params(), cfg, lr);
        model.params().zero_grad();

        if (step % cfg.log_interval == 0 || step + 1 == cfg.steps)
            emit({step, "train", loss_value, lr, elapsed()});

        const bool last = step + 1 == cfg.steps;
        if ((step + 1) % cfg.eval_interval == 0 || last) {
            const double val = evaluate(model, ds.val(), cfg.eval_batches, cfg.batch_size, cfg.context,
                                        cfg.seed ^ 0xc2b2ae3d27d4eb4fULL);
            emit({step, "val", val, lr, elapsed()});
            if (sinks.console)
                (*sinks.console) << "step " << step << " train " << loss_value << " val " << val
                                 << std::endl;
            if (val < best_val) {
                best_val = val;
                result.best_val_loss = val;
                result.best_step = step;
                result.best = snapshot(model, &opt, step, rng.state());
            }
            result.final_val_loss = val;
        }
    }
    result.rejected_steps = opt.rejected_steps();
    return result;
}

}  // namespace quweit
