#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "quweit/checkpoint.hpp"
#include "quweit/dataset.hpp"
#include "quweit/model.hpp"
#include "quweit/optim.hpp"

namespace quweit {

struct MetricRow {
    std::size_t step;
    std::string split;  // "train" or "val"
    double loss;
    double lr;
    double wallclock;  // seconds since run start; the only non-deterministic field
};

struct TrainResult {
    std::vector<MetricRow> metrics;
    double best_val_loss = 0;
    std::size_t best_step = 0;
    Checkpoint best;  // best-validation snapshot
    double final_val_loss = 0;
    std::uint64_t rejected_steps = 0;
};

struct TrainSinks {
    std::string metrics_path;  // empty: keep rows in memory only
    std::ostream* console = nullptr;
};

/// Runs the optimization loop: batch sampling, forward/backward on the tape,
/// gradient clipping, AdamW with warmup+cosine schedule, periodic validation
/// and best-checkpoint retention. Fully deterministic for a fixed seed
/// (wallclock column aside). Aborts if the loss is non-finite twice in a row.
TrainResult train(Model& model, const TextDataset& ds, const TrainConfig& cfg,
                  const TrainSinks& sinks = {});

/// Mean validation loss over a deterministic set of batches.
double evaluate(Model& model, std::span<const std::int32_t> split, std::size_t batches,
                std::size_t batch_size, std::size_t context, std::uint64_t seed);

std::string metrics_csv_header();
std::string metric_row_csv(const MetricRow& row);

}  // namespace quweit
