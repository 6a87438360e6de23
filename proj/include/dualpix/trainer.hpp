// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/adam.hpp"
#include "dualpix/dataset.hpp"
#include "dualpix/losses.hpp"
#include "dualpix/micronet.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dualpix {

enum class AffineStrategy { assisted, folded };

struct TrainConfig {
    Invariance invariance = Invariance::affine;
    AffineStrategy strategy = AffineStrategy::assisted;
    InputKind input = InputKind::rgbdp;
    std::size_t steps = 2000;
    std::uint64_t seed = 0;
    std::size_t eval_every = 100;
    double held_out_fraction = 0.1;
    int max_shift = 10;
    AdamConfig adam;
    std::optional<std::filesystem::path> out_dir; // checkpoints and log.csv
};

/// Parses none | scale | affine-assisted | affine-folded (scale is
/// scale-assisted). Throws ConfigError otherwise.
void parse_train_mode(const std::string &mode, TrainConfig &config);
std::string train_mode_name(const TrainConfig &config);

struct EvalSummary {
    double aiwe1 = 0.0;
    double aiwe2 = 0.0;
    double one_minus_rho = 0.0;
};

struct LogRow {
    std::size_t step = 0;
    double loss = 0.0; // mean training loss since the previous row
    EvalSummary eval;
};

struct TrainResult {
    MicroNet net;
    std::vector<LogRow> log;
    std::vector<FoldedLatents> latents; // folded mode only
    EvalSummary final_eval;
    std::size_t zero_coverage_steps = 0; // heads skipped for lack of valid warps
};

/// Raised when the loss or its gradient stops being finite. The last good
/// parameters are written to `<out_dir>/last_good` when an output directory
/// is configured.
class TrainingDiverged : public Error {
  public:
    using Error::Error;
};

/// Batch-size-1 training. The last `held_out_fraction` of `captures` (at least
/// one) is held out for evaluation; needs at least two captures.
TrainResult train(const TrainConfig &config, const std::vector<CaptureData> &captures);
TrainResult train(const TrainConfig &config, const std::filesystem::path &data_dir);

/// Half-resolution prediction for one capture.
Grid predict(const MicroNet &net, const CaptureData &capture, InputKind input);

/// Held-out metrics of a half-resolution prediction against ground truth
/// averaged (depth) and min-pooled (confidence) to its resolution. A constant
/// prediction scores the best constant fit instead of raising.
EvalSummary evaluate_prediction(const Grid &prediction, const CaptureData &capture);

/// Ground truth reduced by 2^k per dimension: depth by box average,
/// confidence by minimum.
std::pair<Grid, Grid> reduce_ground_truth(const CaptureData &capture, std::size_t factor);

std::string log_to_csv(const std::vector<LogRow> &log);

} // namespace dualpix
