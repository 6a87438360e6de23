// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dualpix {

/// Outcome of comparing analytic gradients with central finite differences.
/// A coordinate passes when |analytic - numeric| / max(|analytic|, |numeric|,
/// floor) <= tolerance; the check passes when at least `min_fraction` of the
/// coordinates pass.
struct GradCheckReport {
    std::string name;
    std::uint64_t seed = 0;
    std::size_t checked = 0;
    std::size_t within = 0;
    double max_error = 0.0;
    double tolerance = 0.0;
    double min_fraction = 1.0;
    bool passed = false;
};

struct GradCheck {
    std::string name;
    std::function<GradCheckReport(std::uint64_t seed)> run;
};

/// charbonnier, dssim, photometric_delta, bilinear_warp, affine_solve,
/// scale_solve, view_supervision, assisted_loss, folded_latents,
/// micronet_backward, training_loss.
const std::vector<GradCheck> &registered_gradchecks();

/// Runs every registered check for seeds seed, seed + 1, ..., seed + count - 1.
std::vector<GradCheckReport> run_gradchecks(std::uint64_t seed, std::size_t count,
                                            const std::vector<std::string> &only = {});

/// Accumulates coordinate comparisons into a report.
class GradComparator {
  public:
    GradComparator(std::string name, std::uint64_t seed, double tolerance, double floor,
                   double min_fraction = 1.0);

    void add(double analytic, double numeric);
    bool accepts(double analytic, double numeric) const;
    GradCheckReport finish() const;

  private:
    GradCheckReport report_;
    double floor_;
};

} // namespace dualpix
