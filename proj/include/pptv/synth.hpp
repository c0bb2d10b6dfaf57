#pragma once

#include <cstdint>
#include <vector>

#include "pptv/grid.hpp"

namespace pptv {

/// Ground truth attached to a generated dataset: which cells causally
/// determine the target, at what lag, and how noisy the fields are.
struct SyntheticTruth {
    RegionMask driver_mask;
    int driver_lag = 2;       // months before the last input month
    double noise_level = 0.1; // white-noise sigma / clean-field RMS
    double alpha = 1.0;       // linear index coefficient
    double beta = 0.25;       // quadratic index coefficient
    int hc_lead = 2;          // months by which the HC precursor leads the SST driver
    // Standardized clean coefficient series for the kept months (one per driver),
    // retained so tests can verify targets against the generating functional.
    std::vector<std::vector<double>> sst_series;
    std::vector<std::vector<double>> hc_series;
    std::vector<double> index;  // monthly index the targets are averaged from
};

struct SynthConfig {
    GridSpec grid;
    int n_samples = 400;
    int n_leads = 12;
    int n_drivers = 1;
    int n_distractors = 6;
    NamedBox driver_box{-15.0, 15.0, 160.0, 260.0, "driver"};
    int driver_lag = 2;
    int hc_lead = 2;
    double ar1 = 0.8;
    double alpha = 1.0;
    double beta = 0.25;
    double noise_level = 0.1;
};

struct SynthOutput {
    Dataset dataset;
    SyntheticTruth truth;
};

/// Planted-signal generator. Each month carries fixed spatial bump patterns
/// scaled by AR(1) coefficient series; the target index is a linear+quadratic
/// functional of the driver coefficients at the configured lag, so the driver
/// box is the only information source. Deterministic per (seed, config).
SynthOutput synth_generate(std::uint64_t seed, const SynthConfig& config);

}  // namespace pptv
