#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pptv/grid.hpp"
#include "pptv/tensor.hpp"

namespace pptv {

/// Attribution result. raw holds mean |df/dx| values (never negative);
/// normalized is raw / max(raw), or all zeros for an identically zero map.
struct SaliencyMap {
    Tensor raw;         // [6, nlat, nlon], or [nlat, nlon] once aggregated
    Tensor normalized;  // same shape, values in [0, 1]
    std::string method; // pptv | perturbation | vbp | gradcam
    int sample_count = 0;

    bool aggregated() const { return raw.shape.size() == 2; }
};

struct AttentionIndicator {
    double value = 0.0;  // mean normalized saliency over the scope
    std::string scope;
};

// Total variation of a sampled function over the given partition.
double tv_1d(const std::vector<double>& values);

// raw / max(raw); all-zero stays all-zero. Negative input is rejected.
Tensor normalize(const Tensor& raw);

// Fills map.normalized from map.raw.
void finalize(SaliencyMap& map);

// Mean over the 6 channels, re-normalized.
SaliencyMap aggregate_channels_mean(const SaliencyMap& map);
// One single-channel map per input channel, each re-normalized.
std::vector<SaliencyMap> split_channels(const SaliencyMap& map);

AttentionIndicator attention_indicator(const SaliencyMap& map, const std::string& scope_label);
AttentionIndicator attention_indicator(const SaliencyMap& map, const RegionMask& scope,
                                       const std::string& scope_label);

// Row/column means of an aggregated [nlat, nlon] map.
std::vector<double> zonal_mean(const Tensor& map2d);       // one value per latitude
std::vector<double> meridional_mean(const Tensor& map2d);  // one value per longitude

// Cells with normalized value >= tau; tau in (0, 1].
RegionMask threshold_mask(const SaliencyMap& map, double tau);

// CSV rows "channel,lat,lon,raw,normalized"; channel is sst_m3..hc_m1 or "mean".
void save_saliency_csv(std::ostream& os, const SaliencyMap& map, const GridSpec& grid);
void save_saliency_csv(const std::string& path, const SaliencyMap& map, const GridSpec& grid);
SaliencyMap load_saliency_csv(std::istream& is, const GridSpec& grid);
SaliencyMap load_saliency_csv(const std::string& path, const GridSpec& grid);

// 8-bit P5 graymaps, round(normalized*255), row 0 = northernmost latitude.
// Writes <prefix>_<channel>.pgm per channel (or <prefix>_mean.pgm) and
// returns the paths written.
std::vector<std::string> save_saliency_pgm(const std::string& prefix, const SaliencyMap& map,
                                           const GridSpec& grid);

}  // namespace pptv
