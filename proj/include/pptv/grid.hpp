#pragma once

#include <string>
#include <vector>

#include "pptv/tensor.hpp"

namespace pptv {

/// Regular lat/lon grid of cell centers. Row r sits at lat0 + r*dlat, column
/// c at lon0 + c*dlon. Longitudes are degrees east in [0, 360).
struct GridSpec {
    int nlat = 24;
    int nlon = 72;
    double lat0 = 57.5;
    double dlat = -5.0;
    double lon0 = 2.5;
    double dlon = 5.0;

    double lat(int row) const { return lat0 + row * dlat; }
    double lon(int col) const { return lon0 + col * dlon; }
    bool operator==(const GridSpec&) const = default;
};

/// Boolean cell selection plus the named boxes it was built from.
struct NamedBox {
    double lat_min = 0.0, lat_max = 0.0;
    double lon_min = 0.0, lon_max = 0.0;
    std::string label;
};

struct RegionMask {
    int nlat = 0;
    int nlon = 0;
    std::vector<std::uint8_t> cells;  // row-major, 1 = selected
    std::vector<NamedBox> boxes;

    static RegionMask empty(int nlat, int nlon);
    static RegionMask from_box(const GridSpec& grid, const NamedBox& box);
    static RegionMask all(int nlat, int nlon);

    bool at(int row, int col) const { return cells[static_cast<std::size_t>(row) * nlon + col] != 0; }
    void set(int row, int col, bool on) { cells[static_cast<std::size_t>(row) * nlon + col] = on ? 1 : 0; }
    std::size_t count() const;
    RegionMask complement() const;
};

/// One training example: 6 channels [SST(-3), SST(-2), SST(-1), HC(-3),
/// HC(-2), HC(-1)] on the grid, the calendar month of the first input month,
/// and one 3-month-averaged target per lead (targets[k] is lead k+1).
struct GridSample {
    Tensor fields;  // [6, nlat, nlon]
    int start_month = 1;
    std::vector<double> targets;

    // Calendar month (1..12) of the target at the given lead. The last input
    // month is start_month + 2.
    int target_month(int lead) const { return (start_month - 1 + 2 + lead) % 12 + 1; }
};

struct Dataset {
    GridSpec grid;
    std::vector<GridSample> samples;

    std::size_t size() const { return samples.size(); }
    int n_leads() const { return samples.empty() ? 0 : static_cast<int>(samples.front().targets.size()); }
};

constexpr int kFieldChannels = 6;

// Names for the 6 input channels, in storage order.
const char* channel_name(int channel);
int channel_index(const std::string& name);  // -1 if unknown

// Area-weighted (cosine latitude) mean of an anomaly field over the Nino3.4
// box, 5S-5N / 170W-120W. The grid must cover the box.
double nino34(const Tensor& sst_field, const GridSpec& grid);

// Mean of series[center-1 .. center+1]; both neighbours must exist.
double three_month_average(const std::vector<double>& series, std::size_t center);

}  // namespace pptv
