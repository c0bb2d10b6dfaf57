#include "pptv/grid.hpp"

#include <cmath>

#include "pptv/error.hpp"

namespace pptv {

RegionMask RegionMask::empty(int nlat, int nlon) {
    if (nlat <= 0 || nlon <= 0) throw ConfigError("region mask needs positive extents");
    RegionMask m;
    m.nlat = nlat;
    m.nlon = nlon;
    m.cells.assign(static_cast<std::size_t>(nlat) * nlon, 0);
    return m;
}

RegionMask RegionMask::all(int nlat, int nlon) {
    RegionMask m = empty(nlat, nlon);
    std::fill(m.cells.begin(), m.cells.end(), std::uint8_t{1});
    m.boxes.push_back({-90.0, 90.0, 0.0, 360.0, "all"});
    return m;
}

RegionMask RegionMask::from_box(const GridSpec& grid, const NamedBox& box) {
    RegionMask m = empty(grid.nlat, grid.nlon);
    for (int r = 0; r < grid.nlat; ++r) {
        const double la = grid.lat(r);
        if (la < box.lat_min || la > box.lat_max) continue;
        for (int c = 0; c < grid.nlon; ++c) {
            const double lo = grid.lon(c);
            if (lo >= box.lon_min && lo <= box.lon_max) m.set(r, c, true);
        }
    }
    m.boxes.push_back(box);
    return m;
}

std::size_t RegionMask::count() const {
    std::size_t n = 0;
    for (std::uint8_t v : cells) n += v;
    return n;
}

RegionMask RegionMask::complement() const {
    RegionMask m = *this;
    for (auto& v : m.cells) v = v ? 0 : 1;
    m.boxes.clear();
    for (const auto& b : boxes) {
        NamedBox nb = b;
        nb.label = "not:" + b.label;
        m.boxes.push_back(nb);
    }
    return m;
}

namespace {
const char* kChannelNames[kFieldChannels] = {"sst_m3", "sst_m2", "sst_m1",
                                             "hc_m3",  "hc_m2",  "hc_m1"};
}

const char* channel_name(int channel) {
    if (channel < 0 || channel >= kFieldChannels) throw ConfigError("channel index out of range");
    return kChannelNames[channel];
}

int channel_index(const std::string& name) {
    for (int i = 0; i < kFieldChannels; ++i)
        if (name == kChannelNames[i]) return i;
    return -1;
}

double nino34(const Tensor& sst_field, const GridSpec& grid) {
    if (sst_field.shape.size() != 2 || sst_field.shape[0] != grid.nlat ||
        sst_field.shape[1] != grid.nlon)
        throw ConfigError("nino34 expects a [nlat, nlon] field matching the grid");
    // 170W-120W in degrees east.
    const double lat_min = -5.0, lat_max = 5.0;
    const double lon_min = 190.0, lon_max = 240.0;
    const double deg = std::acos(-1.0) / 180.0;
    double wsum = 0.0, vsum = 0.0;
    for (int r = 0; r < grid.nlat; ++r) {
        const double la = grid.lat(r);
        if (la < lat_min || la > lat_max) continue;
        const double w = std::cos(la * deg);
        for (int c = 0; c < grid.nlon; ++c) {
            const double lo = grid.lon(c);
            if (lo < lon_min || lo > lon_max) continue;
            vsum += w * sst_field.data[static_cast<std::size_t>(r) * grid.nlon + c];
            wsum += w;
        }
    }
    if (wsum == 0.0) throw ConfigError("grid does not cover the Nino3.4 box");
    return vsum / wsum;
}

double three_month_average(const std::vector<double>& series, std::size_t center) {
    if (center == 0 || center + 1 >= series.size())
        throw ConfigError("three_month_average needs both neighbours in range");
    return (series[center - 1] + series[center] + series[center + 1]) / 3.0;
}

}  // namespace pptv
