#include "pptv/saliency.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pptv/error.hpp"

namespace pptv {

double tv_1d(const std::vector<double>& values) {
    if (values.size() < 2) throw ConfigError("tv_1d needs at least 2 values");
    double tv = 0.0;
    for (std::size_t i = 1; i < values.size(); ++i) tv += std::abs(values[i] - values[i - 1]);
    return tv;
}

Tensor normalize(const Tensor& raw) {
    double mx = 0.0;
    for (double v : raw.data) {
        if (v < 0.0) throw NumericError("saliency raw value is negative; upstream invariant breach");
        if (v > mx) mx = v;
    }
    Tensor out = Tensor::zeros(raw.shape);
    if (mx == 0.0) return out;
    for (std::size_t i = 0; i < raw.data.size(); ++i) out.data[i] = raw.data[i] / mx;
    return out;
}

void finalize(SaliencyMap& map) { map.normalized = normalize(map.raw); }

namespace {
void require_full(const SaliencyMap& m, const char* who) {
    if (m.raw.shape.size() != 3 || m.raw.shape[0] != kFieldChannels)
        throw ConfigError(std::string(who) + " expects a 6-channel map");
}
void require_aggregated(const SaliencyMap& m, const char* who) {
    if (m.raw.shape.size() != 2)
        throw ConfigError(std::string(who) + " expects an aggregated [nlat, nlon] map");
}
}  // namespace

SaliencyMap aggregate_channels_mean(const SaliencyMap& map) {
    require_full(map, "aggregate_channels_mean");
    const int h = map.raw.shape[1], w = map.raw.shape[2];
    SaliencyMap out;
    out.method = map.method;
    out.sample_count = map.sample_count;
    out.raw = Tensor::zeros({h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < kFieldChannels; ++c)
        for (std::size_t i = 0; i < plane; ++i) out.raw.data[i] += map.raw.data[c * plane + i];
    for (double& v : out.raw.data) v /= kFieldChannels;
    finalize(out);
    return out;
}

std::vector<SaliencyMap> split_channels(const SaliencyMap& map) {
    require_full(map, "split_channels");
    const int h = map.raw.shape[1], w = map.raw.shape[2];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<SaliencyMap> out;
    for (int c = 0; c < kFieldChannels; ++c) {
        SaliencyMap m;
        m.method = map.method;
        m.sample_count = map.sample_count;
        m.raw = Tensor::zeros({h, w});
        std::copy(map.raw.data.begin() + static_cast<std::ptrdiff_t>(c * plane),
                  map.raw.data.begin() + static_cast<std::ptrdiff_t>((c + 1) * plane),
                  m.raw.data.begin());
        finalize(m);
        out.push_back(std::move(m));
    }
    return out;
}

AttentionIndicator attention_indicator(const SaliencyMap& map, const std::string& scope_label) {
    if (map.normalized.numel() == 0) throw ConfigError("attention over a map without a normalized view");
    double acc = 0.0;
    for (double v : map.normalized.data) acc += v;
    return {acc / static_cast<double>(map.normalized.numel()), scope_label};
}

AttentionIndicator attention_indicator(const SaliencyMap& map, const RegionMask& scope,
                                       const std::string& scope_label) {
    const auto& shape = map.normalized.shape;
    int h = 0, w = 0;
    if (shape.size() == 2) {
        h = shape[0];
        w = shape[1];
    } else if (shape.size() == 3) {
        h = shape[1];
        w = shape[2];
    } else {
        throw ConfigError("attention expects a [6, nlat, nlon] or [nlat, nlon] map");
    }
    if (scope.nlat != h || scope.nlon != w) throw ConfigError("attention scope does not match the map grid");
    if (scope.count() == 0) throw EmptyResultError("attention scope selects no cells");
    const int channels = shape.size() == 3 ? shape[0] : 1;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    double acc = 0.0;
    std::size_t n = 0;
    for (int c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            if (scope.cells[i]) {
                acc += map.normalized.data[c * plane + i];
                ++n;
            }
    return {acc / static_cast<double>(n), scope_label};
}

std::vector<double> zonal_mean(const Tensor& map2d) {
    if (map2d.shape.size() != 2) throw ConfigError("zonal_mean expects an aggregated [nlat, nlon] map");
    const int h = map2d.shape[0], w = map2d.shape[1];
    std::vector<double> out(h, 0.0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) out[r] += map2d.data[static_cast<std::size_t>(r) * w + c];
        out[r] /= w;
    }
    return out;
}

std::vector<double> meridional_mean(const Tensor& map2d) {
    if (map2d.shape.size() != 2)
        throw ConfigError("meridional_mean expects an aggregated [nlat, nlon] map");
    const int h = map2d.shape[0], w = map2d.shape[1];
    std::vector<double> out(w, 0.0);
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) out[c] += map2d.data[static_cast<std::size_t>(r) * w + c];
        out[c] /= h;
    }
    return out;
}

RegionMask threshold_mask(const SaliencyMap& map, double tau) {
    require_aggregated(map, "threshold_mask");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("threshold tau must lie in (0, 1]");
    const int h = map.normalized.shape[0], w = map.normalized.shape[1];
    RegionMask mask = RegionMask::empty(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (map.normalized.data[static_cast<std::size_t>(r) * w + c] >= tau) mask.set(r, c, true);
    return mask;
}

namespace {
const char* channel_token(const SaliencyMap& map, int c) {
    return map.aggregated() ? "mean" : channel_name(c);
}
}  // namespace

void save_saliency_csv(std::ostream& os, const SaliencyMap& map, const GridSpec& grid) {
    const int channels = map.aggregated() ? 1 : map.raw.shape[0];
    const int h = map.aggregated() ? map.raw.shape[0] : map.raw.shape[1];
    const int w = map.aggregated() ? map.raw.shape[1] : map.raw.shape[2];
    if (h != grid.nlat || w != grid.nlon) throw ConfigError("saliency map does not match the grid");
    if (map.normalized.shape != map.raw.shape)
        throw ConfigError("saliency map is missing its normalized view");
    os << "channel,lat,lon,raw,normalized\n";
    char buf[160];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < channels; ++c)
        for (int r = 0; r < h; ++r)
            for (int col = 0; col < w; ++col) {
                const std::size_t i = c * plane + static_cast<std::size_t>(r) * w + col;
                std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g", channel_token(map, c),
                              grid.lat(r), grid.lon(col), map.raw.data[i], map.normalized.data[i]);
                os << buf << '\n';
            }
    if (!os) throw IoError("write failed while exporting saliency CSV");
}

void save_saliency_csv(const std::string& path, const SaliencyMap& map, const GridSpec& grid) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    save_saliency_csv(os, map, grid);
}

SaliencyMap load_saliency_csv(std::istream& is, const GridSpec& grid) {
    std::string line;
    if (!std::getline(is, line) || line != "channel,lat,lon,raw,normalized")
        throw IoError("saliency CSV has an unexpected header");
    const std::size_t plane = static_cast<std::size_t>(grid.nlat) * grid.nlon;
    std::vector<double> raw, norm;
    std::vector<std::uint8_t> seen;
    bool aggregated = false, decided = false;
    auto cell_index = [&grid](double lat, double lon) {
        const int r = static_cast<int>(std::lround((lat - grid.lat0) / grid.dlat));
        const int c = static_cast<int>(std::lround((lon - grid.lon0) / grid.dlon));
        if (r < 0 || r >= grid.nlat || c < 0 || c >= grid.nlon ||
            std::abs(grid.lat(r) - lat) > 1e-6 || std::abs(grid.lon(c) - lon) > 1e-6)
            throw IoError("saliency CSV cell does not sit on the dataset grid");
        return static_cast<std::size_t>(r) * grid.nlon + c;
    };
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string channel, f_lat, f_lon, f_raw, f_norm;
        if (!std::getline(ss, channel, ',') || !std::getline(ss, f_lat, ',') ||
            !std::getline(ss, f_lon, ',') || !std::getline(ss, f_raw, ',') ||
            !std::getline(ss, f_norm))
            throw IoError("saliency CSV row is malformed: " + line);
        int ch;
        if (channel == "mean") {
            ch = 0;
            if (decided && !aggregated) throw IoError("saliency CSV mixes mean and per-channel rows");
            aggregated = true;
        } else {
            ch = channel_index(channel);
            if (ch < 0) throw IoError("saliency CSV has unknown channel \"" + channel + "\"");
            if (decided && aggregated) throw IoError("saliency CSV mixes mean and per-channel rows");
        }
        if (!decided) {
            decided = true;
            const std::size_t total = aggregated ? plane : kFieldChannels * plane;
            raw.assign(total, 0.0);
            norm.assign(total, 0.0);
            seen.assign(total, 0);
        }
        const std::size_t i = ch * plane + cell_index(std::stod(f_lat), std::stod(f_lon));
        raw[i] = std::stod(f_raw);
        norm[i] = std::stod(f_norm);
        seen[i] = 1;
        ++rows;
    }
    if (!decided) throw IoError("saliency CSV has no data rows");
    for (std::uint8_t s : seen)
        if (!s) throw IoError("saliency CSV does not cover every grid cell");
    SaliencyMap map;
    map.method = "loaded";
    map.raw = aggregated ? Tensor::zeros({grid.nlat, grid.nlon})
                         : Tensor::zeros({kFieldChannels, grid.nlat, grid.nlon});
    map.normalized = Tensor::zeros(map.raw.shape);
    map.raw.data = std::move(raw);
    map.normalized.data = std::move(norm);
    (void)rows;
    return map;
}

SaliencyMap load_saliency_csv(const std::string& path, const GridSpec& grid) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path + " for reading");
    return load_saliency_csv(is, grid);
}

std::vector<std::string> save_saliency_pgm(const std::string& prefix, const SaliencyMap& map,
                                           const GridSpec& grid) {
    const int channels = map.aggregated() ? 1 : map.raw.shape[0];
    const int h = map.aggregated() ? map.raw.shape[0] : map.raw.shape[1];
    const int w = map.aggregated() ? map.raw.shape[1] : map.raw.shape[2];
    if (h != grid.nlat || w != grid.nlon) throw ConfigError("saliency map does not match the grid");
    if (map.normalized.shape != map.raw.shape)
        throw ConfigError("saliency map is missing its normalized view");
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<std::string> paths;
    for (int c = 0; c < channels; ++c) {
        const std::string path = prefix + "_" + channel_token(map, c) + ".pgm";
        std::ofstream os(path, std::ios::binary);
        if (!os) throw IoError("cannot open " + path + " for writing");
        os << "P5\n" << w << ' ' << h << "\n255\n";
        // Row 0 of the file is the northernmost latitude.
        for (int rr = 0; rr < h; ++rr) {
            const int r = grid.dlat < 0 ? rr : h - 1 - rr;
            for (int col = 0; col < w; ++col) {
                const double v = map.normalized.data[c * plane + static_cast<std::size_t>(r) * w + col];
                os.put(static_cast<char>(static_cast<int>(std::lround(v * 255.0))));
            }
        }
        if (!os) throw IoError("write failed while exporting " + path);
        paths.push_back(path);
    }
    return paths;
}

}  // namespace pptv
