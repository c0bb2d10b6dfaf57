#include "pptv/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "binio.hpp"
#include "pptv/error.hpp"

namespace pptv {

namespace {
constexpr char kMagic[] = "PPTVDAT1";
}

void save_grid(std::ostream& os, const Dataset& ds) {
    os.write(kMagic, 8);
    binio::put_u64(os, ds.samples.size());
    binio::put_u64(os, static_cast<std::uint64_t>(ds.grid.nlat));
    binio::put_u64(os, static_cast<std::uint64_t>(ds.grid.nlon));
    binio::put_u64(os, kFieldChannels);
    binio::put_f64(os, ds.grid.lat0);
    binio::put_f64(os, ds.grid.dlat);
    binio::put_f64(os, ds.grid.lon0);
    binio::put_f64(os, ds.grid.dlon);
    for (const GridSample& s : ds.samples) {
        if (s.fields.shape != std::vector<int>{kFieldChannels, ds.grid.nlat, ds.grid.nlon})
            throw ConfigError("sample fields do not match the dataset grid");
        binio::put_u8(os, static_cast<std::uint8_t>(s.start_month));
        binio::put_u64(os, s.targets.size());
        for (double t : s.targets) binio::put_f64(os, t);
        for (double v : s.fields.data) binio::put_f64(os, v);
    }
    if (!os) throw IoError("write failed while saving dataset");
}

void save_grid(const std::string& path, const Dataset& ds) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    save_grid(os, ds);
}

Dataset load_grid(std::istream& is) {
    binio::expect_magic(is, kMagic, "dataset");
    const std::uint64_t n_samples_raw = binio::get_u64(is, "sample count");
    Dataset ds;
    ds.grid.nlat = binio::checked_extent(binio::get_u64(is, "nlat"), "nlat", 1u << 16);
    ds.grid.nlon = binio::checked_extent(binio::get_u64(is, "nlon"), "nlon", 1u << 16);
    const int channels = binio::checked_extent(binio::get_u64(is, "channel count"), "channel count", 64);
    if (channels != kFieldChannels)
        throw ExtentError("dataset has " + std::to_string(channels) + " channels, expected 6");
    if (static_cast<std::uint64_t>(ds.grid.nlat) * ds.grid.nlon > (1u << 24))
        throw ExtentError("grid extent overflow");
    if (n_samples_raw > (1u << 24)) throw ExtentError("sample count out of range");
    ds.grid.lat0 = binio::get_f64(is, "lat0");
    ds.grid.dlat = binio::get_f64(is, "dlat");
    ds.grid.lon0 = binio::get_f64(is, "lon0");
    ds.grid.dlon = binio::get_f64(is, "dlon");
    const std::size_t cells = static_cast<std::size_t>(ds.grid.nlat) * ds.grid.nlon;
    ds.samples.reserve(n_samples_raw);
    for (std::uint64_t i = 0; i < n_samples_raw; ++i) {
        GridSample s;
        s.start_month = binio::get_u8(is, "start month");
        if (s.start_month < 1 || s.start_month > 12)
            throw ExtentError("start month out of range: " + std::to_string(s.start_month));
        const std::uint64_t n_targets = binio::get_u64(is, "target count");
        if (n_targets > 1024) throw ExtentError("target count out of range");
        s.targets.resize(n_targets);
        for (auto& t : s.targets) t = binio::get_f64(is, "target");
        s.fields = Tensor::zeros({kFieldChannels, ds.grid.nlat, ds.grid.nlon});
        for (std::size_t j = 0; j < kFieldChannels * cells; ++j)
            s.fields.data[j] = binio::get_f64(is, "field value");
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

Dataset load_grid(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path + " for reading");
    return load_grid(is);
}

void export_field_csv(std::ostream& os, const Tensor& field, const GridSpec& grid) {
    if (field.shape.size() != 2 || field.shape[0] != grid.nlat || field.shape[1] != grid.nlon)
        throw ConfigError("export_field_csv expects a [nlat, nlon] field matching the grid");
    os << "lat,lon,value\n";
    char buf[128];
    for (int r = 0; r < grid.nlat; ++r)
        for (int c = 0; c < grid.nlon; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", grid.lat(r), grid.lon(c),
                          field.data[static_cast<std::size_t>(r) * grid.nlon + c]);
            os << buf << '\n';
        }
    if (!os) throw IoError("write failed while exporting field CSV");
}

void export_field_csv(const std::string& path, const Tensor& field, const GridSpec& grid) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    export_field_csv(os, field, grid);
}

}  // namespace pptv
