#include "pptv/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "pptv/error.hpp"

namespace pptv {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        const long long n = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<int>(n);
    } catch (const std::exception&) {
        throw ConfigError("bad integer for " + where + ": \"" + v + "\"");
    }
}

std::uint64_t to_u64(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        const std::uint64_t n = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ConfigError("bad unsigned integer for " + where + ": \"" + v + "\"");
    }
}

double to_double(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad number for " + where + ": \"" + v + "\"");
    }
}

bool to_bool(const std::string& v, const std::string& where) {
    if (v == "1" || v == "true" || v == "on") return true;
    if (v == "0" || v == "false" || v == "off") return false;
    throw ConfigError("bad flag for " + where + ": \"" + v + "\" (use 0/1)");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Entry {
    const char* section;
    const char* key;
    const char* desc;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define INT_ENTRY(sec, key, field, desc)                                                     \
    Entry{sec, key, desc,                                                                    \
          [](RunConfig& c, const std::string& v, const std::string& w) { c.field = to_int(v, w); }, \
          [](const RunConfig& c) { return std::to_string(c.field); }}
#define DBL_ENTRY(sec, key, field, desc)                                                     \
    Entry{sec, key, desc,                                                                    \
          [](RunConfig& c, const std::string& v, const std::string& w) { c.field = to_double(v, w); }, \
          [](const RunConfig& c) { return fmt(c.field); }}

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = {
        INT_ENTRY("grid", "nlat", grid.nlat, "grid rows (latitudes)"),
        INT_ENTRY("grid", "nlon", grid.nlon, "grid columns (longitudes)"),
        DBL_ENTRY("grid", "lat0", grid.lat0, "latitude of row 0, degrees"),
        DBL_ENTRY("grid", "dlat", grid.dlat, "latitude step per row, degrees"),
        DBL_ENTRY("grid", "lon0", grid.lon0, "longitude of column 0, degrees east"),
        DBL_ENTRY("grid", "dlon", grid.dlon, "longitude step per column, degrees"),

        INT_ENTRY("synth", "n_samples", synth.n_samples, "number of sliding-window samples"),
        INT_ENTRY("synth", "n_leads", synth.n_leads, "target leads generated per sample"),
        INT_ENTRY("synth", "n_drivers", synth.n_drivers, "driver bump patterns inside the box"),
        INT_ENTRY("synth", "n_distractors", synth.n_distractors, "distractor bumps outside the box"),
        DBL_ENTRY("synth", "driver_lat_min", synth.driver_box.lat_min, "driver box south edge"),
        DBL_ENTRY("synth", "driver_lat_max", synth.driver_box.lat_max, "driver box north edge"),
        DBL_ENTRY("synth", "driver_lon_min", synth.driver_box.lon_min, "driver box west edge"),
        DBL_ENTRY("synth", "driver_lon_max", synth.driver_box.lon_max, "driver box east edge"),
        INT_ENTRY("synth", "driver_lag", synth.driver_lag, "months the index lags the driver"),
        INT_ENTRY("synth", "hc_lead", synth.hc_lead, "months the HC precursor leads the driver"),
        DBL_ENTRY("synth", "ar1", synth.ar1, "AR(1) coefficient of the monthly series"),
        DBL_ENTRY("synth", "alpha", synth.alpha, "linear index coefficient"),
        DBL_ENTRY("synth", "beta", synth.beta, "quadratic index coefficient"),
        DBL_ENTRY("synth", "noise_level", synth.noise_level, "white noise sigma / clean RMS"),

        Entry{"model", "conv_filters", "conv layer filter counts, three comma-separated",
              [](RunConfig& c, const std::string& v, const std::string& w) {
                  std::istringstream ss(v);
                  std::string part;
                  for (int i = 0; i < 3; ++i) {
                      if (!std::getline(ss, part, ','))
                          throw ConfigError(w + " needs 3 comma-separated counts");
                      c.model.conv_filters[i] = to_int(trim(part), w);
                  }
                  if (std::getline(ss, part, ','))
                      throw ConfigError(w + " needs exactly 3 comma-separated counts");
              },
              [](const RunConfig& c) {
                  return std::to_string(c.model.conv_filters[0]) + "," +
                         std::to_string(c.model.conv_filters[1]) + "," +
                         std::to_string(c.model.conv_filters[2]);
              }},
        INT_ENTRY("model", "dense_neurons", model.dense_neurons, "hidden dense layer width"),
        INT_ENTRY("model", "kernel_h", model.kernel_h, "conv kernel rows"),
        INT_ENTRY("model", "kernel_w", model.kernel_w, "conv kernel columns"),
        Entry{"model", "calibration", "enable pre-activation calibration layers (0/1)",
              [](RunConfig& c, const std::string& v, const std::string& w) {
                  c.model.calibration_enabled = to_bool(v, w);
              },
              [](const RunConfig& c) { return c.model.calibration_enabled ? "1" : "0"; }},
        Entry{"model", "target_month", "calendar month the model targets, 1..12 or \"all\"",
              [](RunConfig& c, const std::string& v, const std::string& w) {
                  c.model.target_month = v == "all" ? 0 : to_int(v, w);
              },
              [](const RunConfig& c) {
                  return c.model.target_month == 0 ? std::string("all")
                                                   : std::to_string(c.model.target_month);
              }},
        Entry{"model", "seed", "parameter initialization seed",
              [](RunConfig& c, const std::string& v, const std::string& w) {
                  c.model.seed = to_u64(v, w);
              },
              [](const RunConfig& c) { return std::to_string(c.model.seed); }},

        INT_ENTRY("train", "epochs", train.epochs, "training epochs"),
        INT_ENTRY("train", "batch", train.batch, "mini-batch size"),
        DBL_ENTRY("train", "learning_rate", train.learning_rate, "gradient step size"),
        Entry{"train", "optimizer", "\"gd\" or \"momentum\"",
              [](RunConfig& c, const std::string& v, const std::string&) { c.train.optimizer = v; },
              [](const RunConfig& c) { return c.train.optimizer; }},
        DBL_ENTRY("train", "momentum", train.momentum, "momentum coefficient"),
        INT_ENTRY("train", "patience", train.patience, "early-stop patience in epochs, 0 = off"),
        Entry{"train", "seed", "split/shuffle seed",
              [](RunConfig& c, const std::string& v, const std::string& w) {
                  c.train.seed = to_u64(v, w);
              },
              [](const RunConfig& c) { return std::to_string(c.train.seed); }},

        Entry{"attribution", "method", "pptv | perturbation | vbp | gradcam",
              [](RunConfig& c, const std::string& v, const std::string& w) {
                  if (v != "pptv" && v != "perturbation" && v != "vbp" && v != "gradcam")
                      throw ConfigError("bad value for " + w + ": \"" + v + "\"");
                  c.attribution.method = v;
              },
              [](const RunConfig& c) { return c.attribution.method; }},
        INT_ENTRY("attribution", "patch_h", attribution.patch_h, "perturbation patch rows"),
        INT_ENTRY("attribution", "patch_w", attribution.patch_w, "perturbation patch columns"),
        INT_ENTRY("attribution", "stride", attribution.stride, "perturbation patch stride"),
        DBL_ENTRY("attribution", "fill", attribution.fill, "perturbation fill value (anomaly units)"),
        INT_ENTRY("attribution", "workers", attribution.workers, "worker threads for per-sample passes"),
        DBL_ENTRY("attribution", "z_sat", attribution.z_sat, "saturation threshold on |pre-activation|"),
        DBL_ENTRY("attribution", "threshold", attribution.threshold, "saliency mask threshold tau"),
    };
    return table;
}

#undef INT_ENTRY
#undef DBL_ENTRY

void sync_derived(RunConfig& c) {
    c.synth.grid = c.grid;
    c.model.nlat = c.grid.nlat;
    c.model.nlon = c.grid.nlon;
}

}  // namespace

RunConfig RunConfig::parse(std::istream& is, const std::string& source_name) {
    RunConfig cfg;
    std::string line, section;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = source_name + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header " + line);
            section = trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const Entry& e : entries()) known = known || section == e.section;
            if (!known) throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) throw ConfigError(where + ": key " + key + " appears before any section");
        const Entry* hit = nullptr;
        for (const Entry& e : entries())
            if (section == e.section && key == e.key) {
                hit = &e;
                break;
            }
        if (!hit) throw ConfigError(where + ": unknown key " + key + " in section [" + section + "]");
        hit->set(cfg, value, section + "." + key);
    }
    sync_derived(cfg);
    // Reject bad values at load time; commands that override fields later
    // (lead, grid from the dataset) re-validate what they change.
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file " + path);
    return parse(is, path);
}

std::string RunConfig::canonical() const {
    std::ostringstream os;
    std::string section;
    for (const Entry& e : entries()) {
        if (section != e.section) {
            section = e.section;
            os << '[' << section << "]\n";
        }
        os << e.key << '=' << e.get(*this) << '\n';
    }
    return os.str();
}

std::string RunConfig::help_text() {
    const RunConfig defaults;
    std::ostringstream os;
    os << "Config file keys (key = default):\n";
    std::string section;
    for (const Entry& e : entries()) {
        if (section != e.section) {
            section = e.section;
            os << "  [" << section << "]\n";
        }
        std::string head = std::string("    ") + e.key + " = " + e.get(defaults);
        if (head.size() < 34) head.resize(34, ' ');
        os << head << "  " << e.desc << '\n';
    }
    return os.str();
}

}  // namespace pptv
