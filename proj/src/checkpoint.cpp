#include "pptv/checkpoint.hpp"

#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "binio.hpp"
#include "pptv/error.hpp"

namespace pptv {

namespace {

constexpr char kMagic[] = "PPTVMDL1";

void put_string(std::ostream& os, const std::string& s) {
    binio::put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is, const char* what) {
    const std::uint64_t n = binio::get_u64(is, what);
    if (n > (1u << 20)) throw ExtentError(std::string(what) + " length out of range");
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::uint64_t>(is.gcount()) != n)
        throw TruncatedError(std::string("truncated payload reading ") + what);
    return s;
}

int parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long long n = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<int>(n);
    } catch (const std::exception&) {
        throw IoError("checkpoint config: bad value for " + key + ": \"" + v + "\"");
    }
}

ModelConfig parse_config(const std::vector<std::string>& lines) {
    std::map<std::string, std::string> kv;
    for (const std::string& line : lines) {
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw IoError("checkpoint config line missing '=': " + line);
        if (!kv.emplace(line.substr(0, eq), line.substr(eq + 1)).second)
            throw IoError("checkpoint config repeats key " + line.substr(0, eq));
    }
    ModelConfig c;
    auto take = [&kv](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw IoError("checkpoint config missing key " + key);
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    {
        std::istringstream ss(take("conv_filters"));
        std::string part;
        for (int i = 0; i < 3; ++i) {
            if (!std::getline(ss, part, ',')) throw IoError("checkpoint config: conv_filters needs 3 entries");
            c.conv_filters[i] = parse_int(part, "conv_filters");
        }
        if (std::getline(ss, part, ',')) throw IoError("checkpoint config: conv_filters needs 3 entries");
    }
    c.dense_neurons = parse_int(take("dense_neurons"), "dense_neurons");
    c.lead_months = parse_int(take("lead_months"), "lead_months");
    const std::string tm = take("target_month");
    c.target_month = tm == "all" ? 0 : parse_int(tm, "target_month");
    c.calibration_enabled = parse_int(take("calibration_enabled"), "calibration_enabled") != 0;
    {
        const std::string v = take("seed");
        try {
            std::size_t pos = 0;
            c.seed = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
            throw IoError("checkpoint config: bad value for seed: \"" + v + "\"");
        }
    }
    c.nlat = parse_int(take("nlat"), "nlat");
    c.nlon = parse_int(take("nlon"), "nlon");
    c.kernel_h = parse_int(take("kernel_h"), "kernel_h");
    c.kernel_w = parse_int(take("kernel_w"), "kernel_w");
    if (!kv.empty()) throw IoError("checkpoint config has unknown key " + kv.begin()->first);
    return c;
}

struct NamedParam {
    std::string name;
    const Tensor* tensor;
};

std::vector<NamedParam> named_params(const Model& m) {
    std::vector<NamedParam> ps;
    for (int i = 0; i < 3; ++i) {
        const std::string n = std::to_string(i + 1);
        ps.push_back({"conv" + n + ".weight", &m.conv_w[i]});
        ps.push_back({"conv" + n + ".bias", &m.conv_b[i]});
        if (m.config.calibration_enabled) {
            ps.push_back({"calib" + n + ".gamma", &m.gamma[i]});
            ps.push_back({"calib" + n + ".beta", &m.beta[i]});
        }
    }
    for (int i = 0; i < 2; ++i) {
        const std::string n = std::to_string(i + 1);
        ps.push_back({"dense" + n + ".weight", &m.dense_w[i]});
        ps.push_back({"dense" + n + ".bias", &m.dense_b[i]});
    }
    return ps;
}

}  // namespace

void save_model(std::ostream& os, const Model& model) {
    os.write(kMagic, 8);
    const auto lines = config_lines(model.config);
    binio::put_u64(os, lines.size());
    for (const auto& line : lines) put_string(os, line);
    const auto params = named_params(model);
    binio::put_u64(os, params.size());
    for (const auto& [name, tensor] : params) {
        put_string(os, name);
        binio::put_u64(os, tensor->shape.size());
        for (int e : tensor->shape) binio::put_u64(os, static_cast<std::uint64_t>(e));
        for (double v : tensor->data) binio::put_f64(os, v);
    }
    if (!os) throw IoError("write failed while saving checkpoint");
}

void save_model(const std::string& path, const Model& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    save_model(os, model);
}

Model load_model(std::istream& is) {
    binio::expect_magic(is, kMagic, "checkpoint");
    const std::uint64_t n_lines = binio::get_u64(is, "config line count");
    if (n_lines > 1024) throw ExtentError("config line count out of range");
    std::vector<std::string> lines;
    for (std::uint64_t i = 0; i < n_lines; ++i) lines.push_back(get_string(is, "config line"));
    Model model = Model::build(parse_config(lines));

    std::map<std::string, Tensor*> slots;
    for (const auto& [name, tensor] : named_params(model))
        slots[name] = const_cast<Tensor*>(tensor);

    const std::uint64_t n_params = binio::get_u64(is, "parameter count");
    if (n_params != slots.size())
        throw ExtentError("checkpoint has " + std::to_string(n_params) + " tensors, expected " +
                          std::to_string(slots.size()));
    for (std::uint64_t i = 0; i < n_params; ++i) {
        const std::string name = get_string(is, "tensor name");
        auto it = slots.find(name);
        if (it == slots.end()) throw IoError("checkpoint has unknown tensor \"" + name + "\"");
        Tensor* dst = it->second;
        slots.erase(it);
        const std::uint64_t rank = binio::get_u64(is, "tensor rank");
        if (rank > 8) throw ExtentError("tensor rank out of range");
        std::vector<int> shape;
        for (std::uint64_t d = 0; d < rank; ++d)
            shape.push_back(binio::checked_extent(binio::get_u64(is, "tensor extent"), "tensor"));
        if (shape != dst->shape)
            throw ExtentError("checkpoint tensor \"" + name + "\" has the wrong shape");
        for (double& v : dst->data) v = binio::get_f64(is, "tensor value");
    }
    return model;
}

Model load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path + " for reading");
    return load_model(is);
}

}  // namespace pptv
