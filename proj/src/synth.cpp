#include "pptv/synth.hpp"

#include <cmath>

#include "pptv/error.hpp"
#include "pptv/rng.hpp"

namespace pptv {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kBurnIn = 48;  // warmup months discarded before the kept range

// Signed longitude difference wrapped to [-180, 180).
double lon_delta(double a, double b) { return std::fmod(a - b + 540.0, 360.0) - 180.0; }

struct Bump {
    double lat_c = 0.0, lon_c = 0.0;
    double rlat = 1.0, rlon = 1.0;
    double amp = 1.0;
};

// cos^2 bump with compact elliptical support, rasterized onto the grid.
std::vector<double> rasterize(const GridSpec& g, const Bump& b) {
    std::vector<double> plane(static_cast<std::size_t>(g.nlat) * g.nlon, 0.0);
    for (int r = 0; r < g.nlat; ++r) {
        const double dy = (g.lat(r) - b.lat_c) / b.rlat;
        if (dy * dy >= 1.0) continue;
        for (int c = 0; c < g.nlon; ++c) {
            const double dx = lon_delta(g.lon(c), b.lon_c) / b.rlon;
            const double d2 = dx * dx + dy * dy;
            if (d2 >= 1.0) continue;
            const double v = std::cos(0.5 * kPi * std::sqrt(d2));
            plane[static_cast<std::size_t>(r) * g.nlon + c] = b.amp * v * v;
        }
    }
    return plane;
}

bool support_in_mask(const std::vector<double>& plane, const RegionMask& mask) {
    for (std::size_t i = 0; i < plane.size(); ++i)
        if (plane[i] != 0.0 && mask.cells[i] == 0) return false;
    return true;
}

// Affine map derived from the kept months, applicable slightly before them.
struct Standardizer {
    double mu = 0.0, sd = 1.0;
    double operator()(double v) const { return (v - mu) / sd; }
};

Standardizer fit(const std::vector<double>& raw, int from, int count) {
    double mu = 0.0;
    for (int t = 0; t < count; ++t) mu += raw[from + t];
    mu /= count;
    double var = 0.0;
    for (int t = 0; t < count; ++t) {
        const double d = raw[from + t] - mu;
        var += d * d;
    }
    const double sd = std::sqrt(var / count);
    if (!(sd > 0.0)) throw NumericError("degenerate coefficient series in generator");
    return {mu, sd};
}

std::vector<double> ar1_series(Rng& rng, double rho, int n) {
    std::vector<double> s(n);
    const double scale = std::sqrt(1.0 - rho * rho);
    double prev = 0.0;
    for (int t = 0; t < n; ++t) {
        prev = rho * prev + scale * rng.normal();
        s[t] = prev;
    }
    return s;
}

}  // namespace

SynthOutput synth_generate(std::uint64_t seed, const SynthConfig& cfg) {
    const GridSpec& g = cfg.grid;
    if (cfg.n_samples < 1) throw ConfigError("n_samples must be at least 1");
    if (cfg.n_leads < 1) throw ConfigError("n_leads must be at least 1");
    if (cfg.n_drivers < 1) throw ConfigError("n_drivers must be at least 1");
    if (cfg.n_distractors < 0) throw ConfigError("n_distractors must be non-negative");
    if (!(cfg.ar1 > -1.0 && cfg.ar1 < 1.0)) throw ConfigError("ar1 must lie in (-1, 1)");
    if (cfg.noise_level < 0.0) throw ConfigError("noise_level must be non-negative");
    if (cfg.driver_lag < 0 || cfg.driver_lag > kBurnIn)
        throw ConfigError("driver_lag must lie in [0, 48]");
    if (cfg.hc_lead < 0 || cfg.hc_lead > kBurnIn) throw ConfigError("hc_lead must lie in [0, 48]");

    RegionMask driver_mask = RegionMask::from_box(g, cfg.driver_box);
    if (driver_mask.count() == 0) throw ConfigError("driver box lies outside the grid");

    const double grid_lat_lo = std::min(g.lat(0), g.lat(g.nlat - 1));
    const double grid_lat_hi = std::max(g.lat(0), g.lat(g.nlat - 1));
    if (cfg.driver_box.lat_min < grid_lat_lo || cfg.driver_box.lat_max > grid_lat_hi)
        throw ConfigError("driver box extends beyond the grid");

    Rng rng(seed);

    // Driver bumps sit on an even longitude layout inside the box; the HC
    // precursor bump is a wider blob at the same center. Radii keep the
    // supports strictly inside the box.
    const double box_h = cfg.driver_box.lat_max - cfg.driver_box.lat_min;
    const double box_w = cfg.driver_box.lon_max - cfg.driver_box.lon_min;
    const double lat_mid = 0.5 * (cfg.driver_box.lat_min + cfg.driver_box.lat_max);
    const double slot_w = box_w / cfg.n_drivers;
    std::vector<std::vector<double>> sst_driver_pat, hc_driver_pat;
    for (int d = 0; d < cfg.n_drivers; ++d) {
        const double lon_c = cfg.driver_box.lon_min + (d + 0.5) * slot_w;
        Bump sst{lat_mid, lon_c, 0.32 * box_h, 0.32 * slot_w, 1.0};
        Bump hc{lat_mid, lon_c, 0.48 * box_h, 0.48 * slot_w, 1.0};
        auto ps = rasterize(g, sst);
        auto ph = rasterize(g, hc);
        bool any = false;
        for (double v : ps) any = any || v != 0.0;
        if (!any) throw ConfigError("driver pattern has no grid support; box too small for the grid");
        if (!support_in_mask(ps, driver_mask) || !support_in_mask(ph, driver_mask))
            throw ConfigError("driver pattern escapes the driver box");
        sst_driver_pat.push_back(std::move(ps));
        hc_driver_pat.push_back(std::move(ph));
    }

    // Distractor bumps: rejection-sampled centers whose (conservative)
    // bounding boxes avoid the driver box entirely.
    const double box_lon_mid = 0.5 * (cfg.driver_box.lon_min + cfg.driver_box.lon_max);
    const double dist_rlat = 10.0, dist_rlon = 25.0;
    auto place_distractor = [&](double amp) -> std::vector<double> {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const double lat_c = rng.uniform(grid_lat_lo + dist_rlat, grid_lat_hi - dist_rlat);
            const double lon_c = rng.uniform(0.0, 360.0);
            const bool lat_clear = std::abs(lat_c - lat_mid) > dist_rlat + 0.5 * box_h;
            const bool lon_clear = std::abs(lon_delta(lon_c, box_lon_mid)) > dist_rlon + 0.5 * box_w;
            if (!lat_clear && !lon_clear) continue;
            Bump b{lat_c, lon_c, dist_rlat, dist_rlon, amp};
            return rasterize(g, b);
        }
        throw ConfigError("could not place distractor patterns outside the driver box");
    };
    std::vector<std::vector<double>> sst_dist_pat, hc_dist_pat;
    for (int q = 0; q < cfg.n_distractors; ++q) sst_dist_pat.push_back(place_distractor(rng.uniform(0.6, 1.2)));
    for (int q = 0; q < cfg.n_distractors; ++q) hc_dist_pat.push_back(place_distractor(rng.uniform(0.6, 1.2)));

    // Monthly series. The precursor p is a plain AR(1); the driver coefficient
    // is the same recursion forced by p at a delay, with no innovation of its
    // own, so the precursor fields carry all the forward information.
    const int T = cfg.n_samples + cfg.n_leads + 3;
    const int total = kBurnIn + T;
    const double kappa = 0.6;
    std::vector<std::vector<double>> p_raw(cfg.n_drivers), s_raw(cfg.n_drivers);
    std::vector<Standardizer> p_std(cfg.n_drivers), s_std(cfg.n_drivers);
    for (int d = 0; d < cfg.n_drivers; ++d) {
        p_raw[d] = ar1_series(rng, cfg.ar1, total);
        s_raw[d].assign(total, 0.0);
        double prev = 0.0;
        for (int t = 0; t < total; ++t) {
            const double forcing = t >= cfg.hc_lead ? p_raw[d][t - cfg.hc_lead] : 0.0;
            prev = cfg.ar1 * prev + kappa * forcing;
            s_raw[d][t] = prev;
        }
        p_std[d] = fit(p_raw[d], kBurnIn, T);
        s_std[d] = fit(s_raw[d], kBurnIn, T);
    }
    std::vector<std::vector<double>> u_raw(sst_dist_pat.size()), v_raw(hc_dist_pat.size());
    std::vector<Standardizer> u_std(u_raw.size()), v_std(v_raw.size());
    for (std::size_t q = 0; q < u_raw.size(); ++q) {
        u_raw[q] = ar1_series(rng, cfg.ar1, total);
        u_std[q] = fit(u_raw[q], kBurnIn, T);
    }
    for (std::size_t q = 0; q < v_raw.size(); ++q) {
        v_raw[q] = ar1_series(rng, cfg.ar1, total);
        v_std[q] = fit(v_raw[q], kBurnIn, T);
    }

    // Mean driver coefficient, restandardized over the kept months. c_at(t)
    // accepts t down to -kBurnIn so lagged reads stay in range.
    auto c_plain = [&](int t) {
        double acc = 0.0;
        for (int d = 0; d < cfg.n_drivers; ++d) acc += s_std[d](s_raw[d][kBurnIn + t]);
        return acc / cfg.n_drivers;
    };
    std::vector<double> c_kept(T);
    for (int t = 0; t < T; ++t) c_kept[t] = c_plain(t);
    const Standardizer c_std = fit(c_kept, 0, T);
    auto c_at = [&](int t) { return c_std(c_plain(t)); };

    std::vector<double> index(T);
    for (int t = 0; t < T; ++t) {
        const double c = c_at(t - cfg.driver_lag);
        index[t] = cfg.alpha * c + cfg.beta * (c * c - 1.0);
    }

    // Clean monthly planes, then white noise scaled to the clean RMS.
    const std::size_t cells = static_cast<std::size_t>(g.nlat) * g.nlon;
    std::vector<std::vector<double>> sst_planes(T), hc_planes(T);
    double sst_sq = 0.0, hc_sq = 0.0;
    for (int t = 0; t < T; ++t) {
        std::vector<double> sst(cells, 0.0), hc(cells, 0.0);
        for (int d = 0; d < cfg.n_drivers; ++d) {
            const double cs = s_std[d](s_raw[d][kBurnIn + t]);
            const double cp = p_std[d](p_raw[d][kBurnIn + t]);
            for (std::size_t i = 0; i < cells; ++i) {
                sst[i] += sst_driver_pat[d][i] * cs;
                hc[i] += hc_driver_pat[d][i] * cp;
            }
        }
        for (std::size_t q = 0; q < sst_dist_pat.size(); ++q) {
            const double cu = u_std[q](u_raw[q][kBurnIn + t]);
            for (std::size_t i = 0; i < cells; ++i) sst[i] += sst_dist_pat[q][i] * cu;
        }
        for (std::size_t q = 0; q < hc_dist_pat.size(); ++q) {
            const double cv = v_std[q](v_raw[q][kBurnIn + t]);
            for (std::size_t i = 0; i < cells; ++i) hc[i] += hc_dist_pat[q][i] * cv;
        }
        for (std::size_t i = 0; i < cells; ++i) {
            sst_sq += sst[i] * sst[i];
            hc_sq += hc[i] * hc[i];
        }
        sst_planes[t] = std::move(sst);
        hc_planes[t] = std::move(hc);
    }
    if (cfg.noise_level > 0.0) {
        const double sig_sst = cfg.noise_level * std::sqrt(sst_sq / (T * cells));
        const double sig_hc = cfg.noise_level * std::sqrt(hc_sq / (T * cells));
        for (int t = 0; t < T; ++t)
            for (std::size_t i = 0; i < cells; ++i) sst_planes[t][i] += sig_sst * rng.normal();
        for (int t = 0; t < T; ++t)
            for (std::size_t i = 0; i < cells; ++i) hc_planes[t][i] += sig_hc * rng.normal();
    }

    SynthOutput out;
    out.dataset.grid = g;
    out.dataset.samples.reserve(cfg.n_samples);
    for (int m = 0; m < cfg.n_samples; ++m) {
        GridSample s;
        s.fields = Tensor::zeros({kFieldChannels, g.nlat, g.nlon});
        for (int k = 0; k < 3; ++k) {
            std::copy(sst_planes[m + k].begin(), sst_planes[m + k].end(),
                      s.fields.data.begin() + static_cast<std::ptrdiff_t>(k * cells));
            std::copy(hc_planes[m + k].begin(), hc_planes[m + k].end(),
                      s.fields.data.begin() + static_cast<std::ptrdiff_t>((3 + k) * cells));
        }
        s.start_month = m % 12 + 1;
        s.targets.resize(cfg.n_leads);
        for (int lead = 1; lead <= cfg.n_leads; ++lead) {
            const int center = m + 2 + lead;
            s.targets[lead - 1] = (index[center - 1] + index[center] + index[center + 1]) / 3.0;
        }
        out.dataset.samples.push_back(std::move(s));
    }

    out.truth.driver_mask = std::move(driver_mask);
    out.truth.driver_lag = cfg.driver_lag;
    out.truth.noise_level = cfg.noise_level;
    out.truth.alpha = cfg.alpha;
    out.truth.beta = cfg.beta;
    out.truth.hc_lead = cfg.hc_lead;
    out.truth.sst_series.resize(cfg.n_drivers);
    out.truth.hc_series.resize(cfg.n_drivers);
    for (int d = 0; d < cfg.n_drivers; ++d) {
        out.truth.sst_series[d].resize(T);
        out.truth.hc_series[d].resize(T);
        for (int t = 0; t < T; ++t) {
            out.truth.sst_series[d][t] = s_std[d](s_raw[d][kBurnIn + t]);
            out.truth.hc_series[d][t] = p_std[d](p_raw[d][kBurnIn + t]);
        }
    }
    out.truth.index = std::move(index);
    return out;
}

}  // namespace pptv
