// Acceptance gate for the attribution rig. Runs ten end-to-end checks, prints
// one PASS/FAIL line per criterion, and exits with the number of failures.
// Golden PGM files are regenerated with --write-golden after deliberate
// format changes.

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "pptv/attribution.hpp"
#include "pptv/checkpoint.hpp"
#include "pptv/dataset_io.hpp"
#include "pptv/error.hpp"
#include "pptv/rng.hpp"
#include "pptv/saliency.hpp"
#include "pptv/synth.hpp"
#include "pptv/train.hpp"

namespace fs = std::filesystem;
using namespace pptv;

namespace {

int failures = 0;

void report(int n, bool pass, const std::string& what) {
    std::printf("criterion %d: %s - %s\n", n, pass ? "PASS" : "FAIL", what.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

const std::string& tmp_dir() {
    static const std::string dir = [] {
        fs::remove_all("acceptance_tmp");
        fs::create_directories("acceptance_tmp");
        return std::string("acceptance_tmp");
    }();
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

GridSpec desk_grid() {
    GridSpec g;
    g.nlat = 12;
    g.nlon = 36;
    g.lat0 = 27.5;
    g.dlat = -5.0;
    g.lon0 = 5.0;
    g.dlon = 10.0;
    return g;
}

SynthConfig desk_synth(int n_samples, double noise) {
    SynthConfig c;
    c.grid = desk_grid();
    c.n_samples = n_samples;
    c.n_leads = 1;
    c.noise_level = noise;
    return c;
}

ModelConfig desk_model(std::uint64_t seed) {
    ModelConfig c;
    c.conv_filters = {4, 4, 4};
    c.dense_neurons = 8;
    c.nlat = 12;
    c.nlon = 36;
    c.seed = seed;
    return c;
}

struct LinearFn : ScalarFn {
    std::vector<int> shape;
    std::vector<double> a;
    const std::vector<int>& input_shape() const override { return shape; }
    double value(const Tensor& x) const override {
        return std::inner_product(a.begin(), a.end(), x.data.begin(), 0.0);
    }
    double value_and_grad(const Tensor& x, std::vector<double>& grad) const override {
        grad = a;
        return value(x);
    }
};

struct DiagQuadFn : ScalarFn {
    std::vector<int> shape;
    std::vector<double> c;
    const std::vector<int>& input_shape() const override { return shape; }
    double value(const Tensor& x) const override {
        double s = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) s += c[i] * x.data[i] * x.data[i];
        return s;
    }
    double value_and_grad(const Tensor& x, std::vector<double>& grad) const override {
        grad.resize(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) grad[i] = 2.0 * c[i] * x.data[i];
        return value(x);
    }
};

// Average-tie ranks, then Pearson on the ranks. Perturbation shares one patch
// delta across covered cells, so exact ties are common there.
double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        std::size_t i = 0;
        while (i < idx.size()) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double mean_rank = 0.5 * (i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mean_rank;
            i = j + 1;
        }
        return r;
    };
    return correlation_skill(ranks(a), ranks(b));
}

// ---- criterion 1: autodiff vs central finite differences -------------------

void criterion_1() {
    // Per-cell discrepancy scaled by the gradient's own magnitude: at step
    // 1e-6 central differences resolve about 5e-11 in absolute terms, so
    // cells whose true gradient is below ~1e-6 cannot be judged relative to
    // themselves and are judged relative to the gradient scale instead.
    constexpr double kTol = 1e-4;
    constexpr double kStep = 1e-6;
    Rng rng(314159);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        ModelConfig cfg;
        cfg.nlat = 8 + static_cast<int>(rng.below(4));
        cfg.nlon = 9 + static_cast<int>(rng.below(5));
        for (int& f : cfg.conv_filters) f = 1 + static_cast<int>(rng.below(3));
        cfg.dense_neurons = 2 + static_cast<int>(rng.below(4));
        cfg.calibration_enabled = rng.below(2) == 1;
        cfg.seed = rng.bits();
        const Model model = Model::build(cfg);

        Tensor x = Tensor::zeros({kFieldChannels, cfg.nlat, cfg.nlon});
        for (double& v : x.data) v = 0.7 * rng.normal();
        Tensor grad;
        model.forward_grad(x, grad);
        double scale = 0.0;
        for (double g : grad.data) scale = std::max(scale, std::abs(g));
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            const double keep = x.data[i];
            x.data[i] = keep + kStep;
            const double up = model.predict(x);
            x.data[i] = keep - kStep;
            const double dn = model.predict(x);
            x.data[i] = keep;
            const double fd = (up - dn) / (2.0 * kStep);
            worst = std::max(worst, std::abs(grad.data[i] - fd) / (scale + 1e-12));
        }
    }
    report(1, worst < kTol,
           fmt("autodiff input-gradients match central differences on 20 random models "
               "(max scaled discrepancy %.3g, tolerance %.0e)",
               worst, kTol));
}

// ---- criterion 2: linear functions recover |a| exactly ---------------------

void criterion_2() {
    constexpr double kTol = 1e-12;
    Rng rng(271828);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        LinearFn f;
        f.shape = {kFieldChannels, 5, 7};
        f.a.resize(kFieldChannels * 5 * 7);
        for (double& v : f.a) v = 6.0 * rng.uniform() - 3.0;
        std::vector<Tensor> xs;
        for (int s = 0; s < 40; ++s) {
            Tensor x = Tensor::zeros(f.shape);
            for (double& v : x.data) v = rng.normal();
            xs.push_back(std::move(x));
        }
        const SaliencyMap map = pptv_fn(f, xs);
        for (std::size_t i = 0; i < f.a.size(); ++i)
            worst = std::max(worst, std::abs(map.raw.data[i] - std::abs(f.a[i])));
    }
    report(2, worst < kTol,
           fmt("linear f(x)=a*x attributes |a| per cell (max error %.3g, tolerance %.0e)", worst,
               kTol));
}

// ---- criterion 3: Monte Carlo estimator vs quadrature oracle ---------------

void criterion_3() {
    constexpr double kQuadTol = 0.02;
    constexpr double kAnalyticTol = 0.01;
    constexpr int kSamples = 100000;
    Rng rng(161803);

    DiagQuadFn f2;
    f2.shape = {2};
    f2.c = {0.8, -1.7};
    std::vector<Tensor> xs;
    xs.reserve(kSamples);
    for (int s = 0; s < kSamples; ++s) {
        Tensor x = Tensor::zeros(f2.shape);
        x.data[0] = rng.normal();
        x.data[1] = rng.normal();
        xs.push_back(std::move(x));
    }
    const SaliencyMap mc = pptv_fn(f2, xs);

    const auto density = [](const std::vector<double>& v) {
        double p = 1.0;
        for (double x : v) p *= std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
        return p;
    };
    const auto fq = [&f2](const std::vector<double>& v) {
        return f2.c[0] * v[0] * v[0] + f2.c[1] * v[1] * v[1];
    };
    const std::vector<double> oracle =
        pptv_quadrature_oracle(fq, density, {-8.0, -8.0}, {8.0, 8.0}, 1201);
    double worst = 0.0;
    for (int k = 0; k < 2; ++k)
        worst = std::max(worst, std::abs(mc.raw.data[k] - oracle[k]) / oracle[k]);

    DiagQuadFn f1;
    f1.shape = {1};
    f1.c = {1.0};
    std::vector<Tensor> xs1;
    xs1.reserve(kSamples);
    for (int s = 0; s < kSamples; ++s) {
        Tensor x = Tensor::zeros(f1.shape);
        x.data[0] = rng.normal();
        xs1.push_back(std::move(x));
    }
    const double expect = 2.0 * std::sqrt(2.0 / 3.14159265358979323846);
    const double got = pptv_fn(f1, xs1).raw.data[0];
    const double analytic_err = std::abs(got - expect) / expect;

    report(3, worst < kQuadTol && analytic_err < kAnalyticTol,
           fmt("m=%d Monte Carlo agrees with quadrature (rel %.3g vs %.0e) and with "
               "E|2x|=2*sqrt(2/pi) (rel %.3g vs %.0e)",
               kSamples, worst, kQuadTol, analytic_err, kAnalyticTol));
}

// ---- criteria 4 and 5 share one trained model on the planted task ----------

struct PlantedRun {
    SynthOutput gen;
    Model model;
    TrainReport full;
    SaliencyMap per;        // per-channel attribution
    SaliencyMap pptv_mean;  // aggregated over channels

    // A short epoch budget with early stopping: long runs overfit the
    // distractor series (sliding-window samples share months across the
    // random split), which inflates skill on signal-free inputs.
    PlantedRun() : gen(synth_generate(2026, desk_synth(2000, 0.1))), model(Model::build(desk_model(101))) {
        full = train(model, gen.dataset, spec());
        per = pptv::pptv(model, gen.dataset);
        pptv_mean = aggregate_channels_mean(per);
    }

    TrainSpec spec() const {
        TrainSpec s;
        s.epochs = 15;
        s.batch = 32;
        s.learning_rate = 2e-3;
        s.seed = 7;
        s.patience = 3;
        return s;
    }
};

void criterion_4(const PlantedRun& run) {
    constexpr double kMaskedLoss = 0.05;
    constexpr double kComplementCap = 0.2;

    // Threshold each channel's map separately and keep the union: attention
    // that lives in only some channels (here the heat-content planted bump)
    // would fall below tau in a cross-channel mean.
    RegionMask mask = RegionMask::empty(run.pptv_mean.raw.shape[0], run.pptv_mean.raw.shape[1]);
    for (const SaliencyMap& ch : split_channels(run.per)) {
        const RegionMask m = threshold_mask(ch, 0.5);
        for (std::size_t i = 0; i < mask.cells.size(); ++i)
            if (m.cells[i]) mask.cells[i] = 1;
    }

    Model masked_model = Model::build(desk_model(101));
    const TrainReport masked =
        train(masked_model, mask_dataset(run.gen.dataset, mask), run.spec());

    Model comp_model = Model::build(desk_model(101));
    const TrainReport comp =
        train(comp_model, mask_dataset(run.gen.dataset, mask.complement()), run.spec());

    const double loss = run.full.skill.overall_r - masked.skill.overall_r;
    const bool pass =
        loss < kMaskedLoss && std::abs(comp.skill.overall_r) < kComplementCap;
    report(4, pass,
           fmt("tau=0.5 masked retraining keeps skill (full r %.4f, masked r %.4f, loss %.4f "
               "< %.2f; complement |r| %.4f < %.1f)",
               run.full.skill.overall_r, masked.skill.overall_r, loss, kMaskedLoss,
               std::abs(comp.skill.overall_r), kComplementCap));
}

void criterion_5(const PlantedRun& run) {
    constexpr double kMassFloor = 0.7;
    constexpr double kRankFloor = 0.6;

    // Single-cell occlusion, so both maps rank the same units: input cells.
    Dataset subset = run.gen.dataset;
    subset.samples.resize(200);
    const SaliencyMap occl = perturbation_saliency(run.model, subset, 1, 1, 1, 0.0);
    const SaliencyMap occl_mean = aggregate_channels_mean(occl);

    const auto top_mass_inside = [&](const SaliencyMap& map) {
        const std::size_t n = map.normalized.data.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
            return map.normalized.data[i] > map.normalized.data[j];
        });
        const std::size_t top = (n + 9) / 10;
        double inside = 0.0, total = 0.0;
        for (std::size_t k = 0; k < top; ++k) {
            total += map.normalized.data[idx[k]];
            if (run.gen.truth.driver_mask.cells[idx[k]]) inside += map.normalized.data[idx[k]];
        }
        return inside / total;
    };

    const double pptv_frac = top_mass_inside(run.pptv_mean);
    const double occl_frac = top_mass_inside(occl_mean);
    const double rank_r = spearman(run.per.normalized.data, occl.normalized.data);
    const bool pass = pptv_frac >= kMassFloor && occl_frac >= kMassFloor && rank_r > kRankFloor;
    report(5, pass,
           fmt("top-10%% saliency mass sits in the planted region (gradient %.3f, occlusion %.3f, "
               "floor %.2f) and rankings agree (Spearman %.3f > %.1f)",
               pptv_frac, occl_frac, kMassFloor, rank_r, kRankFloor));
}

// ---- criterion 6: calibration layers against saturated inputs --------------
//
// Known failing. At x20 the dead-gradient fraction stays below 2e-6 for both
// models at every stable learning rate: each input cell feeds ~128 sliding
// conv windows and the partially-overlapping ones never all saturate, so some
// path stays alive. Exact deadness needs a bias-like mean shift, which
// scaling zero-mean fields cannot produce. The paired comparison below then
// measures one or two threshold crossings per million cell-samples against
// each other, and the r comparison sits inside seed noise, so the conjunction
// holds or breaks by coincidence. Settings are kept as first chosen rather
// than searched for a passing seed.

void criterion_6() {
    SynthOutput gen = synth_generate(404, desk_synth(400, 0.1));
    for (GridSample& s : gen.dataset.samples)
        for (double& v : s.fields.data) v *= 20.0;

    TrainSpec spec;
    spec.epochs = 30;
    spec.batch = 32;
    spec.learning_rate = 1e-3;
    spec.seed = 13;

    const auto run_one = [&](bool calibration) {
        ModelConfig cfg = desk_model(11);
        cfg.calibration_enabled = calibration;
        Model m = Model::build(cfg);
        double r = 0.0;
        std::string note;
        try {
            r = train(m, gen.dataset, spec).skill.overall_r;
        } catch (const NumericError&) {
            note = " (no usable skill)";
        }
        const double dead = saturation_report(m, gen.dataset).dead_gradient_fraction;
        return std::tuple<double, double, std::string>(r, dead, note);
    };

    const auto [r_plain, dead_plain, note_plain] = run_one(false);
    const auto [r_cal, dead_cal, note_cal] = run_one(true);
    const bool pass = dead_cal < dead_plain && r_cal >= r_plain;
    report(6, pass,
           fmt("calibration strictly lowers the dead-gradient fraction on x20-scaled inputs "
               "(%.3g vs %.3g) without losing skill (r %.4f%s vs %.4f%s)",
               dead_cal, dead_plain, r_cal, note_cal.c_str(), r_plain, note_plain.c_str()));
}

// ---- criterion 7: degenerate cases ------------------------------------------

void criterion_7() {
    SynthOutput gen = synth_generate(515, desk_synth(30, 0.1));

    Model zero = Model::build(desk_model(1));
    for (Tensor* p : zero.parameters()) std::fill(p->data.begin(), p->data.end(), 0.0);
    bool all_zero = true;
    for (const SaliencyMap& m :
         {pptv::pptv(zero, gen.dataset), vbp_saliency(zero, gen.dataset),
          perturbation_saliency(zero, gen.dataset, 2, 2, 2, 0.0),
          gradcam_saliency(zero, gen.dataset)})
        for (double v : m.raw.data) all_zero = all_zero && v == 0.0;

    const Model rand_model = Model::build(desk_model(33));
    Dataset one = gen.dataset;
    one.samples.resize(1);
    const bool single_matches =
        pptv::pptv(rand_model, one).raw.data == vbp_single(rand_model, one.samples[0]).raw.data;

    Dataset small = gen.dataset;
    TrainSpec spec;
    spec.epochs = 4;
    spec.batch = 16;
    spec.learning_rate = 1e-3;
    spec.seed = 3;
    const RetrainResult identity =
        retrain_validate(desk_model(9), small, RegionMask::all(12, 36), spec);
    const bool identity_ok =
        identity.full.overall_r == identity.masked.overall_r && identity.delta_r == 0.0;

    const SaliencyMap map = aggregate_channels_mean(pptv::pptv(rand_model, gen.dataset));
    bool monotone = true;
    std::size_t prev = map.normalized.data.size() + 1;
    for (int t = 1; t <= 9; ++t) {
        const std::size_t count = threshold_mask(map, 0.1 * t).count();
        monotone = monotone && count <= prev;
        prev = count;
    }

    report(7, all_zero && single_matches && identity_ok && monotone,
           fmt("degenerate cases hold (constant model all-zero: %s, m=1 equals single-sample "
               "map: %s, identity-mask retrain bit-equal: %s, threshold mask monotone: %s)",
               all_zero ? "yes" : "no", single_matches ? "yes" : "no", identity_ok ? "yes" : "no",
               monotone ? "yes" : "no"));
}

// ---- criterion 8: reductions vs direct oracles -------------------------------

void criterion_8() {
    constexpr double kTol = 1e-12;
    Rng rng(888);
    double worst = 0.0;

    SaliencyMap map;
    map.raw = Tensor::zeros({kFieldChannels, 7, 9});
    for (double& v : map.raw.data) v = rng.uniform();
    map.method = "pptv";
    map.sample_count = 5;
    finalize(map);

    const SaliencyMap mean = aggregate_channels_mean(map);
    const std::size_t plane = 7 * 9;
    double agg_max = 0.0;
    std::vector<double> agg(plane, 0.0);
    for (std::size_t p = 0; p < plane; ++p) {
        for (int c = 0; c < kFieldChannels; ++c) agg[p] += map.raw.data[c * plane + p];
        agg[p] /= kFieldChannels;
        agg_max = std::max(agg_max, agg[p]);
    }
    for (std::size_t p = 0; p < plane; ++p) {
        worst = std::max(worst, std::abs(mean.raw.data[p] - agg[p]));
        worst = std::max(worst, std::abs(mean.normalized.data[p] - agg[p] / agg_max));
    }

    double norm_sum = 0.0;
    for (double v : mean.normalized.data) norm_sum += v;
    worst = std::max(worst,
                     std::abs(attention_indicator(mean, "all").value - norm_sum / plane));

    RegionMask region = RegionMask::empty(7, 9);
    double region_sum = 0.0;
    std::size_t region_n = 0;
    for (std::size_t p = 0; p < plane; ++p)
        if (rng.below(3) == 0) {
            region.cells[p] = 1;
            region_sum += mean.normalized.data[p];
            ++region_n;
        }
    worst = std::max(worst, std::abs(attention_indicator(mean, region, "part").value -
                                     region_sum / region_n));

    const std::vector<double> zm = zonal_mean(mean.normalized);
    const std::vector<double> mm = meridional_mean(mean.normalized);
    for (int r = 0; r < 7; ++r) {
        double s = 0.0;
        for (int c = 0; c < 9; ++c) s += mean.normalized.data[r * 9 + c];
        worst = std::max(worst, std::abs(zm[r] - s / 9.0));
    }
    for (int c = 0; c < 9; ++c) {
        double s = 0.0;
        for (int r = 0; r < 7; ++r) s += mean.normalized.data[r * 9 + c];
        worst = std::max(worst, std::abs(mm[c] - s / 7.0));
    }

    std::map<int, SaliencyMap> by_month;
    for (int m : {3, 4, 5, 6, 9, 10, 11, 12}) {
        SaliencyMap sm;
        sm.raw = Tensor::zeros({2, 3});
        for (double& v : sm.raw.data) v = rng.uniform();
        sm.method = "pptv";
        sm.sample_count = m;
        finalize(sm);
        by_month[m] = std::move(sm);
    }
    const auto [spring, nonspring] = seasonal_group(by_month);
    for (std::size_t i = 0; i < 6; ++i) {
        double s = 0.0, n = 0.0;
        for (int m : {3, 4, 5, 6}) s += by_month[m].raw.data[i];
        for (int m : {9, 10, 11, 12}) n += by_month[m].raw.data[i];
        worst = std::max(worst, std::abs(spring.raw.data[i] - s / 4.0));
        worst = std::max(worst, std::abs(nonspring.raw.data[i] - n / 4.0));
    }

    report(8, worst < kTol,
           fmt("reductions match direct oracles (max error %.3g, tolerance %.0e)", worst, kTol));
}

// ---- criteria 9 and 10: serialization and parallel determinism --------------

struct FixedArtifacts {
    SynthOutput gen;
    Model model;
    std::string data_path, model_path;

    FixedArtifacts() : gen(synth_generate(909, desk_synth(12, 0.1))), model([] {
        ModelConfig cfg = desk_model(77);
        cfg.conv_filters = {2, 2, 2};
        cfg.dense_neurons = 4;
        cfg.calibration_enabled = true;
        return Model::build(cfg);
    }()) {
        data_path = tmp_dir() + "/fixed.dat";
        model_path = tmp_dir() + "/fixed.mdl";
        save_grid(data_path, gen.dataset);
        save_model(model_path, model);
    }
};

void criterion_9(const FixedArtifacts& fixed, bool write_golden) {
    std::ostringstream ds1, ds2;
    save_grid(ds1, fixed.gen.dataset);
    const Dataset reloaded = load_grid(fixed.data_path);
    save_grid(ds2, reloaded);
    const bool dataset_ok = ds1.str() == ds2.str() && !ds1.str().empty();

    std::ostringstream m1, m2;
    save_model(m1, fixed.model);
    const Model remodel = load_model(fixed.model_path);
    save_model(m2, remodel);
    const bool model_ok = m1.str() == m2.str() && !m1.str().empty();

    const SaliencyMap per = pptv::pptv(fixed.model, fixed.gen.dataset);
    const SaliencyMap mean = aggregate_channels_mean(per);
    const std::string prefix = write_golden ? std::string(PPTV_GOLDEN_DIR) + "/golden"
                                            : tmp_dir() + "/golden";
    if (write_golden) fs::create_directories(PPTV_GOLDEN_DIR);
    std::vector<std::string> written = save_saliency_pgm(prefix, per, fixed.gen.dataset.grid);
    const std::vector<std::string> mean_files =
        save_saliency_pgm(prefix, mean, fixed.gen.dataset.grid);
    written.insert(written.end(), mean_files.begin(), mean_files.end());

    bool golden_ok = true;
    std::string golden_note;
    if (write_golden) {
        golden_note = fmt("; rewrote %zu golden files", written.size());
    } else {
        for (const std::string& path : written) {
            const std::string name = fs::path(path).filename().string();
            const std::string golden = std::string(PPTV_GOLDEN_DIR) + "/" + name;
            if (!fs::exists(golden)) {
                golden_ok = false;
                golden_note = "; missing golden file " + name + " (regenerate with --write-golden)";
                break;
            }
            if (slurp(path) != slurp(golden)) {
                golden_ok = false;
                golden_note = "; " + name + " deviates from the golden file";
                break;
            }
        }
    }

    report(9, dataset_ok && model_ok && golden_ok,
           fmt("serialization round trips bit-exactly (dataset %s, checkpoint %s) and PGM "
               "exports match the golden files%s",
               dataset_ok ? "yes" : "no", model_ok ? "yes" : "no", golden_note.c_str()));
}

void criterion_10(const FixedArtifacts& fixed) {
    const auto explain = [&](int workers, const std::string& out) {
        const std::string cmd = std::string(PPTV_BIN) + " explain --model " + fixed.model_path +
                                " --data " + fixed.data_path +
                                " --method pptv --channels per --workers " +
                                std::to_string(workers) + " --out " + out + " > " + out +
                                ".log 2>&1";
        const int status = std::system(cmd.c_str());
        return status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0;
    };
    const std::string a = tmp_dir() + "/w1";
    const std::string b = tmp_dir() + "/w4";
    const bool ran = explain(1, a) && explain(4, b);
    const bool identical = ran && slurp(a + ".csv") == slurp(b + ".csv");
    report(10, ran && identical,
           ran ? fmt("explain output is byte-identical for 1 and 4 workers (%s)",
                     identical ? "CSV matches" : "CSV differs")
               : std::string("explain runs failed; see " + a + ".log / " + b + ".log"));
}

}  // namespace

int main(int argc, char** argv) {
    const bool write_golden = argc > 1 && std::string(argv[1]) == "--write-golden";
    const auto guarded = [](int n, const std::function<void()>& body) {
        try {
            body();
        } catch (const std::exception& e) {
            report(n, false, std::string("unexpected error: ") + e.what());
        }
    };

    guarded(1, criterion_1);
    guarded(2, criterion_2);
    guarded(3, criterion_3);

    try {
        const PlantedRun run;
        guarded(4, [&] { criterion_4(run); });
        guarded(5, [&] { criterion_5(run); });
    } catch (const std::exception& e) {
        report(4, false, std::string("planted-task training failed: ") + e.what());
        report(5, false, "skipped: planted-task training failed");
    }

    guarded(6, criterion_6);
    guarded(7, criterion_7);
    guarded(8, criterion_8);

    try {
        const FixedArtifacts fixed;
        guarded(9, [&] { criterion_9(fixed, write_golden); });
        guarded(10, [&] { criterion_10(fixed); });
    } catch (const std::exception& e) {
        report(9, false, std::string("fixed-seed artifacts failed: ") + e.what());
        report(10, false, "skipped: fixed-seed artifacts failed");
    }

    if (failures == 0) std::printf("all criteria passed\n");
    return failures;
}
