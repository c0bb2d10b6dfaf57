#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "pptv/attribution.hpp"
#include "pptv/checkpoint.hpp"
#include "pptv/config.hpp"
#include "pptv/dataset_io.hpp"
#include "pptv/error.hpp"
#include "pptv/saliency.hpp"
#include "pptv/synth.hpp"
#include "pptv/train.hpp"

namespace fs = std::filesystem;
using namespace pptv;

namespace {

RunConfig load_config_opt(const std::string& path) {
    return path.empty() ? RunConfig{} : RunConfig::load(path);
}

void write_truth_csv(const std::string& path, const SyntheticTruth& truth, const GridSpec& grid) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "lat,lon,driver\n";
    char buf[64];
    for (int r = 0; r < grid.nlat; ++r)
        for (int c = 0; c < grid.nlon; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d", grid.lat(r), grid.lon(c),
                          truth.driver_mask.at(r, c) ? 1 : 0);
            os << buf << '\n';
        }
    if (!os) throw IoError("write failed for " + path);
}

int cmd_gen_data(const std::string& config_path, std::uint64_t seed, const std::string& out) {
    const RunConfig cfg = load_config_opt(config_path);
    const SynthOutput gen = synth_generate(seed, cfg.synth);
    save_grid(out, gen.dataset);
    write_truth_csv(out + ".truth.csv", gen.truth, gen.dataset.grid);
    std::printf("wrote %zu samples, grid %dx%d, %d leads, noise %.3g -> %s\n",
                gen.dataset.samples.size(), gen.dataset.grid.nlat, gen.dataset.grid.nlon,
                cfg.synth.n_leads, cfg.synth.noise_level, out.c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path, int lead,
              const std::string& out_model) {
    RunConfig cfg = load_config_opt(config_path);
    const Dataset ds = load_grid(data_path);
    if (ds.grid != cfg.grid && !config_path.empty())
        throw ConfigError("dataset grid does not match the [grid] section of " + config_path);
    cfg.grid = ds.grid;
    cfg.model.nlat = ds.grid.nlat;
    cfg.model.nlon = ds.grid.nlon;
    cfg.model.lead_months = lead;
    Model model = Model::build(cfg.model);
    const TrainReport report = train(model, ds, cfg.train);
    save_model(out_model, model);
    const std::string report_path =
        report_filename(out_model, config_hash(cfg.canonical()), cfg.train.seed, ".report.txt");
    write_train_report(report_path, cfg.model, cfg.train, report);
    std::printf("lead %d: validation r = %.6f over %d samples (%d epochs) -> %s\n", lead,
                report.skill.overall_r, report.skill.n_validation, report.epochs_run,
                out_model.c_str());
    return 0;
}

SaliencyMap run_method(const RunConfig& cfg, const std::string& method, const Model& model,
                       const Dataset& ds) {
    const AttributionConfig& a = cfg.attribution;
    if (method == "pptv") return pptv::pptv(model, ds, a.workers);
    if (method == "vbp") return vbp_saliency(model, ds, a.workers);
    if (method == "perturbation")
        return perturbation_saliency(model, ds, a.patch_h, a.patch_w, a.stride, a.fill, a.workers);
    if (method == "gradcam") return gradcam_saliency(model, ds, a.workers);
    throw ConfigError("unknown attribution method \"" + method + "\"");
}

int cmd_explain(const std::string& config_path, const std::string& model_path,
                const std::string& data_path, std::string method, const std::string& channels,
                const std::string& out, int workers_flag) {
    RunConfig cfg = load_config_opt(config_path);
    if (method.empty()) method = cfg.attribution.method;
    if (channels != "mean" && channels != "per")
        throw ConfigError("--channels must be \"mean\" or \"per\"");
    if (workers_flag > 0) cfg.attribution.workers = workers_flag;
    const Model model = load_model(model_path);
    const Dataset ds = load_grid(data_path);
    const SaliencyMap full = run_method(cfg, method, model, ds);
    const SaliencyMap* exported = &full;
    SaliencyMap mean_map;
    if (channels == "mean") {
        mean_map = aggregate_channels_mean(full);
        exported = &mean_map;
    }
    save_saliency_csv(out + ".csv", *exported, ds.grid);
    save_saliency_pgm(out, *exported, ds.grid);
    const AttentionIndicator ind =
        attention_indicator(*exported, method + " channels=" + channels);
    bool all_zero = true;
    for (double v : full.raw.data) all_zero = all_zero && v == 0.0;
    if (all_zero) std::printf("warning: saliency is identically zero (constant model?)\n");
    std::printf("%s over %d samples: attention indicator = %.6f -> %s.csv\n", method.c_str(),
                full.sample_count, ind.value, out.c_str());
    return 0;
}

int cmd_validate(const std::string& config_path, const std::string& data_path,
                 const std::string& saliency_path, double threshold, int lead,
                 const std::string& out) {
    RunConfig cfg = load_config_opt(config_path);
    const Dataset ds = load_grid(data_path);
    cfg.model.nlat = ds.grid.nlat;
    cfg.model.nlon = ds.grid.nlon;
    cfg.model.lead_months = lead;
    SaliencyMap map = load_saliency_csv(saliency_path, ds.grid);
    if (!map.aggregated()) map = aggregate_channels_mean(map);
    const double tau = threshold > 0.0 ? threshold : cfg.attribution.threshold;
    const RegionMask mask = threshold_mask(map, tau);
    if (mask.count() == 0)
        throw EmptyResultError("mask at tau=" + std::to_string(tau) +
                               " selects no cells; lower --threshold");
    const RetrainResult res = retrain_validate(cfg.model, ds, mask, cfg.train);
    std::ofstream os(out);
    if (!os) throw IoError("cannot open " + out + " for writing");
    char buf[128];
    os << "run,lead,overall_r,n_validation\n";
    std::snprintf(buf, sizeof buf, "full,%d,%.17g,%d\n", lead, res.full.overall_r,
                  res.full.n_validation);
    os << buf;
    std::snprintf(buf, sizeof buf, "masked,%d,%.17g,%d\n", lead, res.masked.overall_r,
                  res.masked.n_validation);
    os << buf;
    if (!os) throw IoError("write failed for " + out);
    std::printf("mask keeps %zu/%d cells at tau=%.3g; full r = %.4f, masked r = %.4f, "
                "delta = %.4f -> %s\n",
                mask.count(), ds.grid.nlat * ds.grid.nlon, tau, res.full.overall_r,
                res.masked.overall_r, res.delta_r, out.c_str());
    return 0;
}

SaliencyMap load_map_for_analysis(const std::string& path, const GridSpec& grid) {
    SaliencyMap map = load_saliency_csv(path, grid);
    return map.aggregated() ? map : aggregate_channels_mean(map);
}

int cmd_analyze(const std::string& config_path, const std::string& mode, const std::string& dir,
                const std::string& in_file, int leads, const std::string& out_dir) {
    const RunConfig cfg = load_config_opt(config_path);
    fs::create_directories(out_dir.empty() ? "." : out_dir);
    const std::string prefix = out_dir.empty() ? std::string(".") : out_dir;
    char buf[160];
    if (mode == "seasonal") {
        std::map<int, SaliencyMap> by_month;
        for (int m : {3, 4, 5, 6, 9, 10, 11, 12}) {
            std::snprintf(buf, sizeof buf, "%s/month_%02d.csv", dir.c_str(), m);
            if (!fs::exists(buf)) throw ConfigError(std::string("missing map file ") + buf);
            by_month.emplace(m, load_map_for_analysis(buf, cfg.grid));
        }
        const auto [spring, nonspring] = seasonal_group(by_month);
        save_saliency_csv(prefix + "/spring.csv", spring, cfg.grid);
        save_saliency_csv(prefix + "/nonspring.csv", nonspring, cfg.grid);
        const double si = attention_indicator(spring, "spring").value;
        const double ni = attention_indicator(nonspring, "nonspring").value;
        std::ofstream os(prefix + "/indicators.csv");
        if (!os) throw IoError("cannot open " + prefix + "/indicators.csv for writing");
        std::snprintf(buf, sizeof buf, "group,attention_indicator\nspring,%.17g\nnonspring,%.17g\n",
                      si, ni);
        os << buf;
        std::printf("spring indicator = %.6f, non-spring indicator = %.6f -> %s\n", si, ni,
                    prefix.c_str());
        return 0;
    }
    if (mode == "lead-sweep") {
        std::vector<std::pair<int, std::string>> files;
        if (leads > 0) {
            for (int l = 1; l <= leads; ++l) {
                std::snprintf(buf, sizeof buf, "%s/lead_%02d.csv", dir.c_str(), l);
                if (!fs::exists(buf)) throw ConfigError(std::string("missing map file ") + buf);
                files.emplace_back(l, buf);
            }
        } else {
            if (!fs::is_directory(dir)) throw IoError("saliency dir " + dir + " does not exist");
            for (const auto& entry : fs::directory_iterator(dir)) {
                const std::string name = entry.path().filename().string();
                int lead_no = 0;
                if (std::sscanf(name.c_str(), "lead_%d.csv", &lead_no) == 1)
                    files.emplace_back(lead_no, entry.path().string());
            }
            std::sort(files.begin(), files.end());
            if (files.empty()) throw EmptyResultError("no lead_NN.csv maps found in " + dir);
        }
        std::ofstream os(prefix + "/leads.csv");
        if (!os) throw IoError("cannot open " + prefix + "/leads.csv for writing");
        os << "lead,attention_indicator\n";
        for (const auto& [lead, path] : files) {
            const SaliencyMap map = load_map_for_analysis(path, cfg.grid);
            const double v = attention_indicator(map, "lead").value;
            std::snprintf(buf, sizeof buf, "%d,%.17g\n", lead, v);
            os << buf;
        }
        std::printf("wrote %zu-row lead table -> %s/leads.csv\n", files.size(), prefix.c_str());
        return 0;
    }
    if (mode == "zonal" || mode == "meridional") {
        if (in_file.empty()) throw ConfigError("--in is required for mode " + mode);
        const SaliencyMap map = load_map_for_analysis(in_file, cfg.grid);
        const bool zonal = mode == "zonal";
        const std::vector<double> vals =
            zonal ? zonal_mean(map.normalized) : meridional_mean(map.normalized);
        const std::string out_path = prefix + "/" + mode + ".csv";
        std::ofstream os(out_path);
        if (!os) throw IoError("cannot open " + out_path + " for writing");
        os << (zonal ? "lat,value\n" : "lon,value\n");
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double coord = zonal ? cfg.grid.lat(static_cast<int>(i))
                                       : cfg.grid.lon(static_cast<int>(i));
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", coord, vals[i]);
            os << buf;
        }
        std::printf("wrote %s\n", out_path.c_str());
        return 0;
    }
    throw ConfigError("unknown analyze mode \"" + mode + "\"");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gridded-field regression with density-weighted gradient attribution"};
    app.require_subcommand(1);
    app.footer(RunConfig::help_text());

    std::string config_path;
    app.add_option("--config", config_path, "config file (defaults used when omitted)");

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic planted-signal dataset");
    std::uint64_t seed = 0;
    std::string gen_out;
    gen->add_option("--seed", seed, "generator seed (required; no hidden entropy)")->required();
    gen->add_option("--out", gen_out, "output dataset path")->required();

    auto* tr = app.add_subcommand("train", "train a model on a dataset file");
    std::string tr_data, tr_out;
    int tr_lead = 1;
    tr->add_option("--data", tr_data, "dataset file")->required();
    tr->add_option("--lead", tr_lead, "lead months (1..23)");
    tr->add_option("--out-model", tr_out, "checkpoint output path")->required();

    auto* ex = app.add_subcommand("explain", "compute a saliency map for a trained model");
    std::string ex_model, ex_data, ex_method, ex_channels = "mean", ex_out;
    int ex_workers = 0;
    ex->add_option("--model", ex_model, "checkpoint file")->required();
    ex->add_option("--data", ex_data, "dataset file")->required();
    ex->add_option("--method", ex_method, "pptv | perturbation | vbp | gradcam");
    ex->add_option("--channels", ex_channels, "mean | per");
    ex->add_option("--out", ex_out, "output prefix for .csv/.pgm files")->required();
    ex->add_option("--workers", ex_workers, "worker threads (overrides config)");

    auto* va = app.add_subcommand("validate", "retrain on a thresholded saliency mask");
    std::string va_data, va_sal, va_out = "skill.csv";
    double va_tau = 0.0;
    int va_lead = 1;
    va->add_option("--data", va_data, "dataset file")->required();
    va->add_option("--saliency", va_sal, "saliency CSV from explain")->required();
    va->add_option("--threshold", va_tau, "mask threshold tau in (0,1]");
    va->add_option("--lead", va_lead, "lead months (1..23)");
    va->add_option("--out", va_out, "paired skill CSV path");

    auto* an = app.add_subcommand("analyze", "reduce saliency maps to tables");
    std::string an_mode, an_dir, an_in, an_out = ".";
    int an_leads = 0;
    an->add_option("--mode", an_mode, "seasonal | lead-sweep | zonal | meridional")->required();
    an->add_option("--saliency-dir", an_dir, "directory of month_MM.csv / lead_NN.csv maps");
    an->add_option("--in", an_in, "single map CSV (zonal/meridional)");
    an->add_option("--leads", an_leads, "expected lead count (lead-sweep)");
    an->add_option("--out", an_out, "output directory");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_data(config_path, seed, gen_out);
        if (tr->parsed()) return cmd_train(config_path, tr_data, tr_lead, tr_out);
        if (ex->parsed())
            return cmd_explain(config_path, ex_model, ex_data, ex_method, ex_channels, ex_out,
                               ex_workers);
        if (va->parsed()) return cmd_validate(config_path, va_data, va_sal, va_tau, va_lead, va_out);
        if (an->parsed()) return cmd_analyze(config_path, an_mode, an_dir, an_in, an_leads, an_out);
        std::fprintf(stderr, "error: no subcommand\n");
        return 2;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 4;
    } catch (const EmptyResultError& e) {
        std::fprintf(stderr, "empty result: %s\n", e.what());
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
