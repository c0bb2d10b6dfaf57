#include "pptv/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "pptv/attribution.hpp"
#include "pptv/error.hpp"
#include "pptv/rng.hpp"

namespace pptv {

void TrainSpec::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be positive");
    if (batch < 1) throw ConfigError("batch must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("learning_rate must be finite and non-negative");
    if (optimizer != "gd" && optimizer != "momentum")
        throw ConfigError("optimizer must be \"gd\" or \"momentum\"");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (patience < 0) throw ConfigError("patience must be non-negative");
}

double correlation_skill(const std::vector<double>& predictions, const std::vector<double>& targets) {
    if (predictions.size() != targets.size()) throw ConfigError("prediction/target length mismatch");
    const std::size_t n = targets.size();
    if (n < 3) throw ConfigError("correlation needs at least 3 pairs");
    double mp = 0.0, mt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mp += predictions[i];
        mt += targets[i];
    }
    mp /= static_cast<double>(n);
    mt /= static_cast<double>(n);
    double spp = 0.0, stt = 0.0, spt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dp = predictions[i] - mp, dt = targets[i] - mt;
        spp += dp * dp;
        stt += dt * dt;
        spt += dp * dt;
    }
    if (stt == 0.0) throw NumericError("correlation undefined for constant targets");
    if (spp == 0.0) throw NumericError("correlation undefined for constant predictions");
    return spt / std::sqrt(spp * stt);
}

namespace {

struct Split {
    std::vector<std::size_t> train, val;
};

Split split_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    const std::size_t n_train = n * 4 / 5;
    Split s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    return s;
}

SkillReport make_skill(const Model& model, const Dataset& ds, const std::vector<std::size_t>& val,
                       int lead) {
    std::vector<double> preds, targets;
    preds.reserve(val.size());
    targets.reserve(val.size());
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_month;
    for (std::size_t i : val) {
        const GridSample& s = ds.samples[i];
        const double p = model.predict(s);
        const double y = s.targets[lead - 1];
        preds.push_back(p);
        targets.push_back(y);
        auto& bucket = by_month[s.target_month(lead)];
        bucket.first.push_back(p);
        bucket.second.push_back(y);
    }
    SkillReport rep;
    rep.lead_months = lead;
    rep.n_validation = static_cast<int>(val.size());
    rep.overall_r = correlation_skill(preds, targets);
    for (const auto& [month, bucket] : by_month) {
        if (bucket.first.size() < 3) continue;
        try {
            rep.per_month_r[month] = correlation_skill(bucket.first, bucket.second);
        } catch (const NumericError&) {
            // degenerate month bucket; omitted from the per-month table
        }
    }
    return rep;
}

}  // namespace

TrainReport train(Model& model, const Dataset& dataset, const TrainSpec& spec) {
    spec.validate();
    const int lead = model.config.lead_months;
    if (dataset.n_leads() < lead)
        throw ConfigError("dataset provides " + std::to_string(dataset.n_leads()) +
                          " leads, model needs lead " + std::to_string(lead));
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const GridSample& s = dataset.samples[i];
        if (model.config.target_month == 0 || s.target_month(lead) == model.config.target_month)
            usable.push_back(i);
    }
    Split split = split_indices(usable.size(), spec.seed);
    for (auto& i : split.train) i = usable[i];
    for (auto& i : split.val) i = usable[i];
    if (split.val.size() < 3) throw ConfigError("validation split smaller than 3 samples");

    std::vector<Tensor*> params = model.parameters();
    for (Tensor* p : params) {
        p->set_requires_grad(true);
        p->zero_grad();
    }
    std::vector<std::vector<double>> velocity;
    if (spec.optimizer == "momentum")
        for (Tensor* p : params) velocity.emplace_back(p->numel(), 0.0);

    Rng shuffle_rng(mix_seed(spec.seed, 0x9e3779b97f4a7c15ull));
    TrainReport report;
    double best_val = 0.0;
    int since_best = 0;
    bool have_best = false;
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        for (std::size_t i = split.train.size(); i > 1; --i)
            std::swap(split.train[i - 1], split.train[shuffle_rng.below(i)]);
        double loss_acc = 0.0;
        try {
            for (std::size_t b = 0; b < split.train.size(); b += spec.batch) {
                const std::size_t e = std::min(b + spec.batch, split.train.size());
                const double inv = 1.0 / static_cast<double>(e - b);
                for (Tensor* p : params) p->zero_grad();
                for (std::size_t k = b; k < e; ++k) {
                    const GridSample& s = dataset.samples[split.train[k]];
                    Tape t;
                    const auto h = model.wire_trainable(t, t.constant(s.fields));
                    const double err = t.value(h.output)[0] - s.targets[lead - 1];
                    loss_acc += err * err;
                    t.backward(h.output, 2.0 * err * inv);
                }
                for (std::size_t pi = 0; pi < params.size(); ++pi) {
                    Tensor* p = params[pi];
                    if (spec.optimizer == "momentum") {
                        auto& vel = velocity[pi];
                        for (std::size_t k = 0; k < p->numel(); ++k) {
                            vel[k] = spec.momentum * vel[k] - spec.learning_rate * p->grad[k];
                            p->data[k] += vel[k];
                        }
                    } else {
                        for (std::size_t k = 0; k < p->numel(); ++k)
                            p->data[k] -= spec.learning_rate * p->grad[k];
                    }
                }
            }
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " (training diverged at epoch " +
                               std::to_string(epoch + 1) + ")");
        }
        const double epoch_loss = loss_acc / static_cast<double>(split.train.size());
        if (!std::isfinite(epoch_loss))
            throw NumericError("training diverged at epoch " + std::to_string(epoch + 1));
        report.loss_curve.push_back(epoch_loss);
        report.epochs_run = epoch + 1;
        if (spec.patience > 0) {
            double val_acc = 0.0;
            for (std::size_t i : split.val) {
                const GridSample& s = dataset.samples[i];
                const double err = model.predict(s) - s.targets[lead - 1];
                val_acc += err * err;
            }
            const double val_loss = val_acc / static_cast<double>(split.val.size());
            if (!have_best || val_loss < best_val) {
                best_val = val_loss;
                have_best = true;
                since_best = 0;
            } else if (++since_best >= spec.patience) {
                break;
            }
        }
    }
    for (Tensor* p : params) p->set_requires_grad(false);

    report.final_train_loss = report.loss_curve.back();
    report.skill = make_skill(model, dataset, split.val, lead);
    return report;
}

Dataset mask_dataset(const Dataset& dataset, const RegionMask& mask) {
    if (mask.nlat != dataset.grid.nlat || mask.nlon != dataset.grid.nlon)
        throw ConfigError("mask does not match the dataset grid");
    Dataset out = dataset;
    const std::size_t plane = static_cast<std::size_t>(mask.nlat) * mask.nlon;
    for (GridSample& s : out.samples)
        for (int c = 0; c < kFieldChannels; ++c)
            for (std::size_t i = 0; i < plane; ++i)
                if (!mask.cells[i]) s.fields.data[c * plane + i] = 0.0;
    return out;
}

RetrainResult retrain_validate(const ModelConfig& config, const Dataset& dataset,
                               const RegionMask& mask, const TrainSpec& spec) {
    if (mask.count() == 0) throw EmptyResultError("mask selects no cells");
    RetrainResult res;
    {
        Model full = Model::build(config);
        res.full = train(full, dataset, spec).skill;
    }
    {
        const Dataset masked = mask_dataset(dataset, mask);
        Model m = Model::build(config);
        res.masked = train(m, masked, spec).skill;
    }
    res.delta_r = res.full.overall_r - res.masked.overall_r;
    return res;
}

std::vector<LeadCell> lead_sweep(const ModelConfig& config, const Dataset& dataset,
                                 const std::vector<int>& leads, const TrainSpec& spec,
                                 int workers) {
    if (leads.empty()) throw ConfigError("lead sweep needs at least one lead");
    std::vector<LeadCell> cells;
    for (int lead : leads) {
        if (lead < 1 || lead > 23) throw ConfigError("lead must lie in [1, 23]");
        if (dataset.n_leads() < lead)
            throw ConfigError("dataset lacks targets for lead " + std::to_string(lead));
        ModelConfig c = config;
        c.lead_months = lead;
        c.seed = mix_seed(config.seed, static_cast<std::uint64_t>(lead));
        TrainSpec s = spec;
        s.seed = mix_seed(spec.seed, 0x10000u + static_cast<std::uint64_t>(lead));
        LeadCell cell;
        cell.lead = lead;
        Model model = Model::build(c);
        cell.skill = train(model, dataset, s).skill;
        cell.saliency = pptv(model, dataset, workers);
        cell.attention = attention_indicator(aggregate_channels_mean(cell.saliency),
                                             "lead=" + std::to_string(lead) + " channels=mean");
        cells.push_back(std::move(cell));
    }
    return cells;
}

std::pair<SaliencyMap, SaliencyMap> seasonal_group(const std::map<int, SaliencyMap>& by_month) {
    auto group = [&by_month](const std::vector<int>& months, const char* label) {
        SaliencyMap out;
        bool first = true;
        for (int m : months) {
            const auto it = by_month.find(m);
            if (it == by_month.end())
                throw ConfigError(std::string(label) + " aggregate is missing the map for month " +
                                  std::to_string(m));
            const SaliencyMap& src = it->second;
            if (first) {
                out.raw = Tensor::zeros(src.raw.shape);
                out.method = src.method;
                first = false;
            } else if (src.raw.shape != out.raw.shape) {
                throw ConfigError("seasonal maps disagree on shape");
            }
            for (std::size_t i = 0; i < out.raw.numel(); ++i) out.raw.data[i] += src.raw.data[i];
            out.sample_count += src.sample_count;
        }
        for (double& v : out.raw.data) v /= static_cast<double>(months.size());
        finalize(out);
        return out;
    };
    return {group({3, 4, 5, 6}, "spring"), group({9, 10, 11, 12}, "non-spring")};
}

std::uint64_t config_hash(const std::string& canonical_text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : canonical_text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string report_filename(const std::string& prefix, std::uint64_t hash, std::uint64_t seed,
                            const std::string& ext) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
    return prefix + "-" + hex + "-s" + std::to_string(seed) + ext;
}

void write_train_report(const std::string& path, const ModelConfig& config, const TrainSpec& spec,
                        const TrainReport& report) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "[model]\n";
    for (const auto& line : config_lines(config)) os << line << '\n';
    os << "\n[train]\n";
    os << "epochs=" << spec.epochs << '\n';
    os << "batch=" << spec.batch << '\n';
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", spec.learning_rate);
    os << "learning_rate=" << buf << '\n';
    os << "optimizer=" << spec.optimizer << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", spec.momentum);
    os << "momentum=" << buf << '\n';
    os << "patience=" << spec.patience << '\n';
    os << "seed=" << spec.seed << '\n';
    os << "\n[result]\n";
    os << "epochs_run=" << report.epochs_run << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", report.final_train_loss);
    os << "final_train_loss=" << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", report.skill.overall_r);
    os << "overall_r=" << buf << '\n';
    os << "n_validation=" << report.skill.n_validation << '\n';
    os << "lead_months=" << report.skill.lead_months << '\n';
    for (const auto& [month, r] : report.skill.per_month_r) {
        std::snprintf(buf, sizeof buf, "%.17g", r);
        os << "r_month_" << month << '=' << buf << '\n';
    }
    if (!os) throw IoError("write failed for " + path);
}

}  // namespace pptv
