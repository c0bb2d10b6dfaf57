#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pptv/model.hpp"
#include "pptv/saliency.hpp"
#include "pptv/synth.hpp"

namespace pptv {

struct TrainSpec {
    int epochs = 200;
    int batch = 32;
    double learning_rate = 1e-3;
    std::string optimizer = "momentum";  // "gd" | "momentum"
    double momentum = 0.9;
    int patience = 0;  // early stop after this many epochs without val improvement; 0 = off
    std::uint64_t seed = 1;

    void validate() const;
};

struct SkillReport {
    double overall_r = 0.0;
    std::map<int, double> per_month_r;  // target calendar month -> r (months with >= 3 samples)
    int lead_months = 0;
    int n_validation = 0;
};

struct TrainReport {
    std::vector<double> loss_curve;  // running train MSE per epoch
    SkillReport skill;
    int epochs_run = 0;
    double final_train_loss = 0.0;
};

double correlation_skill(const std::vector<double>& predictions, const std::vector<double>& targets);

/// Mini-batch gradient descent on MSE against the lead configured in the
/// model. The dataset is split 80/20 by a seeded shuffle; the report's skill
/// is measured on the held-out 20%.
TrainReport train(Model& model, const Dataset& dataset, const TrainSpec& spec);

// Zeroes every input cell outside the mask, all 6 channels.
Dataset mask_dataset(const Dataset& dataset, const RegionMask& mask);

struct RetrainResult {
    SkillReport full, masked;
    double delta_r = 0.0;  // full minus masked
};

/// The retraining protocol: train from scratch on full inputs and on
/// mask-zeroed inputs with identical seeds, and compare validation skill.
RetrainResult retrain_validate(const ModelConfig& config, const Dataset& dataset,
                               const RegionMask& mask, const TrainSpec& spec);

struct LeadCell {
    int lead = 0;
    SkillReport skill;
    SaliencyMap saliency;          // pptv over the full dataset
    AttentionIndicator attention;  // over the channel-mean map
};

/// One model per lead; model and training seeds are keyed by lead so cells
/// are independent of sweep order.
std::vector<LeadCell> lead_sweep(const ModelConfig& config, const Dataset& dataset,
                                 const std::vector<int>& leads, const TrainSpec& spec,
                                 int workers = 1);

/// Elementwise mean of raw maps for months 3..6 (spring) and 9..12
/// (non-spring), each re-normalized.
std::pair<SaliencyMap, SaliencyMap> seasonal_group(const std::map<int, SaliencyMap>& by_month);

// FNV-1a over a canonical text rendering; embedded in report file names.
std::uint64_t config_hash(const std::string& canonical_text);
std::string report_filename(const std::string& prefix, std::uint64_t hash, std::uint64_t seed,
                            const std::string& ext);

void write_train_report(const std::string& path, const ModelConfig& config, const TrainSpec& spec,
                        const TrainReport& report);

}  // namespace pptv
