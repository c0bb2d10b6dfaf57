#pragma once

#include <iosfwd>
#include <string>

#include "pptv/model.hpp"
#include "pptv/synth.hpp"
#include "pptv/train.hpp"

namespace pptv {

/// Attribution and export settings shared by the explain/validate commands.
struct AttributionConfig {
    std::string method = "pptv";  // pptv | perturbation | vbp | gradcam
    int patch_h = 2;
    int patch_w = 2;
    int stride = 1;
    double fill = 0.0;
    int workers = 1;
    double z_sat = 2.5;
    double threshold = 0.5;
};

/// Whole-run configuration: plain text, "[section]" headers and "key=value"
/// lines, '#' comments. Unknown sections or keys are rejected. Every key has
/// a default; help_text() documents all of them.
struct RunConfig {
    GridSpec grid;
    SynthConfig synth;
    ModelConfig model;
    TrainSpec train;
    AttributionConfig attribution;

    static RunConfig parse(std::istream& is, const std::string& source_name);
    static RunConfig load(const std::string& path);

    // Canonical rendering of every key; config hashes are taken over this.
    std::string canonical() const;

    static std::string help_text();
};

}  // namespace pptv
