#pragma once

#include <iosfwd>
#include <string>

#include "pptv/model.hpp"

namespace pptv {

// Versioned model checkpoint, magic "PPTVMDL1". Round trips are bit-exact.
void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);
void save_model(std::ostream& os, const Model& model);
Model load_model(std::istream& is);

}  // namespace pptv
