#pragma once

#include <iosfwd>
#include <string>

#include "pptv/grid.hpp"

namespace pptv {

// Binary dataset container, magic "PPTVDAT1". Round trips are bit-exact.
void save_grid(const std::string& path, const Dataset& ds);
Dataset load_grid(const std::string& path);
void save_grid(std::ostream& os, const Dataset& ds);
Dataset load_grid(std::istream& is);

// One [nlat, nlon] field as "lat,lon,value" rows, 17 significant digits.
void export_field_csv(std::ostream& os, const Tensor& field, const GridSpec& grid);
void export_field_csv(const std::string& path, const Tensor& field, const GridSpec& grid);

}  // namespace pptv
