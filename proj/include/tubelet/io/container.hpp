#pragma once

#include <string>

#include "tubelet/datasim/dataset.hpp"

namespace tubelet::io {

// RSTK raster container: magic "RSTK", version u16, sample count u32, then
// per sample an entry-count byte followed by named tensor entries
// (name length u16 + UTF-8 name, rank u8, extents u32 each, float32
// payload). All integers little-endian; masks stored as float 0.0/1.0.
// The entry names are msi_clouded, sar (optional), mask, target.

void write_container(const std::string& path, const datasim::Dataset& ds);
datasim::Dataset read_container(const std::string& path);

}  // namespace tubelet::io
