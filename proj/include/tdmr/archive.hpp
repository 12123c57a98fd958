#pragma once

#include <string>
#include <vector>

#include "tdmr/equalize.hpp"
#include "tdmr/geometry.hpp"
#include "tdmr/laip.hpp"
#include "tdmr/trellis.hpp"

namespace tdmr {

// Single-file archive holding everything the detector needs at run time:
// the geometry echo, per-track quantizers, the PMF tables, the equalizer
// specs and any trained noise-prediction models. Round-trips bit-exactly;
// table entries are stored sorted by key so saves are canonical.
struct LutArchive {
  MediaGeometry geometry;
  LaipTables laip;
  std::vector<EqualizerSpec> equalizers;
  std::vector<Pdnp1dModel> pdnp1d;
  std::vector<Pdnp2dModel> pdnp2d;
};

void save_archive(const std::string& path, const LutArchive& archive);
LutArchive load_archive(const std::string& path);

// Human-readable summary (table sizes, entry counts) for the inspect tool.
std::string describe_archive(const LutArchive& archive);

}  // namespace tdmr
