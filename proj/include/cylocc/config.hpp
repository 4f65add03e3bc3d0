#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cylocc/geometry.hpp"

namespace cylocc {

/// Everything the pipeline needs, with desk-scale defaults. The cylindrical
/// height range always mirrors the Cartesian one.
struct PipelineConfig {
  CartGridSpec cart{.x_min = -10.0, .x_max = 10.0, .y_min = -10.0,
                    .y_max = 10.0, .z_min = -2.0, .z_max = 2.0,
                    .nx = 40, .ny = 40, .nz = 8};
  CylGridSpec cyl{.r_min = 0.0, .r_max = 14.2, .radial_bins = 24,
                  .azimuth_bins = 32, .z_bins = 8, .z_min = -2.0, .z_max = 2.0};
  int depth_bins = 12;      // K
  double bin_depth = 1.0;   // d, meters
  int groups = 8;           // M
  int channels = 16;        // C
  int geo_channels = 16;    // C1
  int sem_channels = 16;    // C2, must equal channels
  int classes = 4;          // semantic classes, labels 1..classes
  double lambda = 3.0;
  double lr = 0.01;
  double momentum = 0.9;  // Adam beta1
  int steps = 200;
  uint64_t seed = 1;

  /// Cross-module consistency: positive sizes, C2 == C, group and scale
  /// divisibility, cylindrical height range synced to Cartesian.
  void validate() const;
};

/// Parses a key=value file ('#' comments, blank lines allowed). Unknown keys
/// are rejected; missing keys keep the defaults in `base`. Errors name the
/// file and line.
PipelineConfig load_config(const std::string& path,
                           const PipelineConfig& base = PipelineConfig{});

/// Applies one "key=value" override (same key set as the file).
void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value);

}  // namespace cylocc
