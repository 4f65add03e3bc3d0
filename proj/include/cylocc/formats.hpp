#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cylocc/geometry.hpp"
#include "cylocc/tensor.hpp"

namespace cylocc {

/// Ego-frame point cloud. Positions are plain geometry; features ride on a
/// tensor so gradients can flow through downstream aggregation.
struct PointCloud {
  std::vector<Vec3> positions;
  Tensor features;  // N x C

  int64_t size() const { return static_cast<int64_t>(positions.size()); }
  void validate() const;
};

/// Dense semantic occupancy labels, x-major with z fastest. Label 0 = empty.
struct OccGrid {
  int nx = 0, ny = 0, nz = 0;
  int class_count = 0;  // semantic classes; labels range over [0, class_count]
  std::vector<uint8_t> labels;

  static OccGrid empty(int nx, int ny, int nz, int class_count);
  uint8_t& at(int ix, int iy, int iz) {
    return labels[(static_cast<size_t>(ix) * ny + iy) * nz + iz];
  }
  uint8_t at(int ix, int iy, int iz) const {
    return labels[(static_cast<size_t>(ix) * ny + iy) * nz + iz];
  }
  void validate() const;
};

/// 8-bit RGB image, row-major, 3 bytes per pixel.
struct Image {
  int width = 0, height = 0;
  std::vector<uint8_t> pixels;

  static Image filled(int width, int height, uint8_t r, uint8_t g, uint8_t b);
  uint8_t* pixel(int x, int y) { return &pixels[(static_cast<size_t>(y) * width + x) * 3]; }
  const uint8_t* pixel(int x, int y) const {
    return &pixels[(static_cast<size_t>(y) * width + x) * 3];
  }
};

// Binary formats. All integers little-endian. Errors are std::runtime_error
// naming the file and, for malformed input, the byte offset.

/// "OCPC", u32 version=1, u32 N, u32 C, N*(3+C) f32 (x, y, z, features).
void save_pointcloud(const PointCloud& cloud, const std::string& path);
PointCloud load_pointcloud(const std::string& path);

/// "OCGR", u32 version=1, u32 X, u32 Y, u32 Z, u8 class_count, X*Y*Z labels.
void save_occgrid(const OccGrid& grid, const std::string& path);
OccGrid load_occgrid(const std::string& path);

/// Binary PPM (P6), maxval 255.
void save_ppm(const Image& img, const std::string& path);
Image load_ppm(const std::string& path);

}  // namespace cylocc
