#include "cylocc/formats.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cylocc {

namespace {

[[noreturn]] void bad(const std::string& path, std::streamoff offset,
                      const std::string& why) {
  throw std::runtime_error(path + " (offset " + std::to_string(offset) + "): " + why);
}

[[noreturn]] void bad(const std::string& path, const std::string& why) {
  throw std::runtime_error(path + ": " + why);
}

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& os, float v) {
  uint32_t u = std::bit_cast<uint32_t>(v);
  put_u32(os, u);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

}  // namespace

void PointCloud::validate() const {
  if (features.defined()) {
    if (features.rank() != 2)
      throw std::invalid_argument("point cloud features must be N x C");
    if (features.extent(0) != size())
      throw std::invalid_argument("point cloud has " + std::to_string(size()) +
                                  " positions but " +
                                  std::to_string(features.extent(0)) +
                                  " feature rows");
  }
  for (const Vec3& p : positions)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw std::invalid_argument("point cloud contains non-finite positions");
}

void save_pointcloud(const PointCloud& cloud, const std::string& path) {
  cloud.validate();
  const int64_t n = cloud.size();
  const int64_t c = cloud.features.defined() ? cloud.features.extent(1) : 0;
  std::ofstream os(path, std::ios::binary);
  if (!os) bad(path, "cannot open for writing");
  os.write("OCPC", 4);
  put_u32(os, 1);
  put_u32(os, static_cast<uint32_t>(n));
  put_u32(os, static_cast<uint32_t>(c));
  auto feats = cloud.features.defined() ? cloud.features.data()
                                        : std::span<const double>();
  for (int64_t i = 0; i < n; ++i) {
    put_f32(os, static_cast<float>(cloud.positions[i].x));
    put_f32(os, static_cast<float>(cloud.positions[i].y));
    put_f32(os, static_cast<float>(cloud.positions[i].z));
    for (int64_t j = 0; j < c; ++j)
      put_f32(os, static_cast<float>(feats[i * c + j]));
  }
  if (!os) bad(path, "write failed");
}

PointCloud load_pointcloud(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) bad(path, "cannot open");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "OCPC", 4) != 0) bad(path, 0, "bad magic");
  if (get_u32(is) != 1) bad(path, 4, "unsupported version");
  const uint32_t n = get_u32(is);
  const uint32_t c = get_u32(is);
  PointCloud cloud;
  cloud.positions.resize(n);
  std::vector<double> feats(static_cast<size_t>(n) * c);
  for (uint32_t i = 0; i < n; ++i) {
    cloud.positions[i].x = get_f32(is);
    cloud.positions[i].y = get_f32(is);
    cloud.positions[i].z = get_f32(is);
    for (uint32_t j = 0; j < c; ++j) feats[static_cast<size_t>(i) * c + j] = get_f32(is);
    if (!is) bad(path, is.tellg(), "truncated point record");
  }
  cloud.features = Tensor::from_data({n, c}, std::move(feats));
  is.peek();
  if (!is.eof()) bad(path, is.tellg(), "trailing bytes");
  return cloud;
}

OccGrid OccGrid::empty(int nx, int ny, int nz, int class_count) {
  OccGrid g;
  g.nx = nx;
  g.ny = ny;
  g.nz = nz;
  g.class_count = class_count;
  g.labels.assign(static_cast<size_t>(nx) * ny * nz, 0);
  return g;
}

void OccGrid::validate() const {
  if (nx <= 0 || ny <= 0 || nz <= 0)
    throw std::invalid_argument("occupancy grid extents must be positive");
  if (class_count <= 0 || class_count > 255)
    throw std::invalid_argument("occupancy grid class count out of range");
  if (labels.size() != static_cast<size_t>(nx) * ny * nz)
    throw std::invalid_argument("occupancy grid label buffer size mismatch");
  for (uint8_t v : labels)
    if (v > class_count)
      throw std::invalid_argument("occupancy grid label " + std::to_string(v) +
                                  " exceeds class count " +
                                  std::to_string(class_count));
}

void save_occgrid(const OccGrid& grid, const std::string& path) {
  grid.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) bad(path, "cannot open for writing");
  os.write("OCGR", 4);
  put_u32(os, 1);
  put_u32(os, static_cast<uint32_t>(grid.nx));
  put_u32(os, static_cast<uint32_t>(grid.ny));
  put_u32(os, static_cast<uint32_t>(grid.nz));
  os.put(static_cast<char>(grid.class_count));
  os.write(reinterpret_cast<const char*>(grid.labels.data()),
           static_cast<std::streamsize>(grid.labels.size()));
  if (!os) bad(path, "write failed");
}

OccGrid load_occgrid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) bad(path, "cannot open");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "OCGR", 4) != 0) bad(path, 0, "bad magic");
  if (get_u32(is) != 1) bad(path, 4, "unsupported version");
  OccGrid g;
  g.nx = static_cast<int>(get_u32(is));
  g.ny = static_cast<int>(get_u32(is));
  g.nz = static_cast<int>(get_u32(is));
  g.class_count = is.get();
  if (!is) bad(path, is.tellg(), "truncated header");
  if (g.nx <= 0 || g.ny <= 0 || g.nz <= 0 || g.class_count <= 0)
    bad(path, 8, "invalid grid header");
  g.labels.resize(static_cast<size_t>(g.nx) * g.ny * g.nz);
  is.read(reinterpret_cast<char*>(g.labels.data()),
          static_cast<std::streamsize>(g.labels.size()));
  if (!is) bad(path, is.tellg(), "truncated labels");
  is.peek();
  if (!is.eof()) bad(path, is.tellg(), "trailing bytes");
  g.validate();
  return g;
}

Image Image::filled(int width, int height, uint8_t r, uint8_t g, uint8_t b) {
  Image img;
  img.width = width;
  img.height = height;
  img.pixels.resize(static_cast<size_t>(width) * height * 3);
  for (size_t i = 0; i < img.pixels.size(); i += 3) {
    img.pixels[i] = r;
    img.pixels[i + 1] = g;
    img.pixels[i + 2] = b;
  }
  return img;
}

void save_ppm(const Image& img, const std::string& path) {
  if (img.width <= 0 || img.height <= 0 ||
      img.pixels.size() != static_cast<size_t>(img.width) * img.height * 3)
    throw std::invalid_argument("image dimensions inconsistent with pixel buffer");
  std::ofstream os(path, std::ios::binary);
  if (!os) bad(path, "cannot open for writing");
  os << "P6\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) bad(path, "write failed");
}

Image load_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) bad(path, "cannot open");
  std::string magic;
  is >> magic;
  if (magic != "P6") bad(path, 0, "not a binary PPM");
  int w = 0, h = 0, maxval = 0;
  is >> w >> h >> maxval;
  if (!is || w <= 0 || h <= 0) bad(path, is.tellg(), "bad PPM header");
  if (maxval != 255) bad(path, is.tellg(), "unsupported maxval");
  is.get();  // single whitespace after maxval
  Image img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<size_t>(w) * h * 3);
  is.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!is) bad(path, is.tellg(), "truncated pixel data");
  return img;
}

}  // namespace cylocc
