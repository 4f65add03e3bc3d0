#include "cylocc/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cylocc {

namespace {

constexpr char kMagic[4] = {'O', 'C', 'W', 'T'};
constexpr uint32_t kVersion = 1;

void put_u16(std::ostream& os, uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  uint64_t u = std::bit_cast<uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

[[noreturn]] void bad(const std::string& path, const std::string& why) {
  throw std::runtime_error("weights file " + path + ": " + why);
}

}  // namespace

void save_weights(const Graph& g, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) bad(path, "cannot open for writing");
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  const auto& names = g.parameter_names();
  put_u32(os, static_cast<uint32_t>(names.size()));
  for (const auto& name : names) {
    Tensor t = g.parameter(name);
    if (name.size() > 0xffff) bad(path, "parameter name too long: " + name);
    put_u16(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(static_cast<char>(t.rank()));
    for (int a = 0; a < t.rank(); ++a)
      put_u32(os, static_cast<uint32_t>(t.extent(a)));
    for (double v : t.data()) put_f64(os, v);
  }
  if (!os) bad(path, "write failed");
}

void load_weights(Graph& g, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) bad(path, "cannot open");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) bad(path, "bad magic");
  if (get_u32(is) != kVersion) bad(path, "unsupported version");
  const uint32_t count = get_u32(is);
  if (count != g.parameter_names().size())
    bad(path, "parameter count mismatch: file has " + std::to_string(count) +
                  ", graph has " + std::to_string(g.parameter_names().size()));
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t len = get_u16(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) bad(path, "truncated");
    if (!g.has_parameter(name)) bad(path, "unknown parameter '" + name + "'");
    Tensor t = g.parameter(name);
    const int rank = is.get();
    if (rank != t.rank())
      bad(path, "rank mismatch for '" + name + "'");
    Shape shape(rank);
    for (int a = 0; a < rank; ++a) shape[a] = get_u32(is);
    if (shape != t.shape())
      bad(path, "shape mismatch for '" + name + "': file " + shape_str(shape) +
                    ", graph " + shape_str(t.shape()));
    auto dst = t.mutable_data();
    for (int64_t j = 0; j < t.numel(); ++j) dst[j] = get_f64(is);
    if (!is) bad(path, "truncated");
  }
  is.peek();
  if (!is.eof()) bad(path, "trailing bytes");
}

}  // namespace cylocc
