#include "cylocc/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace cylocc {
namespace {

double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE)
    throw std::invalid_argument("config: bad numeric value '" + value +
                                "' for key " + key);
  return x;
}

int64_t parse_int(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE)
    throw std::invalid_argument("config: bad integer value '" + value +
                                "' for key " + key);
  return x;
}

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void PipelineConfig::validate() const {
  cart.validate();
  cyl.validate();
  if (cyl.z_min != cart.z_min || cyl.z_max != cart.z_max)
    throw std::invalid_argument("config: cylindrical height range must equal the Cartesian one");
  if (depth_bins <= 0 || bin_depth <= 0.0)
    throw std::invalid_argument("config: depth.K and depth.d must be positive");
  if (groups <= 0 || channels <= 0 || geo_channels <= 0 || sem_channels <= 0)
    throw std::invalid_argument("config: fusion.M and channel counts must be positive");
  if (sem_channels != channels)
    throw std::invalid_argument("config: channels.C2 must equal channels.C (semantic features are sampled from the camera context)");
  if (classes < 1 || classes > 255)
    throw std::invalid_argument("config: classes must be in [1, 255]");
  if (lambda < 0.0 || lr < 0.0 || momentum < 0.0 || momentum >= 1.0 || steps < 0)
    throw std::invalid_argument("config: bad training hyperparameters");

  auto div_by = [](int v, int m, const char* what) {
    if (v % m != 0)
      throw std::invalid_argument(std::string("config: ") + what + " (" +
                                  std::to_string(v) + ") must be divisible by " +
                                  std::to_string(m));
  };
  // Group pooling splits every cylindrical axis; the plane encoder-decoder
  // and the supervision pyramid each halve extents three times.
  div_by(cyl.radial_bins, groups, "cyl.R");
  div_by(cyl.azimuth_bins, groups, "cyl.A");
  div_by(cyl.z_bins, groups, "cyl.Z");
  div_by(cyl.radial_bins, 8, "cyl.R");
  div_by(cyl.azimuth_bins, 8, "cyl.A");
  div_by(cyl.z_bins, 8, "cyl.Z");
  div_by(cart.nx, 8, "cart.nx");
  div_by(cart.ny, 8, "cart.ny");
  div_by(cart.nz, 8, "cart.nz");
}

void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value) {
  auto d = [&] { return parse_double(key, value); };
  auto i = [&] { return static_cast<int>(parse_int(key, value)); };

  if (key == "cart.x_min") cfg.cart.x_min = d();
  else if (key == "cart.x_max") cfg.cart.x_max = d();
  else if (key == "cart.y_min") cfg.cart.y_min = d();
  else if (key == "cart.y_max") cfg.cart.y_max = d();
  else if (key == "cart.z_min") { cfg.cart.z_min = d(); cfg.cyl.z_min = cfg.cart.z_min; }
  else if (key == "cart.z_max") { cfg.cart.z_max = d(); cfg.cyl.z_max = cfg.cart.z_max; }
  else if (key == "cart.nx") cfg.cart.nx = i();
  else if (key == "cart.ny") cfg.cart.ny = i();
  else if (key == "cart.nz") cfg.cart.nz = i();
  else if (key == "cyl.r_min") cfg.cyl.r_min = d();
  else if (key == "cyl.r_max") cfg.cyl.r_max = d();
  else if (key == "cyl.R") cfg.cyl.radial_bins = i();
  else if (key == "cyl.A") cfg.cyl.azimuth_bins = i();
  else if (key == "cyl.Z") cfg.cyl.z_bins = i();
  else if (key == "depth.K") cfg.depth_bins = i();
  else if (key == "depth.d") cfg.bin_depth = d();
  else if (key == "fusion.M") cfg.groups = i();
  else if (key == "channels.C") cfg.channels = i();
  else if (key == "channels.C1") cfg.geo_channels = i();
  else if (key == "channels.C2") cfg.sem_channels = i();
  else if (key == "classes") cfg.classes = i();
  else if (key == "loss.lambda") cfg.lambda = d();
  else if (key == "train.lr") cfg.lr = d();
  else if (key == "train.momentum") cfg.momentum = d();
  else if (key == "train.steps") cfg.steps = i();
  else if (key == "train.seed") cfg.seed = static_cast<uint64_t>(parse_int(key, value));
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

PipelineConfig load_config(const std::string& path, const PipelineConfig& base) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config file " + path + ": cannot open");
  PipelineConfig cfg = base;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_config_entry(cfg, key, value);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  return cfg;
}

}  // namespace cylocc
