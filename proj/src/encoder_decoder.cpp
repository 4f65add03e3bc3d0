#include "cylocc/encoder_decoder.hpp"

#include <stdexcept>
#include <string>

namespace cylocc {

PlaneEncoderDecoder::PlaneEncoderDecoder(Graph& g, const std::string& prefix,
                                         int channels, Rng& rng)
    : channels_(channels) {
  if (channels <= 0)
    throw std::invalid_argument("encoder-decoder: C must be positive");
  const int64_t c = channels;
  for (int l = 0; l < 3; ++l) {
    const std::string tag = prefix + ".enc" + std::to_string(l + 1);
    enc_w_[static_cast<size_t>(l)] = add_param(g, tag + ".w", {c, c, 3, 3}, c * 9, rng);
    enc_b_[static_cast<size_t>(l)] = add_param(g, tag + ".b", {c}, 0, rng);
  }
  for (int l = 0; l < kScales; ++l) {
    const std::string tag = prefix + ".lat" + std::to_string(l);
    lat_w_[static_cast<size_t>(l)] = add_param(g, tag + ".w", {c, c, 1, 1}, c, rng);
    lat_b_[static_cast<size_t>(l)] = add_param(g, tag + ".b", {c}, 0, rng);
  }
}

std::vector<Tensor> PlaneEncoderDecoder::refine(Graph& g, const Tensor& plane,
                                                AzimuthAxis wrap) const {
  if (plane.rank() != 3 || plane.extent(2) != channels_)
    throw std::invalid_argument("encoder-decoder: expected H x W x C plane with C=" +
                                std::to_string(channels_));
  if (plane.extent(0) % 8 != 0 || plane.extent(1) % 8 != 0)
    throw std::invalid_argument("encoder-decoder: plane extents " +
                                std::to_string(plane.extent(0)) + "x" +
                                std::to_string(plane.extent(1)) +
                                " must be divisible by 8");

  Conv2dSpec down{.stride = 2, .pad_h = 1, .pad_w = 1};
  if (wrap == AzimuthAxis::kRows) down.mode_h = PadMode::kCircular;
  if (wrap == AzimuthAxis::kCols) down.mode_w = PadMode::kCircular;

  std::array<Tensor, kScales> enc;
  enc[0] = plane_to_image(g, plane);
  for (int l = 1; l < kScales; ++l)
    enc[static_cast<size_t>(l)] =
        g.relu(g.conv2d(enc[static_cast<size_t>(l - 1)],
                        enc_w_[static_cast<size_t>(l - 1)],
                        enc_b_[static_cast<size_t>(l - 1)], down));

  std::array<Tensor, kScales> dec;
  for (int l = kScales - 1; l >= 0; --l) {
    Tensor lateral = g.conv2d(enc[static_cast<size_t>(l)],
                              lat_w_[static_cast<size_t>(l)],
                              lat_b_[static_cast<size_t>(l)], Conv2dSpec{});
    dec[static_cast<size_t>(l)] =
        l == kScales - 1
            ? lateral
            : g.add(lateral, upsample2(g, dec[static_cast<size_t>(l + 1)]));
  }

  std::vector<Tensor> out;
  out.reserve(kScales);
  for (int l = 0; l < kScales; ++l)
    out.push_back(image_to_plane(g, dec[static_cast<size_t>(l)]));
  return out;
}

MultiScalePlanes refine_planes(Graph& g, const PlaneEncoderDecoder& net,
                               const TpvPlanes& fused) {
  const std::vector<Tensor> rd = net.refine(g, fused.f_rd, AzimuthAxis::kCols);
  const std::vector<Tensor> dz = net.refine(g, fused.f_dz, AzimuthAxis::kRows);
  const std::vector<Tensor> zr = net.refine(g, fused.f_zr, AzimuthAxis::kNone);
  MultiScalePlanes out;
  for (int l = 0; l < PlaneEncoderDecoder::kScales; ++l) {
    out.scales[static_cast<size_t>(l)].f_rd = rd[static_cast<size_t>(l)];
    out.scales[static_cast<size_t>(l)].f_dz = dz[static_cast<size_t>(l)];
    out.scales[static_cast<size_t>(l)].f_zr = zr[static_cast<size_t>(l)];
  }
  return out;
}

}  // namespace cylocc
