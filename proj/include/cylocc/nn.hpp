#pragma once

#include <cstdint>
#include <string>

#include "cylocc/rng.hpp"
#include "cylocc/tensor.hpp"

namespace cylocc {

/// Registers a named parameter initialized uniform in
/// +-gain*sqrt(6/fan_in) (zeros when fan_in == 0, used for biases).
/// Layers producing logits should pass a small gain so the model starts
/// near uniform class probabilities.
Tensor add_param(Graph& g, const std::string& name, const Shape& shape,
                 int64_t fan_in, Rng& rng, double gain = 1.0);

/// Dense layer over the last axis: (..., In) -> (..., Out).
Tensor dense(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b);

/// H x W x C plane <-> 1 x C x H x W image, for running planes through conv2d.
Tensor plane_to_image(Graph& g, const Tensor& plane);
Tensor image_to_plane(Graph& g, const Tensor& img);

/// Nearest-neighbor 2x upsample of an N x C x H x W image.
Tensor upsample2(Graph& g, const Tensor& img);

}  // namespace cylocc
