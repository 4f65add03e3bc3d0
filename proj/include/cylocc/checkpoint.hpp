#pragma once

#include <string>

#include "cylocc/tensor.hpp"

namespace cylocc {

/// Writes every graph parameter, in registration order, to a binary weights
/// file. Layout: "OCWT", u32 version, u32 count, then per parameter a u16
/// name length, the name bytes, u8 rank, u32 extents and the raw
/// little-endian f64 values.
void save_weights(const Graph& g, const std::string& path);

/// Loads a weights file written by save_weights into an already-built graph.
/// The file must contain exactly the graph's parameters with matching shapes;
/// anything else throws std::runtime_error.
void load_weights(Graph& g, const std::string& path);

}  // namespace cylocc
