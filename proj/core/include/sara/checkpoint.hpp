#pragma once

// Binary tensor container used for checkpoints.
//
// Layout:
//   bytes 0..7   magic "SARATNSR"
//   bytes 8..15  u64 little-endian header length H
//   bytes 16..   H bytes of JSON: [{"name", "shape":[r,c], "dtype":"f64",
//                "offset": byte offset into the payload}, ...]
//   then         payload: little-endian f64 values, contiguous per tensor
//
// Round-trips are bit-exact: doubles are copied via their IEEE-754 bit
// patterns, never formatted through text.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sara/errors.hpp"

namespace sara {

struct TensorRecord {
  std::string name;
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;  // rows*cols, row-major
};

void save_tensor_file(const std::string& path,
                      const std::vector<TensorRecord>& tensors);

// Throws DataError on bad magic, truncation, duplicate or malformed entries.
std::vector<TensorRecord> load_tensor_file(const std::string& path);

}  // namespace sara
