#pragma once

#include <string>

#include "midframe/flow.hpp"

namespace midframe {

// Middlebury .flo convention: little-endian float32 magic 202021.25,
// int32 width, int32 height, then height*width interleaved (u, v) pairs.
constexpr float kFloMagic = 202021.25f;

DenseFlow read_flo(const std::string& path);

// Rejects non-finite values unless allow_nonfinite is set.
void write_flo(const DenseFlow& flow, const std::string& path,
               bool allow_nonfinite = false);

}  // namespace midframe
