#pragma once

#include <string>

#include "midframe/image.hpp"

namespace midframe {

// Reads 8/16-bit gray or RGB PNG, or binary PPM (P6) / PGM (P5).
// 1-byte samples map to [0,1] via /255, 2-byte samples via /65535.
Image load_image(const std::string& path);

// Writes an 8-bit PNG (gray or RGB). Values are clamped to [0,1] and
// rounded half-up onto the 0..255 grid.
void save_image(const Image& img, const std::string& path);

}  // namespace midframe
