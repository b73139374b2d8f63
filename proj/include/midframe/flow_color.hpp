#pragma once

#include <optional>

#include "midframe/flow.hpp"
#include "midframe/image.hpp"

namespace midframe {

// HSV-style flow rendering: hue from atan2(v,u), saturation from magnitude
// normalized by max_magnitude (default: 99th percentile of the field),
// full value. Zero flow maps to white.
Image flow_to_color(const DenseFlow& flow,
                    std::optional<float> max_magnitude = std::nullopt);

}  // namespace midframe
