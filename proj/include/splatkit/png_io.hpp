// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/types.hpp"

#include <string>

namespace splat {

// 8-bit PNG in, [0,1] float RGB out. Grayscale, palette and alpha inputs
// are expanded/stripped to RGB.
Image<float> read_png(const std::string& path);

// Writes 8-bit RGB with round-to-nearest quantization of clamped values.
void write_png(const std::string& path, const Image<float>& image);

}  // namespace splat
