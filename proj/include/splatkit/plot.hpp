// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatkit/types.hpp"

#include <string>
#include <vector>

namespace splat {

// Renders a single-series line chart (e.g. Gaussian count over training
// iterations) straight to a PNG. Axes carry numeric tick labels drawn
// with a built-in micro font.
void write_line_chart_png(const std::string& path, const std::vector<double>& xs,
                          const std::vector<double>& ys, int width = 800, int height = 500);

}  // namespace splat
