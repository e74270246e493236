// Copyright 2026 The snapml Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

namespace snapml::svg {

struct Axis {
  std::string label;
  bool log = false;
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool line = true;
  bool markers = false;
};

/// Line/scatter chart. Non-positive values are dropped on log axes.
std::string chart(const std::vector<Series>& series, const Axis& x, const Axis& y,
                  const std::string& title);

/// Grid of cells: values[row][col] drawn with a diverging palette symmetric
/// about zero. Columns are placed at `xs`; rows are integer indices.
std::string heatmap(const std::vector<double>& xs, const std::vector<std::vector<double>>& values,
                    const std::string& x_label, const std::string& y_label,
                    const std::string& title);

}  // namespace snapml::svg
