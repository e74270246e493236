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

#include "snapml/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"

#include "snapml/errors.hpp"
#include "snapml/io.hpp"

namespace snapml {
namespace {

constexpr int kColumns = 1 + kPulseParams + 1;

std::string header_line() {
  std::string h = "alpha";
  for (int k = 0; k < kPulseParams; ++k) {
    h += ",theta_";
    if (k < 10) h += '0';
    h += std::to_string(k);
  }
  h += ",infidelity";
  return h;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  // from_chars rejects a leading '+', which some writers emit.
  if (begin != end && *begin == '+') ++begin;
  const auto r = std::from_chars(begin, end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return v;
}

void Dataset::check_sorted() const {
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (!(records[i].alpha > records[i - 1].alpha)) {
      throw std::invalid_argument("Dataset: angles not strictly increasing at record " +
                                  std::to_string(i));
    }
  }
}

std::vector<double> angle_grid(int n) {
  if (n < 1) throw std::invalid_argument("angle_grid: n must be >= 1");
  std::vector<double> a(n);
  for (int i = 0; i < n; ++i) a[i] = -std::numbers::pi + (i + 0.5) * 2.0 * std::numbers::pi / n;
  return a;
}

Dataset filter_by_infidelity(const Dataset& ds, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("filter_by_infidelity: threshold must be > 0");
  Dataset out;
  out.meta = ds.meta;
  for (const auto& r : ds.records) {
    if (r.infidelity <= threshold) out.records.push_back(r);
  }
  return out;
}

Dataset smooth_parameters(const Dataset& ds, int window) {
  if (window < 1) throw std::invalid_argument("smooth: window must be >= 1");
  const int n = static_cast<int>(ds.size());
  Dataset out = ds;
  if (n == 0 || window == 1) return out;
  if (window >= n) {
    ParamVector mean{};
    for (const auto& r : ds.records) {
      for (int k = 0; k < kPulseParams; ++k) mean[k] += r.theta[k];
    }
    for (double& v : mean) v /= n;
    for (auto& r : out.records) r.theta = mean;
    return out;
  }
  const int half = window / 2;  // even windows grow to 2*half+1
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    ParamVector sum{};
    for (int j = lo; j <= hi; ++j) {
      for (int k = 0; k < kPulseParams; ++k) sum[k] += ds.records[j].theta[k];
    }
    for (int k = 0; k < kPulseParams; ++k) out.records[i].theta[k] = sum[k] / (hi - lo + 1);
  }
  return out;
}

Dataset smooth(const Dataset& ds, int window, const GateSimulator& sim) {
  Dataset out = smooth_parameters(ds, window);
  for (auto& r : out.records) {
    r.infidelity = sim.infidelity(PulseParams::from_flat(r.theta, sim.duration()),
                                  SnapSpec{r.alpha, ds.meta.level});
  }
  out.meta.source = ds.meta.source + "+smooth(" + std::to_string(window) + ")";
  return out;
}

std::tuple<Dataset, Dataset, Dataset> split(const Dataset& ds, double train, double val,
                                            double test, std::uint64_t seed) {
  if (!(train > 0.0 && val > 0.0 && test > 0.0) || std::abs(train + val + test - 1.0) > 1e-9) {
    throw std::invalid_argument("split: fractions must be positive and sum to 1");
  }
  const std::size_t n = ds.size();
  if (n < 3) throw std::invalid_argument("split: need at least 3 records");
  std::size_t n_val = std::max<std::size_t>(1, std::llround(val * n));
  std::size_t n_test = std::max<std::size_t>(1, std::llround(test * n));
  if (n_val + n_test >= n) n_val = n_test = 1;
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(idx[i], idx[pick(rng)]);
  }
  auto take = [&](std::size_t from, std::size_t count) {
    std::vector<std::size_t> part(idx.begin() + from, idx.begin() + from + count);
    std::sort(part.begin(), part.end());
    Dataset d;
    d.meta = ds.meta;
    for (std::size_t i : part) d.records.push_back(ds.records[i]);
    return d;
  };
  return {take(0, n_train), take(n_train, n_val), take(n_train + n_val, n_test)};
}

double max_abs_theta(const Dataset& ds) {
  double m = 0.0;
  for (const auto& r : ds.records) {
    for (double v : r.theta) m = std::max(m, std::abs(v));
  }
  return m;
}

std::filesystem::path meta_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".meta.json";
  return p;
}

namespace {

nlohmann::json system_to_json(const SystemSpec& s) {
  return {{"d", s.d},
          {"qubit_levels", s.qubit_levels},
          {"chi_mhz", s.chi_mhz},
          {"xi_mhz", s.xi_mhz},
          {"two_pi_units", s.two_pi_units}};
}

SystemSpec system_from_json(const nlohmann::json& j) {
  SystemSpec s;
  s.d = j.at("d").get<int>();
  s.qubit_levels = j.at("qubit_levels").get<int>();
  s.chi_mhz = j.at("chi_mhz").get<double>();
  s.xi_mhz = j.at("xi_mhz").get<double>();
  s.two_pi_units = j.at("two_pi_units").get<bool>();
  return s;
}

}  // namespace

void save(const Dataset& ds, const std::filesystem::path& path) {
  std::ostringstream table;
  table << header_line() << '\n';
  for (const auto& r : ds.records) {
    table << format_double(r.alpha);
    for (double v : r.theta) table << ',' << format_double(v);
    table << ',' << format_double(r.infidelity) << '\n';
  }
  nlohmann::json meta{
      {"format", "snapml-dataset"},
      {"version", 1},
      {"records", ds.records.size()},
      {"system", system_to_json(ds.meta.system)},
      {"level", ds.meta.level},
      {"steps", ds.meta.steps},
      {"duration", ds.meta.duration},
      {"seed", ds.meta.seed},
      {"scale", ds.meta.scale},
      {"source", ds.meta.source},
      {"options", ds.meta.options},
  };
  write_file_atomic(path, table.str());
  write_file_atomic(meta_path(path), meta.dump(2) + "\n");
}

Dataset load(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const std::string name = path.string();
  Dataset ds;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError(name + ":1: empty file");
  ++line_no;
  const auto header = split_commas(line);
  if (static_cast<int>(header.size()) != kColumns || line != header_line()) {
    int thetas = 0;
    for (const auto& h : header) thetas += h.rfind("theta_", 0) == 0 ? 1 : 0;
    throw SchemaError(name + ":1: expected header alpha,theta_00..theta_31,infidelity (" +
                      std::to_string(kPulseParams) + " theta columns), found " +
                      std::to_string(thetas) + " theta columns");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (static_cast<int>(fields.size()) != kColumns) {
      throw ParseError(name + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(kColumns) + " fields, found " +
                       std::to_string(fields.size()));
    }
    Record r;
    for (int c = 0; c < kColumns; ++c) {
      double v = 0.0;
      try {
        v = parse_double(fields[c]);
      } catch (const std::invalid_argument& e) {
        throw ParseError(name + ":" + std::to_string(line_no) + ": field '" + header[c] +
                         "': " + e.what());
      }
      if (c == 0) {
        r.alpha = v;
      } else if (c <= kPulseParams) {
        r.theta[c - 1] = v;
      } else {
        r.infidelity = v;
      }
    }
    ds.records.push_back(r);
  }
  if (!text.empty() && text.back() != '\n') {
    throw ParseError(name + ":" + std::to_string(line_no) + ": truncated final line");
  }

  const auto mpath = meta_path(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(mpath));
    ds.meta.system = system_from_json(meta.at("system"));
    ds.meta.level = meta.at("level").get<int>();
    ds.meta.steps = meta.at("steps").get<int>();
    ds.meta.duration = meta.at("duration").get<double>();
    ds.meta.seed = meta.at("seed").get<std::uint64_t>();
    ds.meta.scale = meta.at("scale").get<double>();
    ds.meta.source = meta.at("source").get<std::string>();
    ds.meta.options = meta.at("options").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(mpath.string() + ": " + e.what());
  }
  const auto expected = meta.at("records").get<std::size_t>();
  if (expected != ds.records.size()) {
    throw ParseError(name + ": metadata lists " + std::to_string(expected) + " records, table has " +
                     std::to_string(ds.records.size()));
  }
  return ds;
}

}  // namespace snapml
