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

#include "json.hpp"

#include "snapml/errors.hpp"
#include "snapml/io.hpp"
#include "snapml/networks.hpp"

namespace snapml {
namespace {

using nlohmann::json;

json mlp_to_json(const Mlp& net) {
  json layers = json::array();
  for (int l = 0; l < net.layers(); ++l) {
    const auto& w = net.weight(l);
    json rows = json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      std::vector<double> row(w.cols());
      for (Eigen::Index c = 0; c < w.cols(); ++c) row[c] = w(r, c);
      rows.push_back(row);
    }
    std::vector<double> b(net.bias(l).data(), net.bias(l).data() + net.bias(l).size());
    layers.push_back({{"weights", rows}, {"bias", b}});
  }
  return {{"widths", net.config().widths}, {"layers", layers}};
}

Mlp mlp_from_json(const json& j) {
  MlpConfig cfg{j.at("widths").get<std::vector<int>>()};
  cfg.validate();
  Mlp net(cfg);
  const auto& layers = j.at("layers");
  if (static_cast<int>(layers.size()) != net.layers()) {
    throw SchemaError("model: layer count does not match widths");
  }
  for (int l = 0; l < net.layers(); ++l) {
    auto& w = net.weight(l);
    const auto rows = layers[l].at("weights").get<std::vector<std::vector<double>>>();
    const auto bias = layers[l].at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(rows.size()) != w.rows() ||
        static_cast<Eigen::Index>(bias.size()) != w.rows()) {
      throw SchemaError("model: layer " + std::to_string(l) + " has the wrong shape");
    }
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != w.cols()) {
        throw SchemaError("model: layer " + std::to_string(l) + " has the wrong shape");
      }
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rows[r][c];
      net.bias(l)(r) = bias[r];
    }
  }
  return net;
}

}  // namespace

std::string model_to_json(const Model& model) {
  json j{{"format", "snapml-model"},
         {"version", 1},
         {"kind", model.kind()},
         {"scale", model.scale()},
         {"seed", model.seed()}};
  if (const auto* m = dynamic_cast<const MlpModel*>(&model)) {
    j["mlp"] = mlp_to_json(m->net());
  } else if (const auto* m = dynamic_cast<const MoeModel*>(&model)) {
    json experts = json::array();
    for (const auto& e : m->experts()) experts.push_back(mlp_to_json(e));
    j["experts"] = experts;
    j["gate"] = mlp_to_json(m->gate());
  } else if (const auto* m = dynamic_cast<const MrModel*>(&model)) {
    json regs = json::array();
    for (const auto& r : m->regressors()) regs.push_back(mlp_to_json(r));
    j["regressors"] = regs;
    j["boundaries"] = m->boundaries();
  } else {
    throw std::invalid_argument("model_to_json: unsupported model kind " + model.kind());
  }
  return j.dump(1) + "\n";
}

std::unique_ptr<Model> model_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "snapml-model") {
      throw SchemaError("model: unexpected format tag");
    }
    const auto kind = j.at("kind").get<std::string>();
    const double scale = j.at("scale").get<double>();
    const auto seed = j.at("seed").get<std::uint64_t>();
    if (kind == "mlp") return std::make_unique<MlpModel>(mlp_from_json(j.at("mlp")), scale, seed);
    if (kind == "moe") {
      std::vector<Mlp> experts;
      for (const auto& e : j.at("experts")) experts.push_back(mlp_from_json(e));
      return std::make_unique<MoeModel>(std::move(experts), mlp_from_json(j.at("gate")), scale,
                                        seed);
    }
    if (kind == "mr") {
      std::vector<Mlp> regs;
      for (const auto& r : j.at("regressors")) regs.push_back(mlp_from_json(r));
      return std::make_unique<MrModel>(std::move(regs),
                                       j.at("boundaries").get<std::vector<double>>(), scale, seed);
    }
    throw SchemaError("model: unknown kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

void save_model(const Model& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(model));
}

std::unique_ptr<Model> load_model(const std::filesystem::path& path) {
  return model_from_json(read_file(path));
}

}  // namespace snapml
