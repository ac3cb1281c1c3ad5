// Copyright 2026 The covmeta Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "covmeta/dataset_io.h"

#include <fstream>

#include "covmeta/binary_io.h"

namespace covmeta {

namespace {

constexpr const char* kMagic = "COVMETA-DATASET";
constexpr int kFormatVersion = 1;
constexpr const char* kRecordLayout =
    "f64 support_x[support_size], f64 support_y[support_size], f64 query_x[query_size], "
    "f64 query_y[query_size], f64 hypothesis_params[3], u32 mode, u32 family, u32 hypothesis_class";

std::uint32_t family_tag(Family f) { return static_cast<std::uint32_t>(f); }

Family family_from_tag(std::uint32_t tag) {
  if (tag > static_cast<std::uint32_t>(Family::kTanh)) throw binary::FormatError("invalid family tag " + std::to_string(tag));
  return static_cast<Family>(tag);
}

}  // namespace

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  using nlohmann::json;
  json modes = json::array();
  for (std::size_t p = 0; p < m.meta.modes.size(); ++p) {
    json entry = {{"mu", m.meta.modes[p].mu}, {"sigma", m.meta.modes[p].sigma}};
    if (m.meta.dependence == Dependence::kDependent) {
      const std::size_t cls = m.meta.dependent_class(p);
      entry["family"] = to_string(m.meta.class_family(cls));
      entry["class"] = cls;
    }
    modes.push_back(entry);
  }
  return {
      {"format_version", kFormatVersion},
      {"variant", to_string(m.meta.variant)},
      {"dependence", to_string(m.meta.dependence)},
      {"num_modes", m.meta.modes.size()},
      {"modes", modes},
      {"weights", m.meta.weights},
      {"noise_sigma", m.meta.noise_sigma},
      {"meta_seed", m.meta.seed},
      {"task_seed", m.task_seed},
      {"num_tasks", m.num_tasks},
      {"support_size", m.sizes.support},
      {"query_size", m.sizes.query},
      {"record_layout", kRecordLayout},
      {"rng", "philox4x32-10"},
  };
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kFormatVersion) {
      throw binary::FormatError("unsupported dataset format_version " + j.at("format_version").dump());
    }
    DatasetManifest m;
    m.meta.variant = parse_variant(j.at("variant").get<std::string>());
    m.meta.dependence = parse_dependence(j.at("dependence").get<std::string>());
    for (const auto& e : j.at("modes")) m.meta.modes.push_back({e.at("mu").get<double>(), e.at("sigma").get<double>()});
    m.meta.weights = j.at("weights").get<std::vector<double>>();
    m.meta.noise_sigma = j.at("noise_sigma").get<double>();
    m.meta.seed = j.at("meta_seed").get<std::uint64_t>();
    m.task_seed = j.at("task_seed").get<std::uint64_t>();
    m.num_tasks = j.at("num_tasks").get<std::size_t>();
    m.sizes.support = j.at("support_size").get<std::size_t>();
    m.sizes.query = j.at("query_size").get<std::size_t>();
    if (j.at("num_modes").get<std::size_t>() != m.meta.modes.size() || m.meta.weights.size() != m.meta.modes.size()) {
      throw binary::FormatError("dataset manifest: mode count disagrees with modes/weights");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw binary::FormatError(std::string("dataset manifest: ") + e.what());
  }
}

void write_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  binary::write_frame_header(os, kMagic, manifest_to_json(ds.manifest).dump());
  const auto& sz = ds.manifest.sizes;
  for (const Task& t : ds.tasks) {
    if (t.support_x.size() != sz.support || t.query_x.size() != sz.query) {
      throw std::invalid_argument("write_dataset: task sizes disagree with the manifest");
    }
    for (double v : t.support_x) binary::write_f64(os, v);
    for (double v : t.support_y) binary::write_f64(os, v);
    for (double v : t.query_x) binary::write_f64(os, v);
    for (double v : t.query_y) binary::write_f64(os, v);
    for (double v : t.hypothesis.params) binary::write_f64(os, v);
    binary::write_u32(os, static_cast<std::uint32_t>(t.mode));
    binary::write_u32(os, family_tag(t.hypothesis.family));
    binary::write_u32(os, static_cast<std::uint32_t>(t.hypothesis_class));
  }
  os.flush();
  if (!os) throw std::runtime_error("error while writing '" + path + "'");
}

namespace {

DatasetManifest read_manifest(std::istream& is) {
  const std::string header = binary::read_frame_header(is, kMagic);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw binary::FormatError(std::string("dataset manifest is not valid JSON: ") + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace

DatasetManifest read_dataset_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return read_manifest(is);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  Dataset ds;
  ds.manifest = read_manifest(is);
  const auto& sz = ds.manifest.sizes;
  ds.tasks.reserve(ds.manifest.num_tasks);
  const auto read_vec = [&](std::size_t n, const char* what) {
    std::vector<double> v(n);
    for (double& x : v) x = binary::read_f64(is, what);
    return v;
  };
  for (std::size_t i = 0; i < ds.manifest.num_tasks; ++i) {
    Task t;
    t.support_x = read_vec(sz.support, "support_x");
    t.support_y = read_vec(sz.support, "support_y");
    t.query_x = read_vec(sz.query, "query_x");
    t.query_y = read_vec(sz.query, "query_y");
    for (double& v : t.hypothesis.params) v = binary::read_f64(is, "hypothesis params");
    t.mode = binary::read_u32(is, "mode");
    t.hypothesis.family = family_from_tag(binary::read_u32(is, "family"));
    t.hypothesis_class = binary::read_u32(is, "hypothesis class");
    ds.tasks.push_back(std::move(t));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw binary::FormatError("dataset file has trailing bytes");
  return ds;
}

}  // namespace covmeta
