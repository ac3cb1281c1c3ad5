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

#include "covmeta/checkpoint.h"

#include <cstdio>
#include <fstream>

#include "covmeta/binary_io.h"

namespace covmeta {

namespace {

constexpr const char* kMagic = "COVMETA-CKPT";
constexpr int kFormatVersion = 1;
constexpr std::uint64_t kModelStream = 0x6d6f64656cULL;  // "model"

nlohmann::json arch_to_json(const Architecture& a) {
  return {{"hidden", a.hidden},
          {"bias_transform", a.bias_transform},
          {"latent", a.latent},
          {"decoder_hidden", a.decoder_hidden},
          {"encoder_input", to_string(a.encoder_input)}};
}

Architecture arch_from_json(const nlohmann::json& j) {
  Architecture a;
  a.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  a.bias_transform = j.at("bias_transform").get<std::size_t>();
  a.latent = j.at("latent").get<std::size_t>();
  a.decoder_hidden = j.at("decoder_hidden").get<std::size_t>();
  a.encoder_input = parse_encoder_input(j.at("encoder_input").get<std::string>());
  return a;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Model of the right shape for `algorithm` and `arch`; values are overwritten.
ModelState shaped_model(Algorithm algorithm, const Architecture& arch) {
  ModelState m;
  m.algorithm = algorithm;
  m.arch = arch;
  Rng rng(0);
  if (m.uses_meta()) {
    m.meta = init_meta_params(rng, arch);
  } else {
    m.shared = init_mlp_params(rng, arch);
  }
  return m;
}

}  // namespace

Layout ModelState::layout() const { return uses_meta() ? layout_of(meta) : layout_of(shared); }

Tensor ModelState::flat() const { return uses_meta() ? flatten(meta) : flatten(shared); }

void ModelState::set_flat(const Tensor& f) {
  if (uses_meta()) {
    unflatten(meta, f);
  } else {
    unflatten(shared, f);
  }
}

ModelState init_model(const RunConfig& cfg) {
  cfg.validate();
  ModelState m;
  m.algorithm = cfg.algorithm;
  m.arch = architecture_of(cfg);
  Rng rng = Rng(cfg.model_seed).split(kModelStream);
  if (m.uses_meta()) {
    m.meta = init_meta_params(rng, m.arch);
  } else {
    m.shared = init_mlp_params(rng, m.arch);
  }
  m.adam = AdamState::for_params(m.flat(), cfg.outer_lr);
  return m;
}

std::uint64_t layout_hash(const Layout& layout) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& e : layout) feed(e.name + ":" + shape_str(e.shape) + ";");
  return h;
}

void save_checkpoint(const std::string& path, const RunConfig& cfg, const ModelState& model) {
  const Layout layout = model.layout();
  const Tensor flat = model.flat();
  const std::size_t n = flat.size();
  if (model.adam.first_moment.size() != n || model.adam.second_moment.size() != n) {
    throw std::invalid_argument("save_checkpoint: optimizer moments do not match the parameter layout");
  }
  nlohmann::json jl = nlohmann::json::array();
  for (const auto& e : layout) jl.push_back({{"name", e.name}, {"shape", e.shape}});
  const nlohmann::json header = {
      {"format_version", kFormatVersion},
      {"algorithm", to_string(model.algorithm)},
      {"architecture", arch_to_json(model.arch)},
      {"config", to_json(cfg)},
      {"layout", jl},
      {"layout_hash", hex64(layout_hash(layout))},
      {"num_params", n},
      {"step", model.step},
      {"adam",
       {{"learning_rate", model.adam.learning_rate},
        {"beta1", model.adam.beta1},
        {"beta2", model.adam.beta2},
        {"epsilon", model.adam.epsilon},
        {"step", model.adam.step}}},
  };
  // Write to a temporary name first so a crash never leaves a torn file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    binary::write_frame_header(os, kMagic, header.dump());
    for (const Tensor* t : {&flat, &model.adam.first_moment, &model.adam.second_moment}) {
      for (double v : t->data()) binary::write_f64(os, v);
    }
    os.flush();
    if (!os) throw std::runtime_error("error while writing '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot rename '" + tmp + "' to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(binary::read_frame_header(is, kMagic));
  } catch (const nlohmann::json::exception& e) {
    throw binary::FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  Checkpoint ck;
  std::size_t n = 0;
  try {
    if (header.at("format_version").get<int>() != kFormatVersion) {
      throw binary::FormatError("checkpoint format_version " + header.at("format_version").dump() + " is not supported");
    }
    ck.config = config_from_json(header.at("config"));
    const Algorithm algorithm = parse_algorithm(header.at("algorithm").get<std::string>());
    const Architecture arch = arch_from_json(header.at("architecture"));
    if (algorithm != ck.config.algorithm || !(arch == architecture_of(ck.config))) {
      throw binary::FormatError("checkpoint architecture check failed: header disagrees with its config");
    }
    ck.model = shaped_model(algorithm, arch);
    const Layout layout = ck.model.layout();
    if (header.at("layout_hash").get<std::string>() != hex64(layout_hash(layout))) {
      throw binary::FormatError("checkpoint layout hash check failed");
    }
    n = header.at("num_params").get<std::size_t>();
    if (n != layout_size(layout)) throw binary::FormatError("checkpoint num_params check failed");
    ck.model.step = header.at("step").get<std::uint64_t>();
    const auto& ja = header.at("adam");
    ck.model.adam.learning_rate = ja.at("learning_rate").get<double>();
    ck.model.adam.beta1 = ja.at("beta1").get<double>();
    ck.model.adam.beta2 = ja.at("beta2").get<double>();
    ck.model.adam.epsilon = ja.at("epsilon").get<double>();
    ck.model.adam.step = ja.at("step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw binary::FormatError(std::string("checkpoint header: ") + e.what());
  }
  const auto read_block = [&](const char* what) {
    std::vector<double> v(n);
    for (double& x : v) x = binary::read_f64(is, what);
    return Tensor::vector(std::move(v));
  };
  ck.model.set_flat(read_block("checkpoint parameters"));
  ck.model.adam.first_moment = read_block("checkpoint first moment");
  ck.model.adam.second_moment = read_block("checkpoint second moment");
  if (is.peek() != std::char_traits<char>::eof()) throw binary::FormatError("checkpoint payload length check failed: trailing bytes");
  return ck;
}

}  // namespace covmeta
