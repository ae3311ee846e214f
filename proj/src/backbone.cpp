// Copyright 2026 The metaspoof Authors
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

#include "metaspoof/backbone.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <stdexcept>

#include "metaspoof/kernels.hpp"

namespace metaspoof {

std::vector<std::size_t> BackboneConfig::layer_dims() const {
  std::vector<std::size_t> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(output_dim);
  return dims;
}

void BackboneConfig::validate() const {
  for (std::size_t d : layer_dims()) {
    if (d == 0) throw std::invalid_argument("backbone dimensions must be >= 1");
  }
}

std::size_t closed_form_parameter_count(const BackboneConfig& config) {
  const auto dims = config.layer_dims();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += dims[l] * dims[l + 1] + dims[l + 1];
  return n;
}

ParameterSet::ParameterSet(BackboneConfig config, std::vector<NamedTensor> tensors)
    : config_(std::move(config)), tensors_(std::move(tensors)) {
  const auto dims = config_.layer_dims();
  if (tensors_.size() != 2 * (dims.size() - 1)) {
    throw std::invalid_argument("parameter set has " + std::to_string(tensors_.size()) +
                                " tensors, layer spec needs " + std::to_string(2 * (dims.size() - 1)));
  }
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (tensors_[2 * l].tensor.shape() != Shape{dims[l], dims[l + 1]} ||
        tensors_[2 * l + 1].tensor.shape() != Shape{dims[l + 1]}) {
      throw DimensionError("layer " + std::to_string(l) + " tensors do not match the layer spec");
    }
  }
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.tensor.numel();
  return n;
}

std::vector<Tensor*> ParameterSet::pointers() {
  std::vector<Tensor*> out;
  for (auto& t : tensors_) out.push_back(&t.tensor);
  return out;
}

void ParameterSet::zero_grads() {
  for (auto& t : tensors_) t.tensor.zero_grad();
}

void ParameterSet::set_requires_grad(bool on) {
  for (auto& t : tensors_) t.tensor.set_requires_grad(on);
}

void ParameterSet::sgd_step(double rate) {
  for (auto& t : tensors_) {
    if (!t.tensor.has_grad()) continue;
    const auto g = t.tensor.grad();
    kernels::active().axpy(g.size(), -rate, g.data(), t.tensor.data());
  }
}

bool ParameterSet::values_equal(const ParameterSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto a = tensors_[i].tensor.values();
    const auto b = other.tensors_[i].tensor.values();
    if (tensors_[i].tensor.shape() != other.tensors_[i].tensor.shape()) return false;
    if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

ParameterSet init_xavier(const BackboneConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const auto dims = config.layer_dims();
  std::vector<NamedTensor> tensors;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)));
    Tensor w({fan_in, fan_out});
    for (double& x : w.values()) x = normal(rng);
    tensors.push_back({"layer" + std::to_string(l) + ".weight", std::move(w)});
    tensors.push_back({"layer" + std::to_string(l) + ".bias", Tensor({fan_out})});
  }
  ParameterSet params(config, std::move(tensors));
  params.set_requires_grad(true);
  return params;
}

ParameterSet clone_params(const ParameterSet& params) {
  ParameterSet copy = params;
  for (Tensor* t : copy.pointers()) t->clear_grad();
  return copy;
}

std::vector<Var> bind(Graph& graph, ParameterSet& params) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (Tensor* t : params.pointers()) vars.push_back(graph.parameter(*t));
  return vars;
}

Var embed(Graph& graph, std::span<const Var> params, Var batch) {
  (void)graph;
  const std::size_t layers = params.size() / 2;
  if (layers == 0) throw std::invalid_argument("embed: empty parameter set");
  const std::size_t in_dim = params[0].value().rows();
  if (batch.value().rank() != 2 || batch.value().cols() != in_dim) {
    throw DimensionError("embed: batch " + shape_string(batch.value().shape()) +
                         " does not match input dim " + std::to_string(in_dim));
  }
  Var h = batch;
  for (std::size_t l = 0; l < layers; ++l) {
    h = add_row_vector(matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < layers) h = relu(h);
  }
  return h;
}

Tensor embed(const ParameterSet& params, const Tensor& batch) {
  Graph g;
  std::vector<Var> vars;
  for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(g.input(params[i]));
  return embed(g, vars, g.input(batch)).value();
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'M', 'S', 'P', 'F'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  auto bits = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.insert(out.end(), bits.begin(), bits.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw std::runtime_error("checkpoint truncated");
    std::array<std::uint8_t, sizeof(T)> bits;
    std::memcpy(bits.data(), bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    return std::bit_cast<T>(bits);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const ParameterSet& params) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kVersion);
  const auto dims = params.config().layer_dims();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  put<std::uint64_t>(out, params.config().seed);
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double x : params[i].values()) put<double>(out, x);
  }
  return out;
}

ParameterSet deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw std::runtime_error("not an MSPF checkpoint (bad magic)");
  }
  Reader r(bytes.subspan(4));
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto n_dims = r.get<std::uint32_t>();
  if (n_dims < 2) throw std::runtime_error("checkpoint layer spec needs at least two dims");
  std::vector<std::size_t> dims;
  for (std::uint32_t i = 0; i < n_dims; ++i) dims.push_back(r.get<std::uint32_t>());
  BackboneConfig config;
  config.input_dim = dims.front();
  config.output_dim = dims.back();
  config.hidden_dims.assign(dims.begin() + 1, dims.end() - 1);
  config.seed = r.get<std::uint64_t>();
  config.validate();

  std::vector<NamedTensor> tensors;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Tensor w({dims[l], dims[l + 1]});
    for (double& x : w.values()) x = r.get<double>();
    Tensor b({dims[l + 1]});
    for (double& x : b.values()) x = r.get<double>();
    tensors.push_back({"layer" + std::to_string(l) + ".weight", std::move(w)});
    tensors.push_back({"layer" + std::to_string(l) + ".bias", std::move(b)});
  }
  if (!r.done()) throw std::runtime_error("checkpoint has trailing bytes");
  ParameterSet params(config, std::move(tensors));
  params.set_requires_grad(true);
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  const auto bytes = serialize_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace metaspoof
