#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace ella {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Activations are stored flat in channel-major order: index = (c*H + y)*W + x.
// Plain vectors use Shape{d, 0, 0}.
struct Shape {
  int c = 0;
  int h = 0;
  int w = 0;

  bool image() const { return h > 0; }
  long size() const { return image() ? static_cast<long>(c) * h * w : c; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

struct Dense {
  int in = 0;
  int out = 0;
  bool bias = true;
};

struct Conv2d {
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 0;
  bool bias = true;
};

enum class Act { Tanh, Relu };

struct Activation {
  Act kind = Act::Tanh;
};

// Inference-mode batchnorm: the running statistics are fixed buffers of the
// descriptor, only the scale/shift pair is learnable.
struct BatchNormFrozen {
  Vector mean;
  Vector var;
  double eps = 1e-5;
  int channels() const { return static_cast<int>(mean.size()); }
};

struct Flatten {};

using Layer = std::variant<Dense, Conv2d, Activation, BatchNormFrozen, Flatten>;

// Parameter flattening: layer order; within a layer row-major weights, then
// bias; batchnorm stores scale then shift. This order is the checkpoint format.
struct Arch {
  Shape input;
  std::vector<Layer> layers;

  long param_count() const;
  int output_dim() const;
  Shape shape_after(std::size_t n_layers) const;
  long param_offset(std::size_t layer_index) const;
  long layer_param_count(std::size_t layer_index) const;
  void validate() const;
};

long layer_params(const Layer& l);

struct FlatParams {
  Arch arch;
  Vector values;
};

nlohmann::json arch_to_json(const Arch& a);
Arch arch_from_json(const nlohmann::json& j);

// Compact text form used by the CLI, e.g. input "1x28x28" with layers
// "conv:4:3:2:1,bn,relu,conv:8:3:2:1,bn,relu,flatten,dense:10".
// Vector inputs are a single integer, e.g. "2" with "dense:16,tanh,dense:1".
Arch parse_arch(const std::string& input_shape, const std::string& layer_spec);
std::string format_arch(const Arch& a);

}  // namespace ella
