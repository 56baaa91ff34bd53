#include "ella/arch.hpp"

#include <sstream>
#include <stdexcept>

namespace ella {

std::string Shape::str() const {
  std::ostringstream os;
  if (image())
    os << c << "x" << h << "x" << w;
  else
    os << c;
  return os.str();
}

long layer_params(const Layer& l) {
  return std::visit(
      [](const auto& v) -> long {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Dense>) {
          return static_cast<long>(v.out) * v.in + (v.bias ? v.out : 0);
        } else if constexpr (std::is_same_v<T, Conv2d>) {
          return static_cast<long>(v.out_ch) * v.in_ch * v.kernel * v.kernel +
                 (v.bias ? v.out_ch : 0);
        } else if constexpr (std::is_same_v<T, BatchNormFrozen>) {
          return 2L * v.mean.size();
        } else {
          return 0;
        }
      },
      l);
}

static Shape apply_shape(const Shape& in, const Layer& l, std::size_t idx) {
  auto err = [idx](const std::string& msg) {
    throw std::invalid_argument("arch: layer " + std::to_string(idx) + ": " + msg);
  };
  return std::visit(
      [&](const auto& v) -> Shape {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Dense>) {
          if (in.image()) err("dense needs a flattened input, got " + in.str());
          if (in.c != v.in)
            err("dense expects " + std::to_string(v.in) + " features, got " + in.str());
          return Shape{v.out, 0, 0};
        } else if constexpr (std::is_same_v<T, Conv2d>) {
          if (!in.image()) err("conv2d needs an image input, got " + in.str());
          if (in.c != v.in_ch)
            err("conv2d expects " + std::to_string(v.in_ch) + " channels, got " + in.str());
          if (v.kernel < 1 || v.stride < 1 || v.pad < 0) err("bad conv2d geometry");
          int ho = (in.h + 2 * v.pad - v.kernel) / v.stride + 1;
          int wo = (in.w + 2 * v.pad - v.kernel) / v.stride + 1;
          if (in.h + 2 * v.pad < v.kernel || in.w + 2 * v.pad < v.kernel || ho < 1 || wo < 1)
            err("conv2d kernel does not fit input " + in.str());
          return Shape{v.out_ch, ho, wo};
        } else if constexpr (std::is_same_v<T, Activation>) {
          return in;
        } else if constexpr (std::is_same_v<T, BatchNormFrozen>) {
          if (v.mean.size() != v.var.size()) err("batchnorm mean/var length mismatch");
          if (in.c != v.channels())
            err("batchnorm expects " + std::to_string(v.channels()) + " channels, got " + in.str());
          return in;
        } else {  // Flatten
          if (!in.image()) err("flatten needs an image input, got " + in.str());
          return Shape{static_cast<int>(in.size()), 0, 0};
        }
      },
      l);
}

Shape Arch::shape_after(std::size_t n_layers) const {
  if (n_layers > layers.size()) throw std::out_of_range("arch: layer index out of range");
  Shape s = input;
  for (std::size_t i = 0; i < n_layers; ++i) s = apply_shape(s, layers[i], i);
  return s;
}

void Arch::validate() const {
  if (input.size() < 1) throw std::invalid_argument("arch: empty input shape");
  Shape out = shape_after(layers.size());
  if (out.image())
    throw std::invalid_argument("arch: output is an image; append a flatten or dense layer");
}

long Arch::param_count() const {
  long n = 0;
  for (const auto& l : layers) n += layer_params(l);
  return n;
}

int Arch::output_dim() const { return static_cast<int>(shape_after(layers.size()).size()); }

long Arch::param_offset(std::size_t layer_index) const {
  if (layer_index > layers.size()) throw std::out_of_range("arch: layer index out of range");
  long off = 0;
  for (std::size_t i = 0; i < layer_index; ++i) off += layer_params(layers[i]);
  return off;
}

long Arch::layer_param_count(std::size_t layer_index) const {
  if (layer_index >= layers.size()) throw std::out_of_range("arch: layer index out of range");
  return layer_params(layers[layer_index]);
}

nlohmann::json arch_to_json(const Arch& a) {
  nlohmann::json j;
  if (a.input.image())
    j["input"] = {a.input.c, a.input.h, a.input.w};
  else
    j["input"] = {a.input.c};
  j["layers"] = nlohmann::json::array();
  for (const auto& l : a.layers) {
    nlohmann::json e;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Dense>) {
            e = {{"type", "dense"}, {"in", v.in}, {"out", v.out}, {"bias", v.bias}};
          } else if constexpr (std::is_same_v<T, Conv2d>) {
            e = {{"type", "conv2d"}, {"in_ch", v.in_ch}, {"out_ch", v.out_ch},
                 {"kernel", v.kernel}, {"stride", v.stride}, {"pad", v.pad}, {"bias", v.bias}};
          } else if constexpr (std::is_same_v<T, Activation>) {
            e = {{"type", v.kind == Act::Tanh ? "tanh" : "relu"}};
          } else if constexpr (std::is_same_v<T, BatchNormFrozen>) {
            e = {{"type", "batchnorm"},
                 {"mean", std::vector<double>(v.mean.begin(), v.mean.end())},
                 {"var", std::vector<double>(v.var.begin(), v.var.end())},
                 {"eps", v.eps}};
          } else {
            e = {{"type", "flatten"}};
          }
        },
        l);
    j["layers"].push_back(e);
  }
  return j;
}

Arch arch_from_json(const nlohmann::json& j) {
  Arch a;
  auto in = j.at("input");
  if (in.size() == 3)
    a.input = Shape{in[0].get<int>(), in[1].get<int>(), in[2].get<int>()};
  else if (in.size() == 1)
    a.input = Shape{in[0].get<int>(), 0, 0};
  else
    throw std::invalid_argument("arch json: input must have 1 or 3 dims");
  for (const auto& e : j.at("layers")) {
    std::string t = e.at("type").get<std::string>();
    if (t == "dense") {
      a.layers.push_back(Dense{e.at("in").get<int>(), e.at("out").get<int>(),
                               e.value("bias", true)});
    } else if (t == "conv2d") {
      a.layers.push_back(Conv2d{e.at("in_ch").get<int>(), e.at("out_ch").get<int>(),
                                e.at("kernel").get<int>(), e.at("stride").get<int>(),
                                e.at("pad").get<int>(), e.value("bias", true)});
    } else if (t == "tanh") {
      a.layers.push_back(Activation{Act::Tanh});
    } else if (t == "relu") {
      a.layers.push_back(Activation{Act::Relu});
    } else if (t == "batchnorm") {
      BatchNormFrozen bn;
      auto m = e.at("mean").get<std::vector<double>>();
      auto v = e.at("var").get<std::vector<double>>();
      bn.mean = Eigen::Map<const Vector>(m.data(), static_cast<long>(m.size()));
      bn.var = Eigen::Map<const Vector>(v.data(), static_cast<long>(v.size()));
      bn.eps = e.value("eps", 1e-5);
      a.layers.push_back(std::move(bn));
    } else if (t == "flatten") {
      a.layers.push_back(Flatten{});
    } else {
      throw std::invalid_argument("arch json: unknown layer type '" + t + "'");
    }
  }
  a.validate();
  return a;
}

static std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

static int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("arch spec: bad " + what + " '" + s + "'");
  }
}

Arch parse_arch(const std::string& input_shape, const std::string& layer_spec) {
  Arch a;
  auto dims = split_on(input_shape, 'x');
  if (dims.size() == 1)
    a.input = Shape{to_int(dims[0], "input dim"), 0, 0};
  else if (dims.size() == 3)
    a.input = Shape{to_int(dims[0], "channels"), to_int(dims[1], "height"),
                    to_int(dims[2], "width")};
  else
    throw std::invalid_argument("arch spec: input shape must be D or CxHxW");

  Shape cur = a.input;
  for (const auto& tok : split_on(layer_spec, ',')) {
    if (tok.empty()) continue;
    auto f = split_on(tok, ':');
    const std::string& kind = f[0];
    if (kind == "dense") {
      if (f.size() != 2) throw std::invalid_argument("arch spec: dense:OUT");
      if (cur.image()) throw std::invalid_argument("arch spec: dense after image; add flatten");
      a.layers.push_back(Dense{cur.c, to_int(f[1], "dense width"), true});
    } else if (kind == "conv") {
      if (f.size() != 5)
        throw std::invalid_argument("arch spec: conv:OUT_CH:KERNEL:STRIDE:PAD");
      a.layers.push_back(Conv2d{cur.c, to_int(f[1], "out channels"), to_int(f[2], "kernel"),
                                to_int(f[3], "stride"), to_int(f[4], "pad"), true});
    } else if (kind == "tanh") {
      a.layers.push_back(Activation{Act::Tanh});
    } else if (kind == "relu") {
      a.layers.push_back(Activation{Act::Relu});
    } else if (kind == "bn") {
      BatchNormFrozen bn;
      bn.mean = Vector::Zero(cur.c);
      bn.var = Vector::Ones(cur.c);
      a.layers.push_back(std::move(bn));
    } else if (kind == "flatten") {
      a.layers.push_back(Flatten{});
    } else {
      throw std::invalid_argument("arch spec: unknown layer '" + kind + "'");
    }
    cur = apply_shape(cur, a.layers.back(), a.layers.size() - 1);
  }
  a.validate();
  return a;
}

std::string format_arch(const Arch& a) {
  std::ostringstream os;
  os << a.input.str() << " -> ";
  bool first = true;
  for (const auto& l : a.layers) {
    if (!first) os << ",";
    first = false;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Dense>)
            os << "dense:" << v.out;
          else if constexpr (std::is_same_v<T, Conv2d>)
            os << "conv:" << v.out_ch << ":" << v.kernel << ":" << v.stride << ":" << v.pad;
          else if constexpr (std::is_same_v<T, Activation>)
            os << (v.kind == Act::Tanh ? "tanh" : "relu");
          else if constexpr (std::is_same_v<T, BatchNormFrozen>)
            os << "bn";
          else
            os << "flatten";
        },
        l);
  }
  os << " (" << a.param_count() << " params)";
  return os.str();
}

}  // namespace ella
