#include "ella/autodiff.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace ella {

namespace {

std::atomic<long> g_jvp_passes{0};

// Layer primitives are shared by forward() and the primal half of jvp() so the
// two paths produce identical floating-point results.

Vector dense_apply(const Dense& d, const double* W, const double* b, const Vector& in) {
  Vector out(d.out);
  for (int o = 0; o < d.out; ++o) {
    double acc = b ? b[o] : 0.0;
    const double* row = W + static_cast<long>(o) * d.in;
    for (int i = 0; i < d.in; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
  return out;
}

// weights laid out [out_ch][in_ch][ky][kx]; activations channel-major
Vector conv_apply(const Conv2d& c, const Shape& is, const Shape& os, const double* W,
                  const double* b, const Vector& in) {
  Vector out(os.size());
  const long in_hw = static_cast<long>(is.h) * is.w;
  const long out_hw = static_cast<long>(os.h) * os.w;
  const long k2 = static_cast<long>(c.kernel) * c.kernel;
  for (int oc = 0; oc < c.out_ch; ++oc) {
    const double bias = b ? b[oc] : 0.0;
    for (int oy = 0; oy < os.h; ++oy) {
      for (int ox = 0; ox < os.w; ++ox) {
        double acc = bias;
        for (int ic = 0; ic < c.in_ch; ++ic) {
          const double* w = W + (static_cast<long>(oc) * c.in_ch + ic) * k2;
          const double* src = in.data() + ic * in_hw;
          for (int ky = 0; ky < c.kernel; ++ky) {
            const int iy = oy * c.stride - c.pad + ky;
            if (iy < 0 || iy >= is.h) continue;
            for (int kx = 0; kx < c.kernel; ++kx) {
              const int ix = ox * c.stride - c.pad + kx;
              if (ix < 0 || ix >= is.w) continue;
              acc += w[ky * c.kernel + kx] * src[iy * is.w + ix];
            }
          }
        }
        out[oc * out_hw + oy * os.w + ox] = acc;
      }
    }
  }
  return out;
}

Vector act_apply(const Activation& a, const Vector& in) {
  Vector out(in.size());
  if (a.kind == Act::Tanh)
    for (long i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
  else
    for (long i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  return out;
}

Vector bn_apply(const BatchNormFrozen& bn, const Shape& s, const double* gamma,
                const double* beta, const Vector& in) {
  Vector out(in.size());
  const long hw = s.image() ? static_cast<long>(s.h) * s.w : 1;
  for (int c = 0; c < bn.channels(); ++c) {
    const double denom = std::sqrt(bn.var[c] + bn.eps);
    for (long i = 0; i < hw; ++i) {
      const long at = c * hw + i;
      out[at] = gamma[c] * ((in[at] - bn.mean[c]) / denom) + beta[c];
    }
  }
  return out;
}

void check_input(const FlatParams& p, const Vector& x) {
  if (x.size() != p.arch.input.size())
    throw std::invalid_argument("autodiff: input has " + std::to_string(x.size()) +
                                " entries, arch expects " + p.arch.input.str());
  if (p.values.size() != p.arch.param_count())
    throw std::invalid_argument("autodiff: params have " + std::to_string(p.values.size()) +
                                " entries, arch expects " +
                                std::to_string(p.arch.param_count()));
}

Vector run_forward(const FlatParams& p, const Vector& x, std::vector<Vector>* tape) {
  const Arch& a = p.arch;
  Vector cur = x;
  Shape shape = a.input;
  if (tape) tape->push_back(cur);
  long off = 0;
  for (std::size_t li = 0; li < a.layers.size(); ++li) {
    const Layer& l = a.layers[li];
    const double* w = p.values.data() + off;
    Shape next = a.shape_after(li + 1);
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Dense>) {
            cur = dense_apply(v, w, v.bias ? w + static_cast<long>(v.out) * v.in : nullptr, cur);
          } else if constexpr (std::is_same_v<T, Conv2d>) {
            const long nw = static_cast<long>(v.out_ch) * v.in_ch * v.kernel * v.kernel;
            cur = conv_apply(v, shape, next, w, v.bias ? w + nw : nullptr, cur);
          } else if constexpr (std::is_same_v<T, Activation>) {
            cur = act_apply(v, cur);
          } else if constexpr (std::is_same_v<T, BatchNormFrozen>) {
            cur = bn_apply(v, shape, w, w + v.channels(), cur);
          }
          // Flatten: layout is already flat, only the shape changes
        },
        l);
    off += layer_params(l);
    shape = next;
    if (tape) tape->push_back(cur);
  }
  return cur;
}

}  // namespace

Vector forward(const FlatParams& p, const Vector& x) {
  check_input(p, x);
  return run_forward(p, x, nullptr);
}

JvpResult jvp(const FlatParams& p, const Vector& x, const Vector& v) {
  check_input(p, x);
  if (v.size() != p.values.size())
    throw std::invalid_argument("jvp: tangent has " + std::to_string(v.size()) +
                                " entries, expected " + std::to_string(p.values.size()));
  if (!v.allFinite()) throw std::invalid_argument("jvp: tangent has non-finite entries");
  g_jvp_passes.fetch_add(1, std::memory_order_relaxed);

  const Arch& a = p.arch;
  Vector cur = x;
  Vector tan = Vector::Zero(x.size());
  Shape shape = a.input;
  long off = 0;
  for (std::size_t li = 0; li < a.layers.size(); ++li) {
    const Layer& l = a.layers[li];
    const double* w = p.values.data() + off;
    const double* dw = v.data() + off;
    Shape next = a.shape_after(li + 1);
    std::visit(
        [&](const auto& lv) {
          using T = std::decay_t<decltype(lv)>;
          if constexpr (std::is_same_v<T, Dense>) {
            const double* b = lv.bias ? w + static_cast<long>(lv.out) * lv.in : nullptr;
            const double* db = lv.bias ? dw + static_cast<long>(lv.out) * lv.in : nullptr;
            Vector nt = dense_apply(lv, w, db, tan);        // W t + db
            nt += dense_apply(lv, dw, nullptr, cur);        // dW x
            cur = dense_apply(lv, w, b, cur);
            tan = std::move(nt);
          } else if constexpr (std::is_same_v<T, Conv2d>) {
            const long nw = static_cast<long>(lv.out_ch) * lv.in_ch * lv.kernel * lv.kernel;
            const double* b = lv.bias ? w + nw : nullptr;
            const double* db = lv.bias ? dw + nw : nullptr;
            Vector nt = conv_apply(lv, shape, next, w, db, tan);
            nt += conv_apply(lv, shape, next, dw, nullptr, cur);
            cur = conv_apply(lv, shape, next, w, b, cur);
            tan = std::move(nt);
          } else if constexpr (std::is_same_v<T, Activation>) {
            Vector out = act_apply(lv, cur);
            if (lv.kind == Act::Tanh) {
              for (long i = 0; i < tan.size(); ++i) tan[i] *= 1.0 - out[i] * out[i];
            } else {
              for (long i = 0; i < tan.size(); ++i)
                if (cur[i] <= 0.0) tan[i] = 0.0;
            }
            cur = std::move(out);
          } else if constexpr (std::is_same_v<T, BatchNormFrozen>) {
            const double* gamma = w;
            const double* dgamma = dw;
            const double* dbeta = dw + lv.channels();
            const long hw = shape.image() ? static_cast<long>(shape.h) * shape.w : 1;
            Vector nt(tan.size());
            for (int c = 0; c < lv.channels(); ++c) {
              const double denom = std::sqrt(lv.var[c] + lv.eps);
              for (long i = 0; i < hw; ++i) {
                const long at = c * hw + i;
                const double xhat = (cur[at] - lv.mean[c]) / denom;
                nt[at] = dgamma[c] * xhat + gamma[c] * (tan[at] / denom) + dbeta[c];
              }
            }
            cur = bn_apply(lv, shape, gamma, w + lv.channels(), cur);
            tan = std::move(nt);
          }
        },
        l);
    off += layer_params(l);
    shape = next;
  }
  return {std::move(cur), std::move(tan)};
}

Vector vjp(const FlatParams& p, const Vector& x, const Vector& cotangent) {
  check_input(p, x);
  const Arch& a = p.arch;
  if (cotangent.size() != a.output_dim())
    throw std::invalid_argument("vjp: cotangent has " + std::to_string(cotangent.size()) +
                                " entries, expected " + std::to_string(a.output_dim()));

  std::vector<Vector> tape;
  tape.reserve(a.layers.size() + 1);
  run_forward(p, x, &tape);

  Vector grad = Vector::Zero(p.values.size());
  Vector g = cotangent;
  for (std::size_t li = a.layers.size(); li-- > 0;) {
    const Layer& l = a.layers[li];
    const long off = a.param_offset(li);
    const double* w = p.values.data() + off;
    double* gw = grad.data() + off;
    const Vector& in = tape[li];
    const Vector& out = tape[li + 1];
    const Shape is = a.shape_after(li);
    const Shape os = a.shape_after(li + 1);
    std::visit(
        [&](const auto& lv) {
          using T = std::decay_t<decltype(lv)>;
          if constexpr (std::is_same_v<T, Dense>) {
            Vector gin = Vector::Zero(lv.in);
            for (int o = 0; o < lv.out; ++o) {
              const double go = g[o];
              double* wrow = gw + static_cast<long>(o) * lv.in;
              const double* row = w + static_cast<long>(o) * lv.in;
              for (int i = 0; i < lv.in; ++i) {
                wrow[i] += go * in[i];
                gin[i] += row[i] * go;
              }
            }
            if (lv.bias) {
              double* gb = gw + static_cast<long>(lv.out) * lv.in;
              for (int o = 0; o < lv.out; ++o) gb[o] += g[o];
            }
            g = std::move(gin);
          } else if constexpr (std::is_same_v<T, Conv2d>) {
            const long in_hw = static_cast<long>(is.h) * is.w;
            const long out_hw = static_cast<long>(os.h) * os.w;
            const long k2 = static_cast<long>(lv.kernel) * lv.kernel;
            Vector gin = Vector::Zero(in.size());
            double* gb = lv.bias ? gw + static_cast<long>(lv.out_ch) * lv.in_ch * k2 : nullptr;
            for (int oc = 0; oc < lv.out_ch; ++oc) {
              for (int oy = 0; oy < os.h; ++oy) {
                for (int ox = 0; ox < os.w; ++ox) {
                  const double go = g[oc * out_hw + oy * os.w + ox];
                  if (gb) gb[oc] += go;
                  for (int ic = 0; ic < lv.in_ch; ++ic) {
                    const double* wk = w + (static_cast<long>(oc) * lv.in_ch + ic) * k2;
                    double* gwk = gw + (static_cast<long>(oc) * lv.in_ch + ic) * k2;
                    for (int ky = 0; ky < lv.kernel; ++ky) {
                      const int iy = oy * lv.stride - lv.pad + ky;
                      if (iy < 0 || iy >= is.h) continue;
                      for (int kx = 0; kx < lv.kernel; ++kx) {
                        const int ix = ox * lv.stride - lv.pad + kx;
                        if (ix < 0 || ix >= is.w) continue;
                        const long at = ic * in_hw + iy * is.w + ix;
                        gwk[ky * lv.kernel + kx] += go * in[at];
                        gin[at] += wk[ky * lv.kernel + kx] * go;
                      }
                    }
                  }
                }
              }
            }
            g = std::move(gin);
          } else if constexpr (std::is_same_v<T, Activation>) {
            if (lv.kind == Act::Tanh) {
              for (long i = 0; i < g.size(); ++i) g[i] *= 1.0 - out[i] * out[i];
            } else {
              for (long i = 0; i < g.size(); ++i)
                if (in[i] <= 0.0) g[i] = 0.0;
            }
          } else if constexpr (std::is_same_v<T, BatchNormFrozen>) {
            const long hw = is.image() ? static_cast<long>(is.h) * is.w : 1;
            double* ggamma = gw;
            double* gbeta = gw + lv.channels();
            for (int c = 0; c < lv.channels(); ++c) {
              const double denom = std::sqrt(lv.var[c] + lv.eps);
              const double gamma = w[c];
              for (long i = 0; i < hw; ++i) {
                const long at = c * hw + i;
                const double xhat = (in[at] - lv.mean[c]) / denom;
                ggamma[c] += g[at] * xhat;
                gbeta[c] += g[at];
                g[at] *= gamma / denom;
              }
            }
          }
          // Flatten: gradient passes through unchanged
        },
        l);
  }
  return grad;
}

Vector grad_row(const FlatParams& p, const Vector& x, int output_index) {
  const int C = p.arch.output_dim();
  if (output_index < 0 || output_index >= C)
    throw std::out_of_range("grad_row: output index " + std::to_string(output_index) +
                            " out of range [0, " + std::to_string(C) + ")");
  Vector e = Vector::Zero(C);
  e[output_index] = 1.0;
  return vjp(p, x, e);
}

Matrix jacobian(const FlatParams& p, const Vector& x) {
  const int C = p.arch.output_dim();
  Matrix J(C, p.values.size());
  for (int i = 0; i < C; ++i) J.row(i) = grad_row(p, x, i).transpose();
  return J;
}

long jvp_pass_count() { return g_jvp_passes.load(std::memory_order_relaxed); }

}  // namespace ella
