#include "ella/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ella/rng.hpp"

namespace ella {

void Dataset::check() const {
  if (classification) {
    if (static_cast<long>(labels.size()) != X.rows())
      throw std::invalid_argument("dataset: labels/inputs length mismatch");
    for (int l : labels)
      if (l < 0 || l >= C)
        throw std::invalid_argument("dataset: label " + std::to_string(l) +
                                    " outside [0, " + std::to_string(C) + ")");
  } else {
    if (Y.rows() != X.rows())
      throw std::invalid_argument("dataset: targets/inputs length mismatch");
    if (Y.cols() != C) throw std::invalid_argument("dataset: target width != C");
  }
  if (X.cols() != input.size())
    throw std::invalid_argument("dataset: input width does not match shape " + input.str());
}

Dataset gen_sine_regression(long N, std::uint64_t seed, double lo, double hi,
                            double noise_var) {
  Rng rng(seed);
  Dataset ds;
  ds.X.resize(N, 1);
  ds.Y.resize(N, 1);
  ds.input = Shape{1, 0, 0};
  ds.C = 1;
  const double sd = std::sqrt(noise_var);
  for (long i = 0; i < N; ++i) {
    double x = rng.uniform(lo, hi);
    ds.X(i, 0) = x;
    ds.Y(i, 0) = std::sin(2.0 * x) + sd * rng.normal();
  }
  std::ostringstream p;
  p << "sine(N=" << N << ",seed=" << seed << ",x=[" << lo << "," << hi
    << "],noise_var=" << noise_var << ")";
  ds.provenance = p.str();
  return ds;
}

Dataset gen_two_moons(long N, std::uint64_t seed, double noise_sd) {
  Rng rng(seed);
  Dataset ds;
  ds.X.resize(N, 2);
  ds.labels.resize(static_cast<std::size_t>(N));
  ds.input = Shape{2, 0, 0};
  ds.C = 2;
  ds.classification = true;
  const double pi = 3.14159265358979323846;
  for (long i = 0; i < N; ++i) {
    int cls = static_cast<int>(rng.index(2));
    double t = rng.uniform(0.0, pi);
    double x, y;
    if (cls == 0) {
      x = std::cos(t);
      y = std::sin(t);
    } else {
      x = 1.0 - std::cos(t);
      y = 0.5 - std::sin(t);
    }
    ds.X(i, 0) = x + noise_sd * rng.normal();
    ds.X(i, 1) = y + noise_sd * rng.normal();
    ds.labels[static_cast<std::size_t>(i)] = cls;
  }
  std::ostringstream p;
  p << "two_moons(N=" << N << ",seed=" << seed << ",noise_sd=" << noise_sd << ")";
  ds.provenance = p.str();
  return ds;
}

namespace {

// seven-segment layout on a 28x28 canvas; segments indexed A..G = 0..6
//   A: top bar, G: middle bar, D: bottom bar
//   F/B: upper left/right, E/C: lower left/right
constexpr unsigned char kDigitSegments[10] = {
    0b0111111,  // 0: A B C D E F
    0b0000110,  // 1: B C
    0b1011011,  // 2: A B G E D
    0b1001111,  // 3: A B G C D
    0b1100110,  // 4: F G B C
    0b1101101,  // 5: A F G C D
    0b1111101,  // 6: A F G E C D
    0b0000111,  // 7: A B C
    0b1111111,  // 8
    0b1101111,  // 9
};

void draw_hbar(Matrix& img, int y, int x0, int x1, double val) {
  for (int t = -1; t <= 1; ++t) {
    int yy = y + t;
    if (yy < 0 || yy >= img.rows()) continue;
    for (int x = x0; x <= x1; ++x)
      if (x >= 0 && x < img.cols()) img(yy, x) = std::max(img(yy, x), val);
  }
}

void draw_vbar(Matrix& img, int x, int y0, int y1, double val) {
  for (int t = -1; t <= 1; ++t) {
    int xx = x + t;
    if (xx < 0 || xx >= img.cols()) continue;
    for (int y = y0; y <= y1; ++y)
      if (y >= 0 && y < img.rows()) img(y, xx) = std::max(img(y, xx), val);
  }
}

}  // namespace

Dataset gen_digit_glyphs(long N, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  const int HW = 28;
  ds.X.resize(N, HW * HW);
  ds.labels.resize(static_cast<std::size_t>(N));
  ds.input = Shape{1, HW, HW};
  ds.C = 10;
  ds.classification = true;
  for (long i = 0; i < N; ++i) {
    int digit = static_cast<int>(rng.index(10));
    int dx = static_cast<int>(rng.index(9)) - 4;  // translation jitter
    int dy = static_cast<int>(rng.index(7)) - 3;
    double ink = rng.uniform(0.6, 1.0);

    // glyph box before jitter: x in [9, 19], y in [5, 23]
    int x0 = 9 + dx, x1 = 19 + dx;
    int y0 = 5 + dy, ym = 14 + dy, y1 = 23 + dy;

    Matrix img = Matrix::Zero(HW, HW);
    unsigned char segs = kDigitSegments[digit];
    for (int s = 0; s < 7; ++s) {
      if (!(segs >> s & 1)) continue;
      if (rng.uniform() < 0.05) continue;  // stroke dropout
      switch (s) {
        case 0: draw_hbar(img, y0, x0, x1, ink); break;          // A
        case 1: draw_vbar(img, x1, y0, ym, ink); break;          // B
        case 2: draw_vbar(img, x1, ym, y1, ink); break;          // C
        case 3: draw_hbar(img, y1, x0, x1, ink); break;          // D
        case 4: draw_vbar(img, x0, ym, y1, ink); break;          // E
        case 5: draw_vbar(img, x0, y0, ym, ink); break;          // F
        case 6: draw_hbar(img, ym, x0, x1, ink); break;          // G
      }
    }
    for (int y = 0; y < HW; ++y)
      for (int x = 0; x < HW; ++x) {
        double v = img(y, x) + 0.1 * rng.normal();
        ds.X(i, y * HW + x) = std::clamp(v, 0.0, 1.0);
      }
    if (rng.uniform() < 0.03) digit = static_cast<int>(rng.index(10));  // label noise
    ds.labels[static_cast<std::size_t>(i)] = digit;
  }
  std::ostringstream p;
  p << "digit_glyphs(N=" << N << ",seed=" << seed << ")";
  ds.provenance = p.str();
  return ds;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("idx: truncated file while reading " + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw std::runtime_error("idx: cannot open " + images_path);
  if (std::uint32_t magic = read_be32(imgs, "image magic"); magic != 0x00000803u)
    throw std::runtime_error("idx: bad image magic in " + images_path);
  const std::uint32_t n = read_be32(imgs, "image count");
  const std::uint32_t rows = read_be32(imgs, "rows");
  const std::uint32_t cols = read_be32(imgs, "cols");

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw std::runtime_error("idx: cannot open " + labels_path);
  if (std::uint32_t magic = read_be32(labs, "label magic"); magic != 0x00000801u)
    throw std::runtime_error("idx: bad label magic in " + labels_path);
  if (std::uint32_t nl = read_be32(labs, "label count"); nl != n)
    throw std::runtime_error("idx: image/label count mismatch");

  Dataset ds;
  ds.input = Shape{1, static_cast<int>(rows), static_cast<int>(cols)};
  ds.C = 10;
  ds.classification = true;
  ds.X.resize(n, static_cast<long>(rows) * cols);
  ds.labels.resize(n);
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < n; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!imgs) throw std::runtime_error("idx: truncated image data in " + images_path);
    for (std::size_t j = 0; j < buf.size(); ++j)
      ds.X(i, static_cast<long>(j)) = buf[j] / 255.0;  // pixels scaled to [0,1]
    char l;
    labs.read(&l, 1);
    if (!labs) throw std::runtime_error("idx: truncated label data in " + labels_path);
    ds.labels[i] = static_cast<unsigned char>(l);
  }
  ds.provenance = "idx(" + images_path + ",pixels/255)";
  ds.check();
  return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path) {
  if (!ds.classification || !ds.input.image())
    throw std::invalid_argument("idx: only image classification datasets can be saved");
  std::ofstream imgs(images_path, std::ios::binary);
  if (!imgs) throw std::runtime_error("idx: cannot write " + images_path);
  write_be32(imgs, 0x00000803u);
  write_be32(imgs, static_cast<std::uint32_t>(ds.size()));
  write_be32(imgs, static_cast<std::uint32_t>(ds.input.h));
  write_be32(imgs, static_cast<std::uint32_t>(ds.input.w));
  for (long i = 0; i < ds.size(); ++i)
    for (long j = 0; j < ds.X.cols(); ++j) {
      double v = std::clamp(ds.X(i, j), 0.0, 1.0);
      unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
      imgs.write(reinterpret_cast<const char*>(&b), 1);
    }
  std::ofstream labs(labels_path, std::ios::binary);
  if (!labs) throw std::runtime_error("idx: cannot write " + labels_path);
  write_be32(labs, 0x00000801u);
  write_be32(labs, static_cast<std::uint32_t>(ds.size()));
  for (long i = 0; i < ds.size(); ++i) {
    unsigned char b = static_cast<unsigned char>(ds.label(i));
    labs.write(reinterpret_cast<const char*>(&b), 1);
  }
}

Dataset select(const Dataset& ds, const std::vector<long>& indices) {
  Dataset out;
  out.input = ds.input;
  out.C = ds.C;
  out.classification = ds.classification;
  out.provenance = ds.provenance + "|select(" + std::to_string(indices.size()) + ")";
  out.X.resize(static_cast<long>(indices.size()), ds.X.cols());
  if (ds.classification)
    out.labels.resize(indices.size());
  else
    out.Y.resize(static_cast<long>(indices.size()), ds.Y.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    long i = indices[k];
    if (i < 0 || i >= ds.size()) throw std::out_of_range("dataset select: index out of range");
    out.X.row(static_cast<long>(k)) = ds.X.row(i);
    if (ds.classification)
      out.labels[k] = ds.label(i);
    else
      out.Y.row(static_cast<long>(k)) = ds.Y.row(i);
  }
  return out;
}

Dataset take(const Dataset& ds, long start, long count) {
  std::vector<long> idx(static_cast<std::size_t>(count));
  std::iota(idx.begin(), idx.end(), start);
  return select(ds, idx);
}

namespace {

std::vector<long> permutation(long n, std::uint64_t seed) {
  std::vector<long> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0L);
  Rng rng(seed);
  for (long i = n - 1; i > 0; --i)
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[rng.index(static_cast<std::size_t>(i) + 1)]);
  return idx;
}

}  // namespace

Dataset subsample(const Dataset& ds, long n, std::uint64_t seed) {
  if (n > ds.size()) throw std::invalid_argument("subsample: n exceeds dataset size");
  auto idx = permutation(ds.size(), seed);
  idx.resize(static_cast<std::size_t>(n));
  return select(ds, idx);
}

std::vector<Dataset> split(const Dataset& ds, const std::vector<double>& fractions,
                           std::uint64_t seed) {
  double total = std::accumulate(fractions.begin(), fractions.end(), 0.0);
  if (total > 1.0 + 1e-9) throw std::invalid_argument("split: fractions sum exceeds 1");
  auto idx = permutation(ds.size(), seed);
  std::vector<Dataset> parts;
  double cum = 0.0;
  long start = 0;
  for (double f : fractions) {
    cum += f;
    long end = std::min(ds.size(), static_cast<long>(std::llround(cum * ds.size())));
    std::vector<long> slice(idx.begin() + start, idx.begin() + end);
    parts.push_back(select(ds, slice));
    start = end;
  }
  return parts;
}

Dataset gaussian_corrupt(const Dataset& ds, double noise_sd, std::uint64_t seed) {
  Rng rng(seed);
  Dataset out = ds;
  const bool clamp = ds.input.image();
  for (long i = 0; i < out.X.rows(); ++i)
    for (long j = 0; j < out.X.cols(); ++j) {
      double v = out.X(i, j) + noise_sd * rng.normal();
      out.X(i, j) = clamp ? std::clamp(v, 0.0, 1.0) : v;
    }
  out.provenance += "|corrupt(sd=" + std::to_string(noise_sd) + ")";
  return out;
}

}  // namespace ella
