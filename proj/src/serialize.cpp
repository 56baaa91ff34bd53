#include "ella/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ella {

namespace {

constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void byteswap_doubles(std::vector<unsigned char>& bytes) {
  for (std::size_t i = 0; i + 8 <= bytes.size(); i += 8)
    for (std::size_t j = 0; j < 4; ++j) std::swap(bytes[i + j], bytes[i + 7 - j]);
}

std::vector<unsigned char> doubles_to_le(const std::vector<double>& v) {
  std::vector<unsigned char> bytes(v.size() * 8);
  if (!v.empty()) std::memcpy(bytes.data(), v.data(), bytes.size());
  if constexpr (std::endian::native == std::endian::big) byteswap_doubles(bytes);
  return bytes;
}

std::vector<double> le_to_doubles(std::vector<unsigned char> bytes) {
  if constexpr (std::endian::native == std::endian::big) byteswap_doubles(bytes);
  std::vector<double> v(bytes.size() / 8);
  if (!v.empty()) std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

std::vector<double> matrix_rowmajor(const Matrix& m) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()) * static_cast<std::size_t>(m.cols()));
  std::size_t k = 0;
  for (long r = 0; r < m.rows(); ++r)
    for (long c = 0; c < m.cols(); ++c) out[k++] = m(r, c);
  return out;
}

Matrix rowmajor_matrix(const double* data, long rows, long cols) {
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = data[k++];
  return m;
}

long header_long(const nlohmann::json& h, const char* key) {
  if (!h.contains(key) || !h[key].is_number_integer())
    throw std::runtime_error(std::string("header is missing integer field '") + key + "'");
  return h[key].get<long>();
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

std::string hex_u64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::uint64_t file_fnv1a(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint64_t h = kFnvOffset;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  return h;
}

std::string arch_fingerprint(const Arch& a) {
  std::string s = arch_to_json(a).dump();
  return hex_u64(fnv1a(s.data(), s.size()));
}

void write_doubles_blob(const std::string& path, nlohmann::json header,
                        const std::vector<double>& payload) {
  std::vector<unsigned char> bytes = doubles_to_le(payload);
  header["count"] = payload.size();
  header["payload_fnv1a"] = hex_u64(fnv1a(bytes.data(), bytes.size()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

DoublesBlob read_doubles_blob(const std::string& path, const std::string& expect_format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + " has no header line");
  DoublesBlob blob;
  try {
    blob.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + " header is not valid JSON: " + e.what());
  }
  if (!blob.header.contains("format") || blob.header["format"] != expect_format)
    throw std::runtime_error(path + " is not a " + expect_format + " file");
  if (header_long(blob.header, "version") != 1)
    throw std::runtime_error(path + " has an unsupported version");
  long count = header_long(blob.header, "count");
  if (count < 0) throw std::runtime_error(path + " has a negative payload count");
  std::vector<unsigned char> bytes(static_cast<std::size_t>(count) * 8);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size())
    throw std::runtime_error(path + " payload is truncated");
  char extra;
  if (in.read(&extra, 1)) throw std::runtime_error(path + " has trailing bytes after the payload");
  std::string want = blob.header.value("payload_fnv1a", std::string());
  if (hex_u64(fnv1a(bytes.data(), bytes.size())) != want)
    throw std::runtime_error(path + " payload checksum mismatch");
  blob.payload = le_to_doubles(std::move(bytes));
  return blob;
}

void save_checkpoint(const std::string& path, const FlatParams& p) {
  if (p.values.size() != p.arch.param_count())
    throw std::invalid_argument("parameter vector length does not match the architecture");
  nlohmann::json header{{"format", "ella.checkpoint"},
                        {"version", 1},
                        {"arch", arch_to_json(p.arch)}};
  std::vector<double> payload(p.values.data(), p.values.data() + p.values.size());
  write_doubles_blob(path, std::move(header), payload);
}

FlatParams load_checkpoint(const std::string& path) {
  DoublesBlob blob = read_doubles_blob(path, "ella.checkpoint");
  FlatParams p;
  p.arch = arch_from_json(blob.header.at("arch"));
  if (static_cast<long>(blob.payload.size()) != p.arch.param_count())
    throw std::runtime_error(path + " parameter count does not match its architecture");
  p.values = Eigen::Map<const Vector>(blob.payload.data(),
                                      static_cast<long>(blob.payload.size()));
  return p;
}

void save_sketch(const std::string& path, const NystromSketch& s, const std::string& arch_hash) {
  nlohmann::json header{{"format", "ella.sketch"},
                        {"version", 1},
                        {"M", s.M},
                        {"K", s.K},
                        {"requested_K", s.requested_K},
                        {"seed", s.seed},
                        {"arch_fnv1a", arch_hash},
                        {"eigenvalues", std::vector<double>(s.eigenvalues.data(),
                                                            s.eigenvalues.data() + s.eigenvalues.size())}};
  write_doubles_blob(path, std::move(header), matrix_rowmajor(s.V));
}

SketchFile load_sketch(const std::string& path) {
  DoublesBlob blob = read_doubles_blob(path, "ella.sketch");
  SketchFile f;
  f.arch_hash = blob.header.value("arch_fnv1a", std::string());
  NystromSketch& s = f.sketch;
  s.M = header_long(blob.header, "M");
  s.K = header_long(blob.header, "K");
  s.requested_K = header_long(blob.header, "requested_K");
  s.seed = blob.header.value("seed", std::uint64_t{0});
  std::vector<double> ev = blob.header.at("eigenvalues").get<std::vector<double>>();
  if (static_cast<long>(ev.size()) != s.K)
    throw std::runtime_error(path + " eigenvalue count does not match K");
  s.eigenvalues = Eigen::Map<const Vector>(ev.data(), static_cast<long>(ev.size()));
  if (s.K <= 0 || blob.payload.size() % static_cast<std::size_t>(s.K) != 0)
    throw std::runtime_error(path + " payload size is not divisible by K");
  long P = static_cast<long>(blob.payload.size()) / s.K;
  s.V = rowmajor_matrix(blob.payload.data(), s.K, P);
  return f;
}

void save_posterior(const std::string& path, const EllaPosterior& post,
                    const std::string& arch_hash) {
  const NystromSketch& s = post.sketch;
  nlohmann::json header{{"format", "ella.posterior"},
                        {"version", 1},
                        {"K", s.K},
                        {"M", s.M},
                        {"requested_K", s.requested_K},
                        {"sketch_seed", s.seed},
                        {"sigma0_sq", post.sigma0_sq},
                        {"arch_fnv1a", arch_hash},
                        {"fit_log", post.fit_log},
                        {"selected", post.selected},
                        {"items_seen", post.items_seen},
                        {"eigenvalues", std::vector<double>(s.eigenvalues.data(),
                                                            s.eigenvalues.data() + s.eigenvalues.size())}};
  std::vector<double> payload = matrix_rowmajor(s.V);
  std::vector<double> chol = matrix_rowmajor(post.G_chol);
  payload.insert(payload.end(), chol.begin(), chol.end());
  write_doubles_blob(path, std::move(header), payload);
}

PosteriorFile load_posterior(const std::string& path) {
  DoublesBlob blob = read_doubles_blob(path, "ella.posterior");
  PosteriorFile f;
  f.arch_hash = blob.header.value("arch_fnv1a", std::string());
  EllaPosterior& post = f.post;
  NystromSketch& s = post.sketch;
  s.K = header_long(blob.header, "K");
  s.M = header_long(blob.header, "M");
  s.requested_K = header_long(blob.header, "requested_K");
  s.seed = blob.header.value("sketch_seed", std::uint64_t{0});
  post.sigma0_sq = blob.header.at("sigma0_sq").get<double>();
  post.fit_log = blob.header.value("fit_log", std::vector<double>{});
  post.selected = header_long(blob.header, "selected");
  post.items_seen = header_long(blob.header, "items_seen");
  std::vector<double> ev = blob.header.at("eigenvalues").get<std::vector<double>>();
  if (static_cast<long>(ev.size()) != s.K)
    throw std::runtime_error(path + " eigenvalue count does not match K");
  s.eigenvalues = Eigen::Map<const Vector>(ev.data(), static_cast<long>(ev.size()));
  std::size_t chol_n = static_cast<std::size_t>(s.K) * static_cast<std::size_t>(s.K);
  if (s.K <= 0 || blob.payload.size() < chol_n ||
      (blob.payload.size() - chol_n) % static_cast<std::size_t>(s.K) != 0)
    throw std::runtime_error(path + " payload size does not match K");
  long P = static_cast<long>((blob.payload.size() - chol_n) / static_cast<std::size_t>(s.K));
  s.V = rowmajor_matrix(blob.payload.data(), s.K, P);
  post.G_chol = rowmajor_matrix(blob.payload.data() + s.K * P, s.K, s.K);
  return f;
}

}  // namespace ella
