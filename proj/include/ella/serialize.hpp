#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ella/arch.hpp"
#include "ella/posterior.hpp"

namespace ella {

// All artifact files share one container: a single-line JSON header, a
// newline, then the payload as raw little-endian IEEE-754 doubles. The header
// carries a count and an FNV-1a hash of the payload bytes, so files are
// self-validating and byte-identical across reruns (no timestamps).

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = kFnvOffset);
std::string hex_u64(std::uint64_t v);
std::uint64_t file_fnv1a(const std::string& path);

// hash of the canonical (key-sorted) JSON encoding of the architecture
std::string arch_fingerprint(const Arch& a);

void write_doubles_blob(const std::string& path, nlohmann::json header,
                        const std::vector<double>& payload);

struct DoublesBlob {
  nlohmann::json header;
  std::vector<double> payload;
};

DoublesBlob read_doubles_blob(const std::string& path, const std::string& expect_format);

void save_checkpoint(const std::string& path, const FlatParams& p);
FlatParams load_checkpoint(const std::string& path);

struct SketchFile {
  NystromSketch sketch;  // U is not persisted and comes back empty
  std::string arch_hash;
};

void save_sketch(const std::string& path, const NystromSketch& s, const std::string& arch_hash);
SketchFile load_sketch(const std::string& path);

struct PosteriorFile {
  EllaPosterior post;
  std::string arch_hash;
};

void save_posterior(const std::string& path, const EllaPosterior& post,
                    const std::string& arch_hash);
PosteriorFile load_posterior(const std::string& path);

}  // namespace ella
