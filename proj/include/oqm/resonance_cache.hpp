// resonance_cache.hpp
//
// On-disk cache of decompositions, one file per (N, opening, order).
//
// Record layout (little-endian, host doubles):
//   bytes 0..7   magic "OQMR" followed by uint32 format version (1)
//   uint32       key length L, then L bytes of key text
//   uint32       N
//   uint8        flags: bit 0 = vectors present, bit 1 = orthonormal basis
//   N x 2 f64    eigenvalues (re, im)
//   N*N x 2 f64  right vectors, column-major        (if bit 0)
//   N*N x 2 f64  left vectors, column-major         (if bit 0)
// Decay rates and ordering are recomputed on load.

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "oqm/spectral.hpp"

namespace oqm::spectral {

inline constexpr std::uint32_t kCacheFormatVersion = 1;

/// "cat-N{N}-{variant}-q0{q0}-dq{dq}-{PM|MP}"; the closed map uses variant
/// "closed" with q0 = dq = 0.
std::string cache_key(HilbertDim n, const std::optional<OpeningSpec>& opening,
                      ProjectionOrder order = ProjectionOrder::kPM);

void write_resonances(std::ostream& os, const std::string& key, const ResonanceSet& res);
/// Throws std::runtime_error on a bad header, truncated data or key mismatch
/// (when expected_key is non-empty).
ResonanceSet read_resonances(std::istream& is, const std::string& expected_key = {});

class ResonanceCache {
 public:
  explicit ResonanceCache(std::filesystem::path dir);

  /// $OQM_CACHE_DIR if set, else ".oqm-cache" in the working directory.
  static std::filesystem::path default_dir();

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path_for(const std::string& key) const;

  std::optional<ResonanceSet> load(const std::string& key) const;
  /// Atomic: written to a temporary file and renamed into place.
  void store(const std::string& key, const ResonanceSet& res) const;

  /// Cached set if it has what is needed, else compute() and store. Writes
  /// for the same key are serialized. `computed` reports which path ran.
  ResonanceSet get_or_compute(const std::string& key, bool need_vectors,
                              const std::function<ResonanceSet()>& compute, bool* computed = nullptr);

 private:
  std::mutex& key_mutex(const std::string& key);

  std::filesystem::path dir_;
  std::mutex table_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> key_mutexes_;
};

}  // namespace oqm::spectral
