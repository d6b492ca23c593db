#include "oqm/resonance_cache.hpp"

#include <array>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace oqm::spectral {
namespace {

constexpr std::array<char, 4> kMagic = {'O', 'Q', 'M', 'R'};

std::string shortest(double x) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf.data(), end);
}

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("resonance record truncated");
  return v;
}

void put_matrix(std::ostream& os, const ComplexMatrix& m) {
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(Complex)));
}

ComplexMatrix get_matrix(std::istream& is, int n) {
  ComplexMatrix m(n, n);
  is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(Complex)));
  if (!is) throw std::runtime_error("resonance record truncated");
  return m;
}

}  // namespace

std::string cache_key(HilbertDim n, const std::optional<OpeningSpec>& opening, ProjectionOrder order) {
  std::string variant = "closed";
  double q0 = 0.0, dq = 0.0;
  if (opening) {
    variant = to_string(opening->variant);
    q0 = opening->q0;
    dq = opening->delta_q;
  }
  return "cat-N" + std::to_string(n.value()) + "-" + variant + "-q0" + shortest(q0) + "-dq" + shortest(dq) + "-" +
         to_string(order);
}

void write_resonances(std::ostream& os, const std::string& key, const ResonanceSet& res) {
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kCacheFormatVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(key.size()));
  os.write(key.data(), static_cast<std::streamsize>(key.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(res.size()));
  const std::uint8_t flags = (res.has_vectors() ? 1 : 0) | (res.orthonormal ? 2 : 0);
  put<std::uint8_t>(os, flags);
  os.write(reinterpret_cast<const char*>(res.eigenvalues.data()),
           static_cast<std::streamsize>(res.eigenvalues.size() * sizeof(Complex)));
  if (res.has_vectors()) {
    put_matrix(os, res.right);
    put_matrix(os, res.left);
  }
}

ResonanceSet read_resonances(std::istream& is, const std::string& expected_key) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw std::runtime_error("not a resonance record (bad magic)");
  const auto version = get<std::uint32_t>(is);
  if (version != kCacheFormatVersion) {
    throw std::runtime_error("unsupported resonance record version " + std::to_string(version));
  }
  const auto key_len = get<std::uint32_t>(is);
  if (key_len > 4096) throw std::runtime_error("resonance record key too long");
  std::string key(key_len, '\0');
  is.read(key.data(), key_len);
  if (!is) throw std::runtime_error("resonance record truncated");
  if (!expected_key.empty() && key != expected_key) {
    throw std::runtime_error("resonance record key '" + key + "' does not match '" + expected_key + "'");
  }
  const auto n = static_cast<int>(get<std::uint32_t>(is));
  const auto flags = get<std::uint8_t>(is);

  ResonanceSet res;
  res.dim = HilbertDim(n);
  res.eigenvalues.resize(n);
  is.read(reinterpret_cast<char*>(res.eigenvalues.data()), static_cast<std::streamsize>(n * sizeof(Complex)));
  if (!is) throw std::runtime_error("resonance record truncated");
  if (flags & 1) {
    res.right = get_matrix(is, n);
    res.left = get_matrix(is, n);
  }
  res.orthonormal = (flags & 2) != 0;
  index_resonances(res);
  return res;
}

ResonanceCache::ResonanceCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ResonanceCache::default_dir() {
  if (const char* env = std::getenv("OQM_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  return ".oqm-cache";
}

std::filesystem::path ResonanceCache::path_for(const std::string& key) const { return dir_ / (key + ".res"); }

std::optional<ResonanceSet> ResonanceCache::load(const std::string& key) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  return read_resonances(in, key);
}

void ResonanceCache::store(const std::string& key, const ResonanceSet& res) const {
  std::filesystem::create_directories(dir_);
  const auto final_path = path_for(key);
  auto tmp = final_path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cache file " + tmp.string());
    write_resonances(out, key, res);
    out.flush();
    if (!out) throw std::runtime_error("failed writing cache file " + tmp.string());
  }
  std::filesystem::rename(tmp, final_path);
}

std::mutex& ResonanceCache::key_mutex(const std::string& key) {
  std::lock_guard<std::mutex> lock(table_mutex_);
  auto& slot = key_mutexes_[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

ResonanceSet ResonanceCache::get_or_compute(const std::string& key, bool need_vectors,
                                            const std::function<ResonanceSet()>& compute, bool* computed) {
  std::lock_guard<std::mutex> lock(key_mutex(key));
  if (auto cached = load(key); cached && (!need_vectors || cached->has_vectors())) {
    if (computed) *computed = false;
    return std::move(*cached);
  }
  ResonanceSet res = compute();
  store(key, res);
  if (computed) *computed = true;
  return res;
}

}  // namespace oqm::spectral
