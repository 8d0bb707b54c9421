#include "yieldcast/util.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

namespace yieldcast {

std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  if (bound == 0) throw Error("uniform_index: bound must be positive");
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

double uniform_real(Rng& rng, double lo, double hi) {
  // 53 random mantissa bits -> [0, 1)
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

double normal(Rng& rng, double mean, double sd) {
  double u1 = uniform_real(rng, 0.0, 1.0);
  while (u1 <= 0.0) u1 = uniform_real(rng, 0.0, 1.0);
  const double u2 = uniform_real(rng, 0.0, 1.0);
  const double z = std::sqrt(-2.0 * std::log(u1)) *
                   std::cos(2.0 * std::numbers::pi * u2);
  return mean + sd * z;
}

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  shuffle_in_place(p, rng);
  return p;
}

std::vector<std::size_t> non_identity_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p = random_permutation(n, rng);
  if (n < 2) return p;
  auto is_identity = [&p] {
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] != i) return false;
    return true;
  };
  while (is_identity()) p = random_permutation(n, rng);
  return p;
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s, std::uint64_t seed) {
  return fnv1a64(s.data(), s.size(), seed);
}

int thread_cap() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("YIELDCAST_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1 && cap < hw) hw = cap;
  }
  return hw;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int workers = std::min<std::size_t>(thread_cap(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = static_cast<std::size_t>(w); i < n;
           i += static_cast<std::size_t>(workers)) {
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

std::string format_double(double v) {
  // Shortest representation that parses back to the same bits.
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, end);
}

void atomic_write_file(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool file_exists(const std::string& path) {
  return std::filesystem::exists(path);
}

}  // namespace yieldcast
