#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace yieldcast {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// All stochastic code in the library draws from this generator through the
// helpers below, so a seed pins every result produced by the same binary.
using Rng = std::mt19937_64;

// Uniform integer in [0, bound), rejection-sampled.
std::uint64_t uniform_index(Rng& rng, std::uint64_t bound);

// Uniform real in [lo, hi).
double uniform_real(Rng& rng, double lo, double hi);

// Standard normal scaled to (mean, sd), Box-Muller.
double normal(Rng& rng, double mean, double sd);

// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng);

// As above, but the identity permutation is resampled for n > 1.
std::vector<std::size_t> non_identity_permutation(std::size_t n, Rng& rng);

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const std::string& s,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

// Worker count for embarrassingly parallel loops: hardware concurrency,
// capped by the YIELDCAST_THREADS environment variable when set.
int thread_cap();

// Runs fn(i) for i in [0, n). Tasks must be independent; results must not
// depend on scheduling. Falls back to a serial loop when thread_cap() == 1.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Shortest decimal form that round-trips a double exactly.
std::string format_double(double v);

// Writes via a temp file in the same directory, then renames into place.
void atomic_write_file(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);
bool file_exists(const std::string& path);

}  // namespace yieldcast
