#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace explanova {

class ExplanovaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stable 64-bit FNV-1a digest, used for content hashes and config digests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Derives an independent seed from (base, tag, index) so that concurrent
// stages never share an RNG stream.
std::uint64_t mix_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0);

// mt19937_64 with hand-rolled draw helpers; std:: distributions are
// implementation-defined and would break run-to-run reproducibility across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  // Standard Gaussian via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed);
// k distinct indices from [0, n), returned sorted ascending.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::uint64_t seed);

// Runs fn(0..n-1) on up to `workers` threads. Tasks must only write state
// they own (slot outputs); the first exception is rethrown after join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

// Process-wide instrumentation, used by cache tests to verify that a cache
// hit performs no recomputation.
struct Counters {
  std::atomic<std::uint64_t> model_fits{0};
  std::atomic<std::uint64_t> pair_metrics{0};
  std::atomic<std::uint64_t> shap_explanations{0};
  std::atomic<std::uint64_t> llm_calls{0};
  void reset();
};
Counters& counters();

// Solves the square system A x = b (A row-major, n*n with n = b.size()) by
// LU decomposition with partial pivoting. Throws on a singular matrix.
std::vector<double> solve_linear_system(std::vector<double> a, std::vector<double> b);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool contains_ci(std::string_view hay, std::string_view needle);

// Fixed-point formatting ("%.4f" style) for report rendering.
std::string fmt_fixed(double v, int decimals = 4);
// Shortest clean rendering for config echoes (0.3 -> "0.3").
std::string fmt_compact(double v);

// Strict full-string numeric parse; rejects nan/inf tokens.
std::optional<double> parse_double(std::string_view s);
bool is_integer_value(double v);

// DD-MM-YYYY or YYYY-MM-DD to days since 1970-01-01.
std::optional<double> parse_date_ordinal(std::string_view s);

std::string now_timestamp();

}  // namespace explanova
