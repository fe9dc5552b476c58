#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

namespace test_support {

// --- quadrature oracle -------------------------------------------------
// Tanh-sinh (double exponential) integration on [a, b]. Handles integrable
// endpoint singularities (t^-1/2 and the like), which the incomplete gamma /
// beta integrands have for shape parameters below one. Used as an
// implementation-independent oracle for the distribution tail functions.
inline double integrate_de(const std::function<double(double)>& f, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  const double pi_half = 1.5707963267948966;
  double previous = 0.0;
  for (int level = 2; level <= 12; ++level) {
    const double h = 1.0 / static_cast<double>(1 << level);
    double sum = 0.0;
    // |kh| up to ~6.1 puts the transformed nodes within ~1e-280 of the ends
    const long long kmax = static_cast<long long>(6.1 / h);
    for (long long k = -kmax; k <= kmax; ++k) {
      const double t = static_cast<double>(k) * h;
      const double s = pi_half * std::sinh(t);
      const double c = std::cosh(s);
      const double w = pi_half * std::cosh(t) / (c * c);  // weight
      if (!std::isfinite(w) || w < 1e-300) continue;
      // place the node by its distance from the nearer endpoint, computed
      // cancellation-free (1 - tanh|s| = 2 / (exp(2|s|) + 1)); `mid + half *
      // tanh(s)` would round onto the endpoints and lose the singular mass
      const double edge = half * (2.0 / (std::exp(2.0 * std::abs(s)) + 1.0));
      const double node = k < 0 ? a + edge : (k > 0 ? b - edge : mid);
      if (node <= a || node >= b) continue;
      const double value = f(node);
      if (std::isfinite(value)) sum += w * value;
    }
    const double integral = sum * h * half;
    if (level > 4 && std::abs(integral - previous) <= 1e-13 * (1.0 + std::abs(integral))) {
      return integral;
    }
    previous = integral;
  }
  return previous;
}

// Regularized lower incomplete gamma P(a, x) by direct integration.
inline double oracle_lower_gamma(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double ln_norm = std::lgamma(a);
  auto f = [&](double t) {
    if (t <= 0.0) return 0.0;
    return std::exp((a - 1.0) * std::log(t) - t - ln_norm);
  };
  return integrate_de(f, 0.0, x);
}

// Regularized incomplete beta I_x(a, b) by direct integration.
inline double oracle_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_norm = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  auto f = [&](double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return std::exp((a - 1.0) * std::log(t) + (b - 1.0) * std::log1p(-t) - ln_norm);
  };
  return integrate_de(f, 0.0, x);
}

// Upper-tail F p-value through the beta identity, fed by the oracle beta.
inline double oracle_f_upper_tail(double f, double d1, double d2) {
  if (f <= 0.0) return 1.0;
  return oracle_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

inline double oracle_chi2_upper_tail(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return 1.0 - oracle_lower_gamma(dof / 2.0, x / 2.0);
}

// --- exact Shapley values ----------------------------------------------
// Subset-enumeration Shapley values for m <= ~20 players:
//   phi_i = sum_{S not containing i} |S|! (m-|S|-1)! / m! * (v(S+i) - v(S))
inline std::vector<double> exact_shapley(
    std::size_t m, const std::function<double(const std::vector<bool>&)>& value) {
  std::vector<double> factorial(m + 1, 1.0);
  for (std::size_t k = 1; k <= m; ++k) factorial[k] = factorial[k - 1] * static_cast<double>(k);
  std::vector<double> phi(m, 0.0);
  const std::uint64_t total = std::uint64_t{1} << m;
  std::vector<bool> with(m), without(m);
  for (std::uint64_t bits = 0; bits < total; ++bits) {
    std::size_t size = 0;
    for (std::size_t j = 0; j < m; ++j) {
      bool present = (bits >> j) & 1ull;
      without[j] = present;
      if (present) ++size;
    }
    if (size == m) continue;
    const double v_without = value(without);
    const double scale = factorial[size] * factorial[m - size - 1] / factorial[m];
    for (std::size_t i = 0; i < m; ++i) {
      if ((bits >> i) & 1ull) continue;
      with = without;
      with[i] = true;
      phi[i] += scale * (value(with) - v_without);
    }
  }
  return phi;
}

// --- planted dataset ----------------------------------------------------
// CSV with known structure: x2 tracks x1, y is a linear readout of both, z
// is pure large-scale noise, d is a bijection of c1, and cust_id is id-like.
inline std::string planted_csv(std::size_t n_rows, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const char* labels[3] = {"alpha", "beta", "gamma"};
  const char* mapped[3] = {"east", "west", "north"};
  std::ostringstream out;
  out << "x1,x2,y,z,c1,d,cust_id\n";
  out.setf(std::ios::fixed);
  out.precision(6);
  for (std::size_t i = 0; i < n_rows; ++i) {
    double x1 = 10.0 * unif(rng);
    double x2 = x1 + 0.05 * normal(rng);
    double y = 3.0 * x1 - 2.0 * x2 + 0.1 * normal(rng);
    double z = 50.0 * normal(rng);
    std::size_t c = i % 3;
    out << x1 << ',' << x2 << ',' << y << ',' << z << ',' << labels[c] << ',' << mapped[c] << ','
        << (i + 1) << '\n';
  }
  return out.str();
}

// --- chat-completions stub ----------------------------------------------
// Minimal OpenAI-compatible server for gateway tests. The handler receives
// the prompt text and returns (status, completion-or-error-body).
class StubServer {
 public:
  using Handler = std::function<std::pair<int, std::string>(const std::string& prompt)>;

  explicit StubServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      requests_seen_.fetch_add(1);
      std::string prompt;
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_object() && body.contains("messages") && body["messages"].is_array() &&
          !body["messages"].empty()) {
        prompt = body["messages"][0].value("content", std::string{});
      }
      auto [status, text] = handler_(prompt);
      res.status = status;
      if (status == 200) {
        res.set_content(text, "application/json");
      } else {
        res.set_content("{\"error\":\"stub failure\"}", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  std::uint64_t requests_seen() const { return requests_seen_.load(); }

  // canned success body echoing `text` as the completion
  static std::string completion(const std::string& text) {
    std::string escaped;
    for (char c : text) {
      switch (c) {
        case '"': escaped += "\\\""; break;
        case '\\': escaped += "\\\\"; break;
        case '\n': escaped += "\\n"; break;
        case '\r': escaped += "\\r"; break;
        case '\t': escaped += "\\t"; break;
        default: escaped += c;
      }
    }
    return "{\"choices\":[{\"message\":{\"role\":\"assistant\",\"content\":\"" + escaped +
           "\"}}]}";
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  Handler handler_;
  int port_ = 0;
  std::atomic<std::uint64_t> requests_seen_{0};
};

}  // namespace test_support
