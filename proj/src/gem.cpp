#include "yieldcast/gem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace yieldcast {

namespace {

void check_matrix(const PredictionMatrix& p) {
  if (p.n == 0 || p.k == 0) {
    throw Error("prediction matrix must have n >= 1 and k >= 1");
  }
  if (p.predictions.size() != p.n * p.k || p.targets.size() != p.n) {
    throw Error("prediction matrix dimensions are inconsistent");
  }
  for (const double v : p.predictions) {
    if (!std::isfinite(v)) throw Error("non-finite model prediction");
  }
  for (const double v : p.targets) {
    if (!std::isfinite(v)) throw Error("non-finite target");
  }
}

constexpr double kImprovementTol = 1e-10;
constexpr std::int64_t kMaxIterations = 100000;

struct PgdResult {
  std::vector<double> w;
  double objective = 0.0;
  std::int64_t iterations = 0;
  bool converged = false;
};

PgdResult projected_gradient_descent(const PredictionMatrix& p,
                                     std::vector<double> w, double step) {
  PgdResult out;
  out.w = std::move(w);
  out.objective = ensemble_mse(p, out.w);
  std::vector<double> grad(p.k);
  std::vector<double> next(p.k);
  for (out.iterations = 0; out.iterations < kMaxIterations; ++out.iterations) {
    // grad = (2/n) P^T (P w - y)
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < p.n; ++i) {
      double r = -p.targets[i];
      const double* row = p.predictions.data() + i * p.k;
      for (std::size_t j = 0; j < p.k; ++j) r += row[j] * out.w[j];
      for (std::size_t j = 0; j < p.k; ++j) grad[j] += row[j] * r;
    }
    const double scale = 2.0 / static_cast<double>(p.n);
    for (std::size_t j = 0; j < p.k; ++j) {
      next[j] = out.w[j] - step * scale * grad[j];
    }
    next = project_to_simplex(std::move(next));
    const double next_objective = ensemble_mse(p, next);
    const double improvement = out.objective - next_objective;
    if (next_objective <= out.objective) {
      out.w = next;
      out.objective = next_objective;
    }
    if (improvement < kImprovementTol) {
      out.converged = true;
      ++out.iterations;
      break;
    }
  }
  return out;
}

}  // namespace

std::vector<double> project_to_simplex(std::vector<double> v) {
  const std::size_t k = v.size();
  if (k == 0) throw Error("cannot project an empty vector onto the simplex");
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double running = 0.0;
  double tau = 0.0;
  std::size_t rho = 0;
  for (std::size_t j = 0; j < k; ++j) {
    running += u[j];
    const double candidate = (1.0 - running) / static_cast<double>(j + 1);
    if (u[j] + candidate > 0.0) {
      rho = j + 1;
      tau = candidate;
    }
  }
  (void)rho;
  for (double& x : v) x = std::max(x + tau, 0.0);
  return v;
}

double ensemble_mse(const PredictionMatrix& p, std::span<const double> w) {
  if (w.size() != p.k) {
    throw Error("weight count " + std::to_string(w.size()) +
                " does not match model count " + std::to_string(p.k));
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < p.n; ++i) {
    const double* row = p.predictions.data() + i * p.k;
    double combined = 0.0;
    for (std::size_t j = 0; j < p.k; ++j) combined += w[j] * row[j];
    const double r = p.targets[i] - combined;
    ss += r * r;
  }
  return ss / static_cast<double>(p.n);
}

EnsembleWeights optimize_weights(const PredictionMatrix& p) {
  check_matrix(p);
  EnsembleWeights out;
  if (p.k == 1) {
    out.weights = {1.0};
    out.objective = ensemble_mse(p, out.weights);
    out.converged = true;
    return out;
  }

  double frobenius_sq = 0.0;
  for (const double v : p.predictions) frobenius_sq += v * v;
  if (frobenius_sq == 0.0) {
    // All-zero predictions: every simplex point is equivalent.
    out.weights.assign(p.k, 1.0 / static_cast<double>(p.k));
    out.objective = ensemble_mse(p, out.weights);
    out.converged = true;
    return out;
  }
  // Gradient Lipschitz bound 2 ||P||_F^2 / n gives the safe fixed step.
  const double step = static_cast<double>(p.n) / (2.0 * frobenius_sq);

  std::vector<double> uniform(p.k, 1.0 / static_cast<double>(p.k));
  PgdResult best = projected_gradient_descent(p, std::move(uniform), step);

  // Second start at the best vertex: monotone descent from there keeps the
  // ensemble at least as good as every single model.
  std::size_t best_vertex = 0;
  double best_vertex_mse = std::numeric_limits<double>::infinity();
  std::vector<double> vertex(p.k, 0.0);
  for (std::size_t j = 0; j < p.k; ++j) {
    std::fill(vertex.begin(), vertex.end(), 0.0);
    vertex[j] = 1.0;
    const double mse = ensemble_mse(p, vertex);
    if (mse < best_vertex_mse) {
      best_vertex_mse = mse;
      best_vertex = j;
    }
  }
  std::fill(vertex.begin(), vertex.end(), 0.0);
  vertex[best_vertex] = 1.0;
  PgdResult from_vertex = projected_gradient_descent(p, std::move(vertex), step);

  const PgdResult& winner =
      from_vertex.objective < best.objective ? from_vertex : best;
  out.weights = winner.w;
  out.objective = winner.objective;
  out.iterations = best.iterations + from_vertex.iterations;
  out.converged = best.converged && from_vertex.converged;
  return out;
}

std::vector<double> ensemble_predict(std::span<const double> weights,
                                     const PredictionMatrix& p) {
  if (weights.size() != p.k) {
    throw Error("weight count " + std::to_string(weights.size()) +
                " does not match model count " + std::to_string(p.k));
  }
  std::vector<double> out(p.n, 0.0);
  for (std::size_t i = 0; i < p.n; ++i) {
    const double* row = p.predictions.data() + i * p.k;
    double combined = 0.0;
    for (std::size_t j = 0; j < p.k; ++j) combined += weights[j] * row[j];
    out[i] = combined;
  }
  return out;
}

EnsembleWeights grid_oracle(const PredictionMatrix& p, double step) {
  check_matrix(p);
  if (p.k > 3) {
    throw Error("grid_oracle handles k <= 3, got k = " + std::to_string(p.k));
  }
  if (step <= 0.0 || step > 1.0) {
    throw Error("grid_oracle step must be in (0, 1]");
  }
  EnsembleWeights out;
  out.converged = true;
  if (p.k == 1) {
    out.weights = {1.0};
    out.objective = ensemble_mse(p, out.weights);
    return out;
  }

  const auto divisions = static_cast<std::int64_t>(std::llround(1.0 / step));
  const double unit = 1.0 / static_cast<double>(divisions);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> w(p.k, 0.0);
  std::vector<double> best_w;
  if (p.k == 2) {
    for (std::int64_t a = 0; a <= divisions; ++a) {
      w[0] = static_cast<double>(a) * unit;
      w[1] = 1.0 - w[0];
      const double mse = ensemble_mse(p, w);
      ++out.iterations;
      if (mse < best) {
        best = mse;
        best_w = w;
      }
    }
  } else {
    for (std::int64_t a = 0; a <= divisions; ++a) {
      for (std::int64_t b = 0; a + b <= divisions; ++b) {
        w[0] = static_cast<double>(a) * unit;
        w[1] = static_cast<double>(b) * unit;
        w[2] = 1.0 - w[0] - w[1];
        if (w[2] < 0.0) w[2] = 0.0;
        const double mse = ensemble_mse(p, w);
        ++out.iterations;
        if (mse < best) {
          best = mse;
          best_w = w;
        }
      }
    }
  }
  out.weights = std::move(best_w);
  out.objective = best;
  return out;
}

std::string weights_report_json(const PredictionMatrix& p,
                                const EnsembleWeights& w) {
  nlohmann::json j;
  j["models"] = p.labels;
  j["weights"] = w.weights;
  j["validation_objective"] = w.objective;
  j["solver"] = {{"iterations", w.iterations},
                 {"converged", w.converged},
                 {"method", "projected-gradient-descent"}};
  j["n"] = p.n;
  return j.dump(2) + "\n";
}

EnsembleWeights weights_from_report_json(const std::string& text,
                                         std::vector<std::string>* labels) {
  const nlohmann::json j = nlohmann::json::parse(text);
  EnsembleWeights w;
  w.weights = j.at("weights").get<std::vector<double>>();
  w.objective = j.at("validation_objective").get<double>();
  w.iterations = j.at("solver").at("iterations").get<std::int64_t>();
  w.converged = j.at("solver").at("converged").get<bool>();
  if (labels != nullptr) {
    *labels = j.at("models").get<std::vector<std::string>>();
  }
  return w;
}

}  // namespace yieldcast
