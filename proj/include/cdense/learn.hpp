#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cdense/corpus.hpp"
#include "cdense/error.hpp"
#include "cdense/features.hpp"

namespace cdense {

// squared_hinge is the differentiable L2-loss SVM surrogate max(0, 1 - z)^2.
enum class Loss { logistic, squared_hinge };

inline std::string_view to_string(Loss l) {
  return l == Loss::logistic ? "logistic" : "squared_hinge";
}

inline std::optional<Loss> loss_from_string(std::string_view s) {
  if (s == "logistic") return Loss::logistic;
  if (s == "squared_hinge") return Loss::squared_hinge;
  return std::nullopt;
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(-z)) without overflow.
inline double log1p_exp_neg(double z) {
  return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

inline double label_sign(Density d) { return d == Density::content_dense ? 1.0 : -1.0; }

inline std::vector<double> default_c_grid() {
  return {1.0 / 32, 1.0 / 8, 1.0 / 2, 2.0, 8.0, 32.0};
}

struct TrainConfig {
  std::vector<double> c_grid = default_c_grid();
  std::size_t max_iters = 1000;
  double tol = 1e-6;
  std::uint64_t seed = 1;
};

// p = sigmoid(a * margin + b)
struct PlattScaling {
  double a = 1.0;
  double b = 0.0;
};

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  SpaceKind space = SpaceKind::combined;
  Loss loss = Loss::logistic;
  double c = 1.0;
  std::optional<PlattScaling> platt;  // hinge models only

  std::size_t dim() const { return weights.size(); }

  double margin(const SparseFeatureVector& x) const {
    if (x.space != space) {
      throw SpaceMismatchError("model over " + std::string(to_string(space)) +
                               " applied to a " + std::string(to_string(x.space)) + " vector");
    }
    double m = bias;
    for (const auto& [i, v] : x.entries) {
      if (i >= weights.size()) throw SpaceMismatchError("feature index beyond model dim");
      m += weights[i] * v;
    }
    return m;
  }

  double proba_from_margin(double m) const {
    if (loss == Loss::squared_hinge) {
      PlattScaling p = platt.value_or(PlattScaling{});
      return sigmoid(p.a * m + p.b);
    }
    return sigmoid(m);
  }

  // Probability of the content-dense class.
  double predict_proba(const SparseFeatureVector& x) const { return proba_from_margin(margin(x)); }
};

// Ties (p == 0.5) go to content_dense.
inline Density decide_label(double p) {
  return p >= 0.5 ? Density::content_dense : Density::non_content_dense;
}

// ---------------------------------------------------------------------------
// Objective: 0.5 ||w||^2 + c * sum_i loss(y_i (w.x_i + b)); bias unregularized.

struct Problem {
  std::span<const SparseFeatureVector> x;
  std::span<const double> y;  // +1 / -1
  std::size_t dim = 0;
  Loss loss = Loss::logistic;
  double c = 1.0;
};

// params = [w_0 .. w_{dim-1}, b]. Fills grad (same layout) when non-null.
inline double objective(const Problem& prob, std::span<const double> params,
                        std::vector<double>* grad) {
  const std::size_t d = prob.dim;
  double reg = 0.0;
  for (std::size_t j = 0; j < d; ++j) reg += params[j] * params[j];
  double f = 0.5 * reg;
  if (grad) {
    grad->assign(d + 1, 0.0);
    for (std::size_t j = 0; j < d; ++j) (*grad)[j] = params[j];
  }
  const double b = params[d];
  for (std::size_t i = 0; i < prob.x.size(); ++i) {
    double m = b;
    for (const auto& [j, v] : prob.x[i].entries) m += params[j] * v;
    const double yi = prob.y[i];
    const double z = yi * m;
    double dz;  // d loss / d z
    if (prob.loss == Loss::logistic) {
      f += prob.c * log1p_exp_neg(z);
      dz = -sigmoid(-z);
    } else {
      double h = std::max(0.0, 1.0 - z);
      f += prob.c * h * h;
      dz = -2.0 * h;
    }
    if (grad && dz != 0.0) {
      double g = prob.c * dz * yi;
      for (const auto& [j, v] : prob.x[i].entries) (*grad)[j] += g * v;
      (*grad)[d] += g;
    }
  }
  return f;
}

struct TrainTrace {
  std::vector<double> objective;  // value after each accepted iterate (first = start)
  double final_grad_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace detail

// Limited-memory BFGS directions with an Armijo backtracking line search.
// Every accepted step strictly decreases the objective. Stops once the
// gradient 2-norm is <= tol, after max_iters, or when no decreasing step
// exists at double precision.
inline std::vector<double> minimize(const Problem& prob, const TrainConfig& cfg,
                                    TrainTrace* trace = nullptr) {
  const std::size_t n = prob.dim + 1;
  constexpr std::size_t kMemory = 10;
  constexpr double kArmijo = 1e-4;

  std::vector<double> x(n, 0.0), g, x_new(n), g_new, dir(n);
  double f = objective(prob, x, &g);
  if (trace) trace->objective.push_back(f);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::size_t iter = 0;
  bool converged = false;
  for (; iter < cfg.max_iters; ++iter) {
    double gnorm = detail::norm2(g);
    if (!std::isfinite(gnorm)) throw NumericError("non-finite gradient");
    if (gnorm <= cfg.tol) {
      converged = true;
      break;
    }
    // Two-loop recursion.
    for (std::size_t j = 0; j < n; ++j) dir[j] = -g[j];
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * detail::dot(s_hist[k], dir);
      for (std::size_t j = 0; j < n; ++j) dir[j] -= alpha[k] * y_hist[k][j];
    }
    double gamma = 1.0;
    if (!s_hist.empty()) {
      gamma = detail::dot(s_hist.back(), y_hist.back()) / detail::dot(y_hist.back(), y_hist.back());
    } else {
      gamma = 1.0 / std::max(1.0, gnorm);
    }
    for (std::size_t j = 0; j < n; ++j) dir[j] *= gamma;
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      double beta = rho_hist[k] * detail::dot(y_hist[k], dir);
      for (std::size_t j = 0; j < n; ++j) dir[j] += s_hist[k][j] * (alpha[k] - beta);
    }
    double slope = detail::dot(g, dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t j = 0; j < n; ++j) dir[j] = -g[j] / std::max(1.0, gnorm);
      slope = detail::dot(g, dir);
    }

    double step = 1.0;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t j = 0; j < n; ++j) x_new[j] = x[j] + step * dir[j];
      f_new = objective(prob, x_new, &g_new);
      if (std::isfinite(f_new) && f_new <= f + kArmijo * step * slope && f_new < f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // numerically stationary

    std::vector<double> s(n), yv(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = x_new[j] - x[j];
      yv[j] = g_new[j] - g[j];
    }
    double sy = detail::dot(s, yv);
    if (sy > 1e-12 * detail::norm2(s) * detail::norm2(yv)) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    if (trace) trace->objective.push_back(f);
  }
  if (trace) {
    trace->final_grad_norm = detail::norm2(g);
    trace->iterations = iter;
    trace->converged = converged || trace->final_grad_norm <= cfg.tol;
  }
  return x;
}

inline void check_training_data(std::span<const SparseFeatureVector> x,
                                std::span<const Density> y) {
  if (x.size() != y.size()) throw ValidationError("feature and label counts differ");
  if (x.size() < 2) throw ValidationError("need at least two training examples");
  bool pos = false, neg = false;
  for (auto l : y) (l == Density::content_dense ? pos : neg) = true;
  if (!pos || !neg) throw SingleClassError();
  for (const auto& v : x) {
    for (const auto& [i, val] : v.entries) {
      if (!std::isfinite(val)) throw NumericError("non-finite feature value");
    }
  }
}

inline LinearModel train_linear(std::span<const SparseFeatureVector> x,
                                std::span<const Density> y, std::size_t dim, Loss loss,
                                double c, const TrainConfig& cfg = {},
                                TrainTrace* trace = nullptr) {
  check_training_data(x, y);
  if (!(c > 0.0)) throw ValidationError("regularization constant must be positive");
  SpaceKind space = x.front().space;
  for (const auto& v : x) {
    if (v.space != space) throw SpaceMismatchError("training vectors from mixed spaces");
    if (!v.entries.empty() && v.entries.back().first >= dim) {
      throw SpaceMismatchError("feature index beyond declared dim");
    }
  }
  std::vector<double> ys;
  ys.reserve(y.size());
  for (auto l : y) ys.push_back(label_sign(l));
  Problem prob{x, ys, dim, loss, c};
  auto params = minimize(prob, cfg, trace);
  LinearModel m;
  m.weights.assign(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(dim));
  m.bias = params[dim];
  m.space = space;
  m.loss = loss;
  m.c = c;
  for (double w : m.weights) {
    if (!std::isfinite(w)) throw NumericError("training produced non-finite weights");
  }
  return m;
}

// Platt's sigmoid fit on decision values, following the Newton method with
// backtracking of Lin, Lin and Weng (2007). Returns p = sigmoid(a m + b).
inline PlattScaling fit_platt(std::span<const double> margins, std::span<const Density> y) {
  const std::size_t l = margins.size();
  if (l != y.size() || l == 0) throw ValidationError("platt: bad input sizes");
  double prior1 = 0, prior0 = 0;
  for (auto v : y) (v == Density::content_dense ? prior1 : prior0) += 1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(l);
  for (std::size_t i = 0; i < l; ++i) t[i] = y[i] == Density::content_dense ? hi : lo;

  // Model: P = 1 / (1 + exp(A f + B)).
  double A = 0.0, B = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto fval_at = [&](double a, double b) {
    double fv = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
      double fa = margins[i] * a + b;
      if (fa >= 0) fv += t[i] * fa + std::log1p(std::exp(-fa));
      else fv += (t[i] - 1.0) * fa + std::log1p(std::exp(fa));
    }
    return fv;
  };
  double fval = fval_at(A, B);
  constexpr double kMinStep = 1e-10, kSigma = 1e-12, kEps = 1e-5;
  for (int it = 0; it < 100; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
      double fa = margins[i] * A + B;
      double p, q;
      if (fa >= 0) {
        p = std::exp(-fa) / (1.0 + std::exp(-fa));
        q = 1.0 / (1.0 + std::exp(-fa));
      } else {
        p = 1.0 / (1.0 + std::exp(fa));
        q = std::exp(fa) / (1.0 + std::exp(fa));
      }
      double d2 = p * q;
      h11 += margins[i] * margins[i] * d2;
      h22 += d2;
      h21 += margins[i] * d2;
      double d1 = t[i] - p;
      g1 += margins[i] * d1;
      g2 += d1;
    }
    if (std::fabs(g1) < kEps && std::fabs(g2) < kEps) break;
    double det = h11 * h22 - h21 * h21;
    double dA = -(h22 * g1 - h21 * g2) / det;
    double dB = -(-h21 * g1 + h11 * g2) / det;
    double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    bool moved = false;
    while (step >= kMinStep) {
      double nA = A + step * dA, nB = B + step * dB;
      double nf = fval_at(nA, nB);
      if (nf < fval + 1e-4 * step * gd) {
        A = nA;
        B = nB;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;
  }
  return {-A, -B};
}

template <typename Model>
double accuracy(const Model& model, std::span<const SparseFeatureVector> x,
                std::span<const Density> y) {
  if (x.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < x.size(); ++i) ok += decide_label(model.predict_proba(x[i])) == y[i];
  return static_cast<double>(ok) / static_cast<double>(x.size());
}

// Trains one model per c in the grid and keeps the one with the best
// accuracy on the selection set; ties go to the smallest c. An empty
// selection set falls back to training accuracy.
inline LinearModel grid_search_linear(std::span<const SparseFeatureVector> x_train,
                                      std::span<const Density> y_train,
                                      std::span<const SparseFeatureVector> x_sel,
                                      std::span<const Density> y_sel, std::size_t dim, Loss loss,
                                      const TrainConfig& cfg) {
  if (cfg.c_grid.empty()) throw UsageError("empty c grid");
  std::vector<double> grid = cfg.c_grid;
  std::sort(grid.begin(), grid.end());
  if (grid.front() <= 0.0) throw UsageError("c grid values must be positive");
  bool use_train = x_sel.empty();
  std::optional<LinearModel> best;
  double best_acc = -1.0;
  for (double c : grid) {
    auto m = train_linear(x_train, y_train, dim, loss, c, cfg);
    double acc = use_train ? accuracy(m, x_train, y_train) : accuracy(m, x_sel, y_sel);
    if (acc > best_acc) {
      best_acc = acc;
      best = std::move(m);
    }
  }
  return *best;
}

// Grid search when no held-out set exists: each c is scored by k-fold
// cross-validated accuracy on the training data itself (folds dealt
// round-robin within each class, so the split is deterministic), then the
// winner is refit on everything. Ties go to the smallest c.
inline LinearModel grid_search_cv_linear(std::span<const SparseFeatureVector> x,
                                         std::span<const Density> y, std::size_t dim, Loss loss,
                                         const TrainConfig& cfg, std::size_t k = 5) {
  if (cfg.c_grid.empty()) throw UsageError("empty c grid");
  check_training_data(x, y);
  std::vector<double> grid = cfg.c_grid;
  std::sort(grid.begin(), grid.end());
  if (grid.front() <= 0.0) throw UsageError("c grid values must be positive");

  std::vector<std::size_t> fold(x.size());
  std::size_t seen[2] = {0, 0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto cls = static_cast<std::size_t>(y[i] == Density::content_dense);
    fold[i] = seen[cls]++ % k;
  }
  // Too few examples per class for k folds: fall back to training accuracy.
  bool usable = std::min(seen[0], seen[1]) >= k;

  double best_c = grid.front();
  double best_acc = -1.0;
  for (double c : grid) {
    double acc = 0.0;
    if (usable) {
      std::size_t ok = 0;
      for (std::size_t f = 0; f < k; ++f) {
        std::vector<SparseFeatureVector> xt;
        std::vector<Density> yt;
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (fold[i] != f) {
            xt.push_back(x[i]);
            yt.push_back(y[i]);
          }
        }
        auto m = train_linear(xt, yt, dim, loss, c, cfg);
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (fold[i] == f) ok += decide_label(m.predict_proba(x[i])) == y[i];
        }
      }
      acc = static_cast<double>(ok) / static_cast<double>(x.size());
    } else {
      acc = accuracy(train_linear(x, y, dim, loss, c, cfg), x, y);
    }
    if (acc > best_acc) {
      best_acc = acc;
      best_c = c;
    }
  }
  return train_linear(x, y, dim, loss, best_c, cfg);
}

}  // namespace cdense
