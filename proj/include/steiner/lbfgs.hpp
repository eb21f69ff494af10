#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

namespace steiner {

struct LbfgsOptions {
  int memory = 12;
  int max_iter = 5000;
  double gtol = 1e-8;  // stop when |grad|_inf <= gtol
  double ftol = 1e-13;  // ... or when the relative decrease stalls for `stall_window` steps
  int stall_window = 25;
  double armijo = 1e-4;
  int max_backtracks = 30;
};

struct LbfgsResult {
  double value = 0.0;
  double grad_inf = 0.0;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
  std::vector<double> trace;  // accepted objective values
};

// Objective: writes the gradient into its second argument, returns the value.
using Objective = std::function<double(const std::vector<double>&, std::vector<double>&)>;

// Limited-memory BFGS with Armijo backtracking. Every accepted step
// decreases the objective.
inline LbfgsResult minimize_lbfgs(const Objective& f, std::vector<double>& x, const LbfgsOptions& opt) {
  const std::size_t n = x.size();
  auto dotp = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  auto inf_norm = [](const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
  };

  LbfgsResult res;
  std::vector<double> g(n), g_new(n), d(n), x_new(n);
  double fx = f(x, g);
  res.trace.push_back(fx);
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> alpha_buf(opt.memory);

  for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
    res.grad_inf = inf_norm(g);
    if (res.grad_inf <= opt.gtol) {
      res.converged = true;
      break;
    }
    if (static_cast<int>(res.trace.size()) > opt.stall_window) {
      const double old = res.trace[res.trace.size() - 1 - opt.stall_window];
      if (old - fx <= opt.ftol * std::max(1.0, std::abs(fx))) {
        res.converged = true;
        break;
      }
    }

    // two-loop recursion
    d = g;
    const int m = static_cast<int>(s_hist.size());
    for (int k = m - 1; k >= 0; --k) {
      alpha_buf[k] = rho_hist[k] * dotp(s_hist[k], d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha_buf[k] * y_hist[k][i];
    }
    double gamma = 1.0;
    if (m > 0) gamma = dotp(s_hist.back(), y_hist.back()) / dotp(y_hist.back(), y_hist.back());
    else gamma = 1.0 / std::max(1.0, res.grad_inf);
    for (double& v : d) v *= gamma;
    for (int k = 0; k < m; ++k) {
      const double beta = rho_hist[k] * dotp(y_hist[k], d);
      for (std::size_t i = 0; i < n; ++i) d[i] += s_hist[k][i] * (alpha_buf[k] - beta);
    }
    for (double& v : d) v = -v;
    double slope = dotp(g, d);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i] / std::max(1.0, res.grad_inf);
      slope = dotp(g, d);
    }

    double step = 1.0;
    bool accepted = false;
    double f_new = fx;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * d[i];
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + opt.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (-slope <= 1e-15 * std::max(1.0, std::abs(fx))) {
        // the predicted decrease is below the resolution of the objective
        res.converged = true;
        break;
      }
      if (!s_hist.empty()) {
        // retry from steepest descent once the curvature memory is dropped
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        continue;
      }
      res.line_search_failed = true;
      break;
    }

    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = dotp(s, y);
    if (sy > 1e-12 * std::sqrt(dotp(s, s) * dotp(y, y))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    res.trace.push_back(fx);
  }
  res.value = fx;
  res.grad_inf = inf_norm(g);
  return res;
}

}  // namespace steiner
