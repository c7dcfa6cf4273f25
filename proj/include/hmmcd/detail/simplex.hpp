#pragma once

// Dense two-phase tableau simplex with Bland's rule. Intended for the small
// saddle-point programs of the finite worst-case prior solver (tens of
// variables); not a general-purpose LP code.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace hmmcd::detail {

enum class Relation { less_equal, equal, greater_equal };

struct LpConstraint {
  std::vector<double> coeffs;
  Relation rel = Relation::less_equal;
  double rhs = 0.0;
};

/// maximize objective . x subject to constraints, x >= 0.
struct LinearProgram {
  std::vector<double> objective;
  std::vector<LpConstraint> constraints;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> x;
  double value = 0.0;
};

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_((rows + 1) * (cols + 1), 0.0) {}
  double& at(std::size_t r, std::size_t c) { return a_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return a_[r * (cols_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, cols_); }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  void pivot(std::size_t pr, std::size_t pc) {
    const double p = at(pr, pc);
    for (std::size_t c = 0; c <= cols_; ++c) at(pr, c) /= p;
    at(pr, pc) = 1.0;
    for (std::size_t r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> a_;
};

inline LpSolution solve_lp(const LinearProgram& lp, double eps = 1e-12) {
  const std::size_t n = lp.objective.size();
  const std::size_t m = lp.constraints.size();

  std::vector<LpConstraint> rows = lp.constraints;
  for (auto& row : rows) {
    row.coeffs.resize(n, 0.0);
    if (row.rhs < 0.0) {
      for (double& v : row.coeffs) v = -v;
      row.rhs = -row.rhs;
      if (row.rel == Relation::less_equal) row.rel = Relation::greater_equal;
      else if (row.rel == Relation::greater_equal) row.rel = Relation::less_equal;
    }
  }

  std::size_t n_slack = 0, n_art = 0;
  for (const auto& row : rows) {
    if (row.rel != Relation::equal) ++n_slack;
    if (row.rel != Relation::less_equal) ++n_art;
  }
  const std::size_t art_begin = n + n_slack;
  const std::size_t total = art_begin + n_art;
  Tableau t(m, total);
  std::vector<std::size_t> basis(m);
  std::size_t slack = n, art = art_begin;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) t.at(i, j) = rows[i].coeffs[j];
    t.rhs(i) = rows[i].rhs;
    switch (rows[i].rel) {
      case Relation::less_equal:
        t.at(i, slack) = 1.0;
        basis[i] = slack++;
        break;
      case Relation::greater_equal:
        t.at(i, slack++) = -1.0;
        t.at(i, art) = 1.0;
        basis[i] = art++;
        break;
      case Relation::equal:
        t.at(i, art) = 1.0;
        basis[i] = art++;
        break;
    }
  }

  // Objective row holds reduced costs (negative entries improve a maximization).
  auto run = [&](std::size_t allowed_cols) -> LpStatus {
    for (int iter = 0; iter < 100000; ++iter) {
      std::size_t enter = total;
      for (std::size_t j = 0; j < allowed_cols; ++j) {
        if (t.at(m, j) < -eps) {
          enter = j;
          break;
        }
      }
      if (enter == total) return LpStatus::optimal;
      std::size_t leave = m;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) {
        const double a = t.at(i, enter);
        if (a <= eps) continue;
        const double ratio = t.rhs(i) / a;
        if (ratio < best - 1e-15 || (std::abs(ratio - best) <= 1e-15 && leave < m && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave == m) return LpStatus::unbounded;
      t.pivot(leave, enter);
      basis[leave] = enter;
    }
    return LpStatus::iteration_limit;
  };

  LpSolution sol;
  if (n_art > 0) {
    // Phase 1: maximize -sum(artificials).
    for (std::size_t j = art_begin; j < total; ++j) t.at(m, j) = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (basis[i] < art_begin) continue;
      for (std::size_t c = 0; c <= total; ++c) t.at(m, c) -= t.at(i, c);
    }
    const LpStatus s1 = run(total);
    if (s1 == LpStatus::iteration_limit) {
      sol.status = s1;
      return sol;
    }
    if (t.rhs(m) < -1e-9) {
      sol.status = LpStatus::infeasible;
      return sol;
    }
    // Drive zero-level artificials out of the basis where possible.
    for (std::size_t i = 0; i < m; ++i) {
      if (basis[i] < art_begin) continue;
      for (std::size_t j = 0; j < art_begin; ++j) {
        if (std::abs(t.at(i, j)) > 1e-9) {
          t.pivot(i, j);
          basis[i] = j;
          break;
        }
      }
    }
  }

  // Phase 2.
  for (std::size_t c = 0; c <= total; ++c) t.at(m, c) = 0.0;
  for (std::size_t j = 0; j < n; ++j) t.at(m, j) = -lp.objective[j];
  for (std::size_t i = 0; i < m; ++i) {
    const double f = t.at(m, basis[i]);
    if (f == 0.0) continue;
    for (std::size_t c = 0; c <= total; ++c) t.at(m, c) -= f * t.at(i, c);
  }
  const LpStatus s2 = run(art_begin);
  sol.status = s2;
  if (s2 != LpStatus::optimal) return sol;
  sol.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) sol.x[basis[i]] = t.rhs(i);
  sol.value = 0.0;
  for (std::size_t j = 0; j < n; ++j) sol.value += lp.objective[j] * sol.x[j];
  return sol;
}

}  // namespace hmmcd::detail
