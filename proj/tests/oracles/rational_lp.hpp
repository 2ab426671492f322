#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace oracle {

using Rational = boost::multiprecision::cpp_rational;

/// Dense two-phase tableau simplex in exact rational arithmetic with Bland's rule.
/// Solves min c.x subject to A x = b, x >= 0 and returns the optimal value.
inline Rational solve_standard_lp(std::vector<std::vector<Rational>> a, std::vector<Rational> b,
                                  const std::vector<Rational>& c) {
  const std::size_t m = a.size();
  const std::size_t n = c.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (b[i] < 0) {
      for (Rational& x : a[i]) x = -x;
      b[i] = -b[i];
    }
  }
  // Columns 0..n-1 structural, n..n+m-1 artificial, last column right-hand side.
  const std::size_t width = n + m + 1;
  std::vector<std::vector<Rational>> t(m, std::vector<Rational>(width));
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) t[i][j] = a[i][j];
    t[i][n + i] = 1;
    t[i][width - 1] = b[i];
    basis[i] = n + i;
  }

  auto pivot = [&](std::size_t row, std::size_t col) {
    const Rational p = t[row][col];
    for (Rational& x : t[row]) x /= p;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i == row || t[i][col] == 0) continue;
      const Rational f = t[i][col];
      for (std::size_t j = 0; j < width; ++j) t[i][j] -= f * t[row][j];
    }
    basis[row] = col;
  };

  // Minimizes cost.x over the allowed columns from the current feasible basis.
  auto optimize = [&](const std::vector<Rational>& cost, std::size_t allowed) {
    while (true) {
      std::optional<std::size_t> entering;
      for (std::size_t j = 0; j < allowed && !entering; ++j) {
        Rational reduced = cost[j];
        for (std::size_t i = 0; i < t.size(); ++i) reduced -= cost[basis[i]] * t[i][j];
        if (reduced < 0) entering = j;
      }
      if (!entering) return;
      std::optional<std::size_t> leaving;
      Rational best;
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i][*entering] <= 0) continue;
        const Rational ratio = t[i][width - 1] / t[i][*entering];
        if (!leaving || ratio < best || (ratio == best && basis[i] < basis[*leaving])) {
          leaving = i;
          best = ratio;
        }
      }
      if (!leaving) throw std::runtime_error("unbounded LP");
      pivot(*leaving, *entering);
    }
  };

  std::vector<Rational> phase1(n + m, Rational(0));
  for (std::size_t i = 0; i < m; ++i) phase1[n + i] = 1;
  optimize(phase1, n + m);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (basis[i] >= n && t[i][width - 1] != 0) throw std::runtime_error("infeasible LP");
  }
  // Drive zero-valued artificials out of the basis; drop redundant rows.
  for (std::size_t i = 0; i < t.size();) {
    if (basis[i] < n) {
      ++i;
      continue;
    }
    std::optional<std::size_t> col;
    for (std::size_t j = 0; j < n && !col; ++j) {
      if (t[i][j] != 0) col = j;
    }
    if (col) {
      pivot(i, *col);
      ++i;
    } else {
      t.erase(t.begin() + static_cast<std::ptrdiff_t>(i));
      basis.erase(basis.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }

  std::vector<Rational> phase2(n + m, Rational(0));
  for (std::size_t j = 0; j < n; ++j) phase2[j] = c[j];
  optimize(phase2, n);
  Rational value = 0;
  for (std::size_t i = 0; i < t.size(); ++i) value += c[basis[i]] * t[i][width - 1];
  return value;
}

/// Transportation LP: variables q_ij in row-major order, row sums = src, column sums = tgt.
inline Rational transport_value(const std::vector<Rational>& src, const std::vector<Rational>& tgt,
                                const std::vector<std::vector<Rational>>& cost) {
  const std::size_t m = src.size();
  const std::size_t n = tgt.size();
  std::vector<std::vector<Rational>> a(m + n, std::vector<Rational>(m * n, Rational(0)));
  std::vector<Rational> b(m + n);
  std::vector<Rational> c(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      a[i][i * n + j] = 1;
      a[m + j][i * n + j] = 1;
      c[i * n + j] = cost[i][j];
    }
  }
  for (std::size_t i = 0; i < m; ++i) b[i] = src[i];
  for (std::size_t j = 0; j < n; ++j) b[m + j] = tgt[j];
  return solve_standard_lp(std::move(a), std::move(b), c);
}

}  // namespace oracle
