#include "phel/observables.hpp"

#include <cmath>

#include "phel/parallel.hpp"

namespace phel {

std::vector<double> density(const SpinorField2B& field) {
  std::vector<double> rho(field.cells(), 0.0);
  for (const auto& plane : field.comp) {
    const cplx* p = plane.data();
    for (std::size_t k = 0; k < rho.size(); ++k) rho[k] += std::norm(p[k]);
  }
  return rho;
}

namespace {

double cell_rho(const SpinorField2B& field, std::size_t k) {
  return std::norm(field.comp[0][k]) + std::norm(field.comp[1][k]) +
         std::norm(field.comp[2][k]) + std::norm(field.comp[3][k]);
}

struct RowParts {
  double right = 0.0; // j < i
  double left = 0.0;  // j > i
  double diag = 0.0;
  double edge = 0.0;
};

// One sweep per row collecting every partial sum; rows go through the fixed
// pairwise tree, so results do not depend on the thread count. total_norm is
// defined as the sum of the partition pieces, which makes
// total == right + left + diag hold bit-exactly.
struct NormBreakdown {
  double right = 0.0;
  double left = 0.0;
  double diag = 0.0;
  double edge = 0.0;
  double total() const { return right + left + diag; }
};

NormBreakdown norm_breakdown(const SpinorField2B& field, unsigned threads) {
  const int n = field.grid.n;
  std::vector<RowParts> rows(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RowParts parts;
      const std::size_t base = i * static_cast<std::size_t>(n);
      const bool row_edge = i < 2 || i >= static_cast<std::size_t>(n) - 2;
      for (int j = 0; j < n; ++j) {
        const double r = cell_rho(field, base + j);
        if (j < static_cast<int>(i))
          parts.right += r;
        else if (j > static_cast<int>(i))
          parts.left += r;
        else
          parts.diag += r;
        if (row_edge || j < 2 || j >= n - 2) parts.edge += r;
      }
      rows[i] = parts;
    }
  });
  std::vector<double> right(rows.size()), left(rows.size()), diag(rows.size()),
      edge(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    right[i] = rows[i].right;
    left[i] = rows[i].left;
    diag[i] = rows[i].diag;
    edge[i] = rows[i].edge;
  }
  const double dz2 = field.grid.dz * field.grid.dz;
  NormBreakdown out;
  out.right = dz2 * pairwise_sum(right);
  out.left = dz2 * pairwise_sum(left);
  out.diag = dz2 * pairwise_sum(diag);
  out.edge = dz2 * pairwise_sum(edge);
  return out;
}

} // namespace

double total_norm(const SpinorField2B& field, unsigned threads) {
  return norm_breakdown(field, threads).total();
}

SideNorms side_norms(const SpinorField2B& field, unsigned threads) {
  const NormBreakdown b = norm_breakdown(field, threads);
  return SideNorms{b.right, b.left, b.diag};
}

double edge_norm(const SpinorField2B& field, unsigned threads) {
  return norm_breakdown(field, threads).edge;
}

FieldNorms field_norms(const SpinorField2B& field, unsigned threads) {
  const NormBreakdown b = norm_breakdown(field, threads);
  return FieldNorms{SideNorms{b.right, b.left, b.diag}, b.edge, b.total()};
}

std::vector<double> marginal_density(const SpinorField2B& field, Axis which) {
  const int n = field.grid.n;
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double r = cell_rho(field, base + j);
      if (which == Axis::photon)
        out[i] += r;
      else
        out[j] += r;
    }
  }
  for (double& v : out) v *= field.grid.dz;
  return out;
}

} // namespace phel
