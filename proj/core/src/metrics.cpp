#include "dec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "dec/errors.hpp"

namespace dec {

HungarianResult hungarian(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw ArgumentError("hungarian: cost matrix must be square");
  if (!cost.all_finite()) throw ArgumentError("hungarian: costs must be finite");
  const std::size_t n = cost.rows();
  HungarianResult result;
  if (n == 0) return result;

  // Shortest augmenting paths with row/column potentials; 1-based internally.
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  result.assignment.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) result.assignment[match[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) result.total_cost += cost(i, result.assignment[i]);
  return result;
}

ContingencyTable ContingencyTable::build(std::span<const int> true_labels,
                                         std::span<const int> cluster_ids) {
  if (true_labels.size() != cluster_ids.size())
    throw ArgumentError("contingency table: label and cluster vectors differ in length");
  ContingencyTable t;
  std::map<int, std::size_t> rows, cols;
  for (int l : true_labels) rows.emplace(l, 0);
  for (int c : cluster_ids) cols.emplace(c, 0);
  for (auto& [label, index] : rows) {
    index = t.row_labels.size();
    t.row_labels.push_back(label);
  }
  for (auto& [label, index] : cols) {
    index = t.col_labels.size();
    t.col_labels.push_back(label);
  }
  t.counts.assign(rows.size(), std::vector<std::size_t>(cols.size(), 0));
  t.row_totals.assign(rows.size(), 0);
  t.col_totals.assign(cols.size(), 0);
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const std::size_t r = rows[true_labels[i]];
    const std::size_t c = cols[cluster_ids[i]];
    ++t.counts[r][c];
    ++t.row_totals[r];
    ++t.col_totals[c];
  }
  t.total = true_labels.size();
  return t;
}

AssignmentMapping best_mapping(const ContingencyTable& table) {
  const std::size_t r = table.row_labels.size();
  const std::size_t c = table.col_labels.size();
  const std::size_t size = std::max(r, c);
  AssignmentMapping mapping;
  if (size == 0) return mapping;

  // Rows: clusters, columns: labels; padded entries have zero benefit.
  Matrix cost(size, size, 0.0);
  for (std::size_t l = 0; l < r; ++l)
    for (std::size_t k = 0; k < c; ++k) cost(k, l) = -static_cast<double>(table.counts[l][k]);
  const auto match = hungarian(cost);
  for (std::size_t k = 0; k < c; ++k) {
    const std::size_t l = match.assignment[k];
    if (l >= r) continue;
    mapping.cluster_to_label.emplace_back(table.col_labels[k], table.row_labels[l]);
    mapping.matched_count += table.counts[l][k];
  }
  return mapping;
}

double clustering_accuracy(std::span<const int> true_labels, std::span<const int> cluster_ids) {
  if (true_labels.size() != cluster_ids.size())
    throw ArgumentError("clustering_accuracy: length mismatch");
  if (true_labels.empty()) throw ArgumentError("clustering_accuracy: empty input");
  const auto table = ContingencyTable::build(true_labels, cluster_ids);
  return static_cast<double>(best_mapping(table).matched_count) /
         static_cast<double>(table.total);
}

double nmi(std::span<const int> true_labels, std::span<const int> cluster_ids) {
  if (true_labels.size() != cluster_ids.size()) throw ArgumentError("nmi: length mismatch");
  if (true_labels.empty()) throw ArgumentError("nmi: empty input");
  const auto t = ContingencyTable::build(true_labels, cluster_ids);
  const double n = static_cast<double>(t.total);

  auto entropy = [n](const std::vector<std::size_t>& totals) {
    double h = 0.0;
    for (auto count : totals)
      if (count > 0) {
        const double p = static_cast<double>(count) / n;
        h -= p * std::log(p);
      }
    return h;
  };
  const double h_l = entropy(t.row_totals);
  const double h_c = entropy(t.col_totals);
  if (t.row_labels.size() == 1 && t.col_labels.size() == 1) return 1.0;

  double mi = 0.0;
  for (std::size_t r = 0; r < t.counts.size(); ++r)
    for (std::size_t c = 0; c < t.counts[r].size(); ++c) {
      const auto count = t.counts[r][c];
      if (count == 0) continue;
      const double p_rc = static_cast<double>(count) / n;
      mi += p_rc * std::log(p_rc * n * n / (static_cast<double>(t.row_totals[r]) *
                                            static_cast<double>(t.col_totals[c])));
    }
  const double denom = 0.5 * (h_l + h_c);
  if (denom <= 0.0) return 1.0;
  return std::clamp(mi / denom, 0.0, 1.0);
}

double generalizability(double train_loss, double validation_loss) {
  if (!(validation_loss > 0.0))
    throw ArgumentError("generalizability: validation loss must be positive");
  return train_loss / validation_loss;
}

std::size_t recommend_cluster_count(std::span<const std::size_t> ks, std::span<const double> g) {
  if (ks.empty() || ks.size() != g.size())
    throw ArgumentError("recommend_cluster_count: need one G value per k");
  if (ks.size() == 1) return ks.front();
  std::size_t best = 0;
  double best_drop = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < ks.size(); ++i) {
    const double drop = (g[i] - g[i + 1]) / std::abs(g[i]);
    if (drop > best_drop) {
      best_drop = drop;
      best = i;
    }
  }
  return ks[best];
}

}  // namespace dec
