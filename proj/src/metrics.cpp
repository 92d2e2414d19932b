#include "tdsa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace tdsa {

double fg_ari(const std::vector<int>& gt_labels,
              const std::vector<int>& pred_labels,
              const std::vector<bool>& foreground) {
  if (gt_labels.size() != pred_labels.size() ||
      gt_labels.size() != foreground.size())
    throw std::invalid_argument("fg_ari: length mismatch");
  std::map<int, int> gt_ids, pred_ids;
  std::vector<std::pair<int, int>> pts;
  for (std::size_t i = 0; i < gt_labels.size(); ++i) {
    if (!foreground[i]) continue;
    const int g = gt_ids.emplace(gt_labels[i], static_cast<int>(gt_ids.size()))
                      .first->second;
    const int p =
        pred_ids.emplace(pred_labels[i], static_cast<int>(pred_ids.size()))
            .first->second;
    pts.emplace_back(g, p);
  }
  if (pts.empty()) throw std::invalid_argument("fg_ari: empty foreground");

  const long r = static_cast<long>(gt_ids.size());
  const long c = static_cast<long>(pred_ids.size());
  std::vector<long> cont(r * c, 0), rows(r, 0), cols(c, 0);
  for (auto [g, p] : pts) {
    cont[g * c + p] += 1;
    rows[g] += 1;
    cols[p] += 1;
  }
  auto comb2 = [](long n) { return 0.5 * static_cast<double>(n) * (n - 1); };
  double sum_ij = 0, sum_i = 0, sum_j = 0;
  for (long v : cont) sum_ij += comb2(v);
  for (long v : rows) sum_i += comb2(v);
  for (long v : cols) sum_j += comb2(v);
  const double total = comb2(static_cast<long>(pts.size()));
  const double expected = sum_i * sum_j / total;
  const double max_index = 0.5 * (sum_i + sum_j);
  if (max_index == expected) return 1.0;  // both partitions trivial
  return (sum_ij - expected) / (max_index - expected);
}

double iou(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("iou: length mismatch");
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    uni += a[i] || b[i];
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

// Shortest augmenting path O(n^3) assignment on a padded square matrix.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const long rows = static_cast<long>(cost.size());
  if (rows == 0) return {};
  const long cols = static_cast<long>(cost[0].size());
  for (const auto& row : cost) {
    if (static_cast<long>(row.size()) != cols)
      throw std::invalid_argument("hungarian: ragged cost matrix");
    for (double v : row)
      if (!std::isfinite(v))
        throw std::invalid_argument("hungarian: non-finite cost entry");
  }
  const long n = std::max(rows, cols);
  auto at = [&](long i, long j) -> double {
    return (i < rows && j < cols) ? cost[i][j] : 0.0;
  };

  std::vector<double> u(n + 1, 0), v(n + 1, 0);
  std::vector<long> p(n + 1, 0), way(n + 1, 0);
  for (long i = 1; i <= n; ++i) {
    p[0] = i;
    long j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const long i0 = p[j0];
      long j1 = 0;
      double delta = std::numeric_limits<double>::infinity();
      for (long j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (long j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const long j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> assign(rows, -1);
  for (long j = 1; j <= n; ++j) {
    const long i = p[j];
    if (i >= 1 && i <= rows && j <= cols) assign[i - 1] = static_cast<int>(j - 1);
  }
  return assign;
}

double miou_hungarian(const std::vector<std::vector<bool>>& gt_masks,
                      const std::vector<std::vector<bool>>& pred_masks) {
  if (gt_masks.empty()) return 0.0;
  std::vector<std::vector<double>> cost(gt_masks.size(),
                                        std::vector<double>(pred_masks.size()));
  for (std::size_t i = 0; i < gt_masks.size(); ++i)
    for (std::size_t j = 0; j < pred_masks.size(); ++j)
      cost[i][j] = -iou(gt_masks[i], pred_masks[j]);
  const std::vector<int> assign = hungarian(cost);
  double total = 0;
  for (std::size_t i = 0; i < gt_masks.size(); ++i)
    if (assign[i] >= 0) total += iou(gt_masks[i], pred_masks[assign[i]]);
  return total / static_cast<double>(gt_masks.size());
}

double mbo(const std::vector<std::vector<bool>>& gt_masks,
           const std::vector<std::vector<bool>>& pred_masks,
           bool per_prediction) {
  const auto& outer = per_prediction ? pred_masks : gt_masks;
  const auto& inner = per_prediction ? gt_masks : pred_masks;
  if (outer.empty()) return 0.0;
  double total = 0;
  for (const auto& o : outer) {
    double best = 0;
    for (const auto& i : inner) best = std::max(best, iou(o, i));
    total += best;
  }
  return total / static_cast<double>(outer.size());
}

std::vector<std::vector<bool>> merge_masks_by_category(
    const std::vector<std::vector<bool>>& masks,
    const std::vector<long>& categories) {
  if (masks.size() != categories.size())
    throw std::invalid_argument("merge_masks_by_category: size mismatch");
  std::map<long, std::vector<bool>> merged;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    auto it = merged.find(categories[i]);
    if (it == merged.end()) {
      merged[categories[i]] = masks[i];
    } else {
      for (std::size_t j = 0; j < masks[i].size(); ++j)
        if (masks[i][j]) it->second[j] = true;
    }
  }
  std::vector<std::vector<bool>> out;
  out.reserve(merged.size());
  for (auto& [cat, m] : merged) out.push_back(std::move(m));
  return out;
}

}  // namespace tdsa
