#pragma once

#include <vector>

namespace tdsa {

// Adjusted Rand index between two labelings restricted to foreground
// positions (contingency-table formula). Throws when no position is
// foreground.
double fg_ari(const std::vector<int>& gt_labels,
              const std::vector<int>& pred_labels,
              const std::vector<bool>& foreground);

double iou(const std::vector<bool>& a, const std::vector<bool>& b);

// Optimal one-to-one assignment minimizing total cost; rectangular matrices
// are padded with zeros internally. Returns per-row assigned column, or -1
// when the row is matched to a padding column.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

// Mean IoU over matched (gt class, prediction) pairs from Hungarian matching.
// gt_masks must include background as a class; unmatched gt classes count 0.
double miou_hungarian(const std::vector<std::vector<bool>>& gt_masks,
                      const std::vector<std::vector<bool>>& pred_masks);

// Mean best overlap: per gt mask the maximum IoU over all predictions,
// non-exclusive. per_prediction flips to the per-prediction reading.
double mbo(const std::vector<std::vector<bool>>& gt_masks,
           const std::vector<std::vector<bool>>& pred_masks,
           bool per_prediction = false);

// Merge instance masks that share a category (for mBO^c).
std::vector<std::vector<bool>> merge_masks_by_category(
    const std::vector<std::vector<bool>>& masks,
    const std::vector<long>& categories);

}  // namespace tdsa
