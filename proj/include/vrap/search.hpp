#pragma once

#include <algorithm>
#include <unordered_map>
#include <vector>

#include "vrap/classifier.hpp"
#include "vrap/placement.hpp"
#include "vrap/types.hpp"

namespace vrap {

// Local neighborhood for the position search: candidates sit on a stride-tau
// grid within +-k pixels of the center, clamped into the valid placement box.
struct SearchWindow {
  Placement center;
  int k = 10;
  int tau = 5;

  void validate() const {
    if (k < 0) throw DomainError("SearchWindow: k must be >= 0");
    if (tau < 1) throw DomainError("SearchWindow: tau must be >= 1");
  }
};

namespace detail {

// Candidate coordinates along one axis: center + m*tau for |m*tau| <= k,
// clamped to [0, limit], deduplicated, ascending.
inline std::vector<int> axis_candidates(int center, int k, int tau, int limit) {
  std::vector<int> out;
  const int steps = k / tau;
  for (int m = -steps; m <= steps; ++m) {
    const int v = std::clamp(center + m * tau, 0, limit);
    out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Memoizing loss evaluator over placements of a fixed patch on a fixed image.
class PlacementLoss {
 public:
  PlacementLoss(const Image& image, const Tensor& patch_values,
                const ClassifierAdapter& model)
      : image_(image), patch_(patch_values), model_(model) {}

  double at(const Placement& p) {
    const long long key = static_cast<long long>(p.i) * (image_.width() + 1) + p.j;
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const double value = model_.loss_one(
        paste_pixels(image_.pixels(), patch_, p), image_.label());
    cache_.emplace(key, value);
    return value;
  }

 private:
  const Image& image_;
  const Tensor& patch_;
  const ClassifierAdapter& model_;
  std::unordered_map<long long, double> cache_;
};

// Argmin with the tie-breaking contract: the center placement wins ties, then
// the lexicographically smallest (i, j). Candidates must be lex-ascending.
inline Placement pick_min(PlacementLoss& loss, const Placement& center,
                          const std::vector<Placement>& candidates) {
  Placement best = center;
  double best_loss = loss.at(center);
  for (const Placement& p : candidates) {
    if (p == center) continue;
    const double v = loss.at(p);
    if (v < best_loss) {
      best = p;
      best_loss = v;
    }
  }
  return best;
}

}  // namespace detail

// Axis-decomposed local search for the poorest (minimum-loss) placement.
// Searches the row axis and the column axis independently, then returns the
// best of {center, row winner, column winner, combined winner}. Including the
// center guarantees the returned loss never exceeds the current one.
inline Placement axis_search(const Image& image, const Tensor& patch_values,
                             const SearchWindow& window,
                             const ClassifierAdapter& model) {
  window.validate();
  const int limit_i = image.height() - patch_values.height();
  const int limit_j = image.width() - patch_values.width();
  if (!validate_placement(image.height(), image.width(), patch_values.height(),
                          patch_values.width(), window.center))
    throw InvalidPlacementError("axis_search: center placement invalid");

  detail::PlacementLoss loss(image, patch_values, model);
  const Placement center = window.center;

  std::vector<Placement> row_cands;
  for (int i : detail::axis_candidates(center.i, window.k, window.tau, limit_i))
    row_cands.push_back({i, center.j});
  const Placement row_best = detail::pick_min(loss, center, row_cands);

  std::vector<Placement> col_cands;
  for (int j : detail::axis_candidates(center.j, window.k, window.tau, limit_j))
    col_cands.push_back({center.i, j});
  const Placement col_best = detail::pick_min(loss, center, col_cands);

  std::vector<Placement> finalists = {
      {row_best.i, center.j}, {center.i, col_best.j}, {row_best.i, col_best.j}};
  std::sort(finalists.begin(), finalists.end(),
            [](const Placement& a, const Placement& b) {
              return a.i != b.i ? a.i < b.i : a.j < b.j;
            });
  return detail::pick_min(loss, center, finalists);
}

// Exact argmin over the full stride-tau grid in the window. Exponentially
// more queries than axis_search; retained as the exact reference.
inline Placement brute_force_search(const Image& image, const Tensor& patch_values,
                                    const SearchWindow& window,
                                    const ClassifierAdapter& model) {
  window.validate();
  const int limit_i = image.height() - patch_values.height();
  const int limit_j = image.width() - patch_values.width();
  if (!validate_placement(image.height(), image.width(), patch_values.height(),
                          patch_values.width(), window.center))
    throw InvalidPlacementError("brute_force_search: center placement invalid");

  detail::PlacementLoss loss(image, patch_values, model);
  std::vector<Placement> grid;
  for (int i : detail::axis_candidates(window.center.i, window.k, window.tau, limit_i))
    for (int j : detail::axis_candidates(window.center.j, window.k, window.tau, limit_j))
      grid.push_back({i, j});
  return detail::pick_min(loss, window.center, grid);
}

}  // namespace vrap
