#include <algorithm>
#include <deque>

#include "tiltlab/genericity.hpp"

namespace tiltlab {

std::size_t GridSpec::size() const {
  std::size_t total = 1;
  for (int d = 0; d < dim(); ++d) total *= static_cast<std::size_t>(nodes);
  return total;
}

Vec GridSpec::node(std::size_t index) const {
  Vec p(dim());
  for (int d = 0; d < dim(); ++d) {
    const auto k = static_cast<int>(index % static_cast<std::size_t>(nodes));
    index /= static_cast<std::size_t>(nodes);
    p(d) = k == nodes - 1 ? hi(d) : lo(d) + (hi(d) - lo(d)) * k / (nodes - 1);
  }
  return p;
}

double SelectionAtlas::coverage() const {
  std::size_t covered = 0;
  for (const auto& r : regions) covered += r.nodes.size();
  return cardinality.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(cardinality.size());
}

namespace {

struct NodeResult {
  int cardinality = -1;
  bool collision = false;
  std::vector<Vec> points;
};

NodeResult resolve(const FunctionExpr& f, const Vec& v, double gap, const StationaryOptions& opts) {
  NodeResult r;
  try {
    const CriticalEnumeration e = enumerate_critical_points(f, v, opts, false);
    if (e.continuum) return r;
    for (const auto& cp : e.points) r.points.push_back(cp.x);
  } catch (const Error&) {
    return r;
  }
  r.cardinality = static_cast<int>(r.points.size());
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    for (std::size_t j = i + 1; j < r.points.size(); ++j) {
      if ((r.points[i] - r.points[j]).norm() < gap) r.collision = true;
    }
  }
  return r;
}

// Grid neighbours of a node along each axis (forward only).
std::vector<std::size_t> forward_neighbours(const GridSpec& g, std::size_t idx) {
  std::vector<std::size_t> out;
  std::size_t stride = 1;
  for (int d = 0; d < g.dim(); ++d) {
    const auto k = (idx / stride) % static_cast<std::size_t>(g.nodes);
    if (k + 1 < static_cast<std::size_t>(g.nodes)) out.push_back(idx + stride);
    stride *= static_cast<std::size_t>(g.nodes);
  }
  return out;
}

}  // namespace

SelectionAtlas build_selection_atlas(const FunctionExpr& f, const GridSpec& grid, double branch_gap,
                                     const StationaryOptions& opts) {
  if (grid.dim() < 1 || grid.dim() > 2) fail(ErrorKind::Unsupported, "atlas parameter dimension must be 1 or 2");
  require_dim(grid.dim(), f.dim(), "build_selection_atlas");
  require_dim(grid.hi.size(), grid.dim(), "build_selection_atlas");
  if (grid.nodes < 2) fail(ErrorKind::DomainViolation, "atlas grid needs at least 2 nodes per axis");
  SelectionAtlas atlas;
  atlas.grid = grid;
  atlas.branch_gap = branch_gap;
  const std::size_t total = grid.size();
  if (total > kFaceBudget) fail(ErrorKind::Budget, "atlas grid too large");

  std::vector<NodeResult> res(total);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(total); ++i) {
    res[static_cast<std::size_t>(i)] = resolve(f, grid.node(static_cast<std::size_t>(i)), branch_gap, opts);
  }

  atlas.cardinality.resize(total);
  atlas.flagged.assign(total, false);
  for (std::size_t i = 0; i < total; ++i) {
    atlas.cardinality[i] = res[i].cardinality;
    if (res[i].cardinality < 0 || res[i].collision) atlas.flagged[i] = true;
    atlas.n_max = std::max(atlas.n_max, res[i].cardinality);
  }

  // One bisection pass per cardinality change between resolved nodes that are
  // consecutive along an axis (unresolved nodes in between are skipped). A node
  // within the finest probe scale of the localized value is flagged, matching
  // the resolution of weak_critical_value_probe.
  for (std::size_t i = 0; i < total; ++i) {
    if (res[i].cardinality < 0) continue;
    std::size_t stride = 1;
    for (int d = 0; d < grid.dim(); ++d, stride *= static_cast<std::size_t>(grid.nodes)) {
      std::size_t k = (i / stride) % static_cast<std::size_t>(grid.nodes);
      std::size_t j = i;
      while (k + 1 < static_cast<std::size_t>(grid.nodes)) {
        j += stride;
        ++k;
        if (res[j].cardinality >= 0) break;
      }
      if (j == i || res[j].cardinality < 0) continue;
      const int ci = res[i].cardinality;
      const int cj = res[j].cardinality;
      if (ci == cj) continue;
      Vec a = grid.node(i);
      Vec b = grid.node(j);
      for (int it = 0; it < 40; ++it) {
        const Vec mid = 0.5 * (a + b);
        (resolve(f, mid, branch_gap, opts).cardinality == ci ? a : b) = mid;
      }
      const Vec t = 0.5 * (a + b);
      atlas.transitions.push_back(t);
      const double reach = std::end(kProbeScales)[-1] * (1.0 + 1e-9);
      if ((grid.node(i) - t).norm() <= reach) atlas.flagged[i] = true;
      if ((grid.node(j) - t).norm() <= reach) atlas.flagged[j] = true;
    }
  }
  std::sort(atlas.transitions.begin(), atlas.transitions.end(), lex_less);

  // Connected components of unflagged nodes with equal cardinality.
  std::vector<bool> seen(total, false);
  std::vector<std::vector<std::size_t>> adj(total);
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j : forward_neighbours(grid, i)) {
      adj[i].push_back(j);
      adj[j].push_back(i);
    }
  }
  for (std::size_t s = 0; s < total; ++s) {
    if (seen[s] || atlas.flagged[s]) continue;
    AtlasRegion region;
    region.cardinality = res[s].cardinality;
    std::deque<std::size_t> queue{s};
    seen[s] = true;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      region.nodes.push_back(u);
      for (std::size_t w : adj[u]) {
        if (!seen[w] && !atlas.flagged[w] && res[w].cardinality == region.cardinality) {
          seen[w] = true;
          queue.push_back(w);
        }
      }
    }
    std::sort(region.nodes.begin(), region.nodes.end());
    for (std::size_t u : region.nodes) region.branches.push_back(res[u].points);
    atlas.regions.push_back(std::move(region));
  }
  return atlas;
}

}  // namespace tiltlab
