#include "tree_builder.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace transfuse::detail {

BinnedMatrix bin_features(const Eigen::MatrixXd& X, int max_bins) {
  BinnedMatrix B;
  B.rows = X.rows();
  B.cols = X.cols();
  B.bins.resize(static_cast<std::size_t>(X.cols()));
  B.bin_count.resize(static_cast<std::size_t>(X.cols()));
  std::vector<double> sorted(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) sorted[static_cast<std::size_t>(i)] = X(i, f);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> unique;
    std::unique_copy(sorted.begin(), sorted.end(), std::back_inserter(unique));
    std::vector<double> edges;
    if (static_cast<int>(unique.size()) <= max_bins) {
      edges.assign(unique.begin(), unique.empty() ? unique.end() : unique.end() - 1);
    } else {
      const std::size_t n = sorted.size();
      for (int k = 1; k < max_bins; ++k) {
        const double v = sorted[static_cast<std::size_t>(k) * n / static_cast<std::size_t>(max_bins)];
        if (v < unique.back() && (edges.empty() || v > edges.back())) edges.push_back(v);
      }
    }
    auto& col = B.bins[static_cast<std::size_t>(f)];
    col.resize(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      col[static_cast<std::size_t>(i)] =
          static_cast<std::uint16_t>(std::lower_bound(edges.begin(), edges.end(), X(i, f)) - edges.begin());
    }
    B.bin_count[static_cast<std::size_t>(f)] = static_cast<int>(edges.size()) + 1;
  }
  return B;
}

namespace {

struct Pending {
  int node;
  std::size_t begin;
  std::size_t end;
  int depth;
};

struct Split {
  int feature = -1;
  int bin = -1;
  double gain = 0.0;
};

// Midpoint between the largest left value and the smallest right value among
// the node's rows, so unseen values between them fall consistently.
double split_threshold(const BinnedMatrix& B, const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows,
                       std::size_t begin, std::size_t end, const Split& s) {
  double lmax = -std::numeric_limits<double>::infinity();
  double rmin = std::numeric_limits<double>::infinity();
  const auto& col = B.bins[static_cast<std::size_t>(s.feature)];
  for (std::size_t k = begin; k < end; ++k) {
    const double v = X(rows[k], s.feature);
    if (col[static_cast<std::size_t>(rows[k])] <= s.bin) {
      lmax = std::max(lmax, v);
    } else {
      rmin = std::min(rmin, v);
    }
  }
  const double t = lmax + (rmin - lmax) * 0.5;
  return t < rmin ? t : lmax;
}

std::size_t partition_rows(const BinnedMatrix& B, std::vector<Eigen::Index>& rows, std::size_t begin,
                           std::size_t end, const Split& s) {
  const auto& col = B.bins[static_cast<std::size_t>(s.feature)];
  auto mid = std::stable_partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                   rows.begin() + static_cast<std::ptrdiff_t>(end),
                                   [&](Eigen::Index r) { return col[static_cast<std::size_t>(r)] <= s.bin; });
  return static_cast<std::size_t>(mid - rows.begin());
}

}  // namespace

Tree grow_gini_tree(const BinnedMatrix& B, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    std::vector<Eigen::Index> rows, const GiniOptions& opt, std::mt19937_64& rng) {
  Tree tree;
  const int d = static_cast<int>(B.cols);
  const int n_candidates = opt.max_features > 0 ? std::min(opt.max_features, d) : d;
  std::vector<int> features(static_cast<std::size_t>(d));
  std::iota(features.begin(), features.end(), 0);
  std::vector<double> cnt(kMaxBins + 1), pos(kMaxBins + 1);

  tree.nodes.push_back({});
  std::vector<Pending> stack{{0, 0, rows.size(), 0}};
  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    const double n = static_cast<double>(p.end - p.begin);
    double npos = 0.0;
    for (std::size_t k = p.begin; k < p.end; ++k) npos += y(rows[k]) > 0.5 ? 1.0 : 0.0;
    tree.nodes[static_cast<std::size_t>(p.node)].value = npos / n;
    if (p.depth >= opt.max_depth || n < opt.min_samples_split || npos == 0.0 || npos == n) continue;

    if (n_candidates < d) {
      for (int k = 0; k < n_candidates; ++k) {
        std::uniform_int_distribution<int> pick(k, d - 1);
        std::swap(features[static_cast<std::size_t>(k)], features[static_cast<std::size_t>(pick(rng))]);
      }
    }
    const double parent = (npos * npos + (n - npos) * (n - npos)) / n;
    Split best;
    for (int c = 0; c < n_candidates; ++c) {
      const int f = features[static_cast<std::size_t>(c)];
      const int nb = B.bin_count[static_cast<std::size_t>(f)];
      std::fill_n(cnt.begin(), nb, 0.0);
      std::fill_n(pos.begin(), nb, 0.0);
      const auto& col = B.bins[static_cast<std::size_t>(f)];
      for (std::size_t k = p.begin; k < p.end; ++k) {
        const auto b = col[static_cast<std::size_t>(rows[k])];
        cnt[b] += 1.0;
        pos[b] += y(rows[k]) > 0.5 ? 1.0 : 0.0;
      }
      double ln = 0.0, lp = 0.0;
      for (int b = 0; b + 1 < nb; ++b) {
        ln += cnt[static_cast<std::size_t>(b)];
        lp += pos[static_cast<std::size_t>(b)];
        if (ln == 0.0) continue;
        if (ln == n) break;
        const double rn = n - ln, rp = npos - lp;
        const double score = (lp * lp + (ln - lp) * (ln - lp)) / ln + (rp * rp + (rn - rp) * (rn - rp)) / rn;
        const double gain = score - parent;
        if (gain > best.gain + 1e-12) best = {f, b, gain};
      }
    }
    if (best.feature < 0) continue;

    const double threshold = split_threshold(B, X, rows, p.begin, p.end, best);
    const std::size_t mid = partition_rows(B, rows, p.begin, p.end, best);
    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.push_back({});
    auto& node = tree.nodes[static_cast<std::size_t>(p.node)];
    node.feature = best.feature;
    node.threshold = threshold;
    node.left = left;
    node.right = left + 1;
    stack.push_back({left + 1, mid, p.end, p.depth + 1});
    stack.push_back({left, p.begin, mid, p.depth + 1});
  }
  return tree;
}

Tree grow_newton_tree(const BinnedMatrix& B, const Eigen::MatrixXd& X, const Eigen::VectorXd& grad,
                      const Eigen::VectorXd& hess, int max_depth, double lambda, double gamma) {
  Tree tree;
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(B.rows));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  std::vector<double> gs(kMaxBins + 1), hs(kMaxBins + 1), cnt(kMaxBins + 1);

  tree.nodes.push_back({});
  std::vector<Pending> stack{{0, 0, rows.size(), 0}};
  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    double G = 0.0, H = 0.0;
    for (std::size_t k = p.begin; k < p.end; ++k) {
      G += grad(rows[k]);
      H += hess(rows[k]);
    }
    tree.nodes[static_cast<std::size_t>(p.node)].value = -G / (H + lambda);
    if (p.depth >= max_depth || p.end - p.begin < 2) continue;

    const double parent = G * G / (H + lambda);
    Split best;
    for (int f = 0; f < static_cast<int>(B.cols); ++f) {
      const int nb = B.bin_count[static_cast<std::size_t>(f)];
      std::fill_n(gs.begin(), nb, 0.0);
      std::fill_n(hs.begin(), nb, 0.0);
      std::fill_n(cnt.begin(), nb, 0.0);
      const auto& col = B.bins[static_cast<std::size_t>(f)];
      for (std::size_t k = p.begin; k < p.end; ++k) {
        const auto b = col[static_cast<std::size_t>(rows[k])];
        gs[b] += grad(rows[k]);
        hs[b] += hess(rows[k]);
        cnt[b] += 1.0;
      }
      const double n = static_cast<double>(p.end - p.begin);
      double gl = 0.0, hl = 0.0, nl = 0.0;
      for (int b = 0; b + 1 < nb; ++b) {
        gl += gs[static_cast<std::size_t>(b)];
        hl += hs[static_cast<std::size_t>(b)];
        nl += cnt[static_cast<std::size_t>(b)];
        if (nl == 0.0) continue;
        if (nl == n) break;
        const double gr = G - gl, hr = H - hl;
        const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent) - gamma;
        if (gain > 0.0 && gain > best.gain) best = {f, b, gain};
      }
    }
    if (best.feature < 0) continue;

    const double threshold = split_threshold(B, X, rows, p.begin, p.end, best);
    const std::size_t mid = partition_rows(B, rows, p.begin, p.end, best);
    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.push_back({});
    auto& node = tree.nodes[static_cast<std::size_t>(p.node)];
    node.feature = best.feature;
    node.threshold = threshold;
    node.left = left;
    node.right = left + 1;
    stack.push_back({left + 1, mid, p.end, p.depth + 1});
    stack.push_back({left, p.begin, mid, p.depth + 1});
  }
  return tree;
}

}  // namespace transfuse::detail
