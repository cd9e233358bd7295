#include "compactml/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace compactml {
namespace {

// Midpoint that still separates a from b (a < b) after rounding.
double separating_midpoint(double a, double b) {
    const double mid = a + (b - a) / 2.0;
    return mid < b ? mid : a;
}

double split_score(double sum_left, double n_left, double sum_right, double n_right,
                   double sum_all, double n_all, double l2) {
    return sum_left * sum_left / (n_left + l2) + sum_right * sum_right / (n_right + l2) -
           sum_all * sum_all / (n_all + l2);
}

// Core scan shared by best_split and tree growth. With l2 == 0 the targets
// are centred first, which leaves the gain unchanged but avoids cancellation.
std::optional<SplitCandidate> scan_sorted(std::span<const double> xs, std::span<const double> ys,
                                          std::size_t min_leaf, double l2) {
    const std::size_t n = xs.size();
    min_leaf = std::max<std::size_t>(min_leaf, 1);
    if (n < 2 * min_leaf) return std::nullopt;

    double shift = 0;
    if (l2 == 0.0) {
        for (double y : ys) shift += y;
        shift /= static_cast<double>(n);
    }
    double total = 0;
    for (double y : ys) total += y - shift;

    std::optional<SplitCandidate> best;
    double best_gain = -std::numeric_limits<double>::infinity();
    double left = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        left += ys[i] - shift;
        const std::size_t n_left = i + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < min_leaf) continue;
        if (n_right < min_leaf) break;
        if (!(xs[i] < xs[i + 1])) continue;
        const double gain =
            split_score(left, static_cast<double>(n_left), total - left,
                        static_cast<double>(n_right), total, static_cast<double>(n), l2);
        if (gain > best_gain) {
            best_gain = gain;
            best = SplitCandidate{0, separating_midpoint(xs[i], xs[i + 1]), n_left, n_right, gain};
        }
    }
    return best;
}

struct Grower {
    const FeatureMatrix& x;
    std::span<const double> y;
    const TreeOptions& opt;
    Rng& rng;
    std::vector<std::size_t> features;
    std::vector<RegressionTree::Node>& nodes;

    std::vector<std::size_t> pick_features() {
        const std::size_t p = features.size();
        std::size_t m = static_cast<std::size_t>(std::lround(opt.max_features * static_cast<double>(p)));
        m = std::clamp<std::size_t>(m, 1, p);
        if (m == p) return features;
        std::vector<std::size_t> pool = features;
        for (std::size_t i = 0; i < m; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.below(p - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(m);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    std::optional<SplitCandidate> random_split(const std::vector<std::size_t>& rows,
                                               std::size_t f) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (auto r : rows) {
            lo = std::min(lo, x(r, f));
            hi = std::max(hi, x(r, f));
        }
        if (!(lo < hi)) return std::nullopt;
        const double t = rng.uniform(lo, hi);
        double shift = 0;
        if (opt.l2 == 0.0) {
            for (auto r : rows) shift += y[r];
            shift /= static_cast<double>(rows.size());
        }
        double left = 0, total = 0;
        std::size_t n_left = 0;
        for (auto r : rows) {
            const double d = y[r] - shift;
            total += d;
            if (x(r, f) <= t) {
                left += d;
                ++n_left;
            }
        }
        const std::size_t n_right = rows.size() - n_left;
        const auto min_leaf = std::max<std::size_t>(opt.min_samples_leaf, 1);
        if (n_left < min_leaf || n_right < min_leaf) return std::nullopt;
        const double gain = split_score(left, static_cast<double>(n_left), total - left,
                                        static_cast<double>(n_right), total,
                                        static_cast<double>(rows.size()), opt.l2);
        return SplitCandidate{f, t, n_left, n_right, gain};
    }

    std::optional<SplitCandidate> exhaustive_split(const std::vector<std::size_t>& rows,
                                                   std::size_t f) {
        std::vector<std::size_t> order = rows;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
        std::vector<double> xs(order.size()), ys(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            xs[i] = x(order[i], f);
            ys[i] = y[order[i]];
        }
        auto c = scan_sorted(xs, ys, opt.min_samples_leaf, opt.l2);
        if (c) c->feature_index = f;
        return c;
    }

    std::uint32_t make_leaf(const std::vector<std::size_t>& rows) {
        double s = 0;
        for (auto r : rows) s += y[r];
        RegressionTree::Node leaf;
        leaf.value = s / (static_cast<double>(rows.size()) + opt.l2);
        nodes.push_back(leaf);
        return static_cast<std::uint32_t>(nodes.size() - 1);
    }

    std::uint32_t grow(const std::vector<std::size_t>& rows, std::size_t depth) {
        const auto min_leaf = std::max<std::size_t>(opt.min_samples_leaf, 1);
        bool pure = true;
        for (auto r : rows)
            if (y[r] != y[rows.front()]) {
                pure = false;
                break;
            }
        if (pure || depth >= opt.max_depth || rows.size() < 2 * min_leaf) return make_leaf(rows);

        std::optional<SplitCandidate> best;
        for (auto f : pick_features()) {
            auto c = opt.random_thresholds ? random_split(rows, f) : exhaustive_split(rows, f);
            if (c && (!best || c->gain > best->gain)) best = c;
        }
        if (!best || !(best->gain > 0.0)) return make_leaf(rows);

        std::vector<std::size_t> left, right;
        for (auto r : rows) (x(r, best->feature_index) <= best->threshold ? left : right).push_back(r);

        const auto id = static_cast<std::uint32_t>(nodes.size());
        nodes.emplace_back();
        nodes[id].feature = static_cast<std::int32_t>(best->feature_index);
        nodes[id].threshold = best->threshold;
        const auto l = grow(left, depth + 1);
        const auto r = grow(right, depth + 1);
        nodes[id].left = l;
        nodes[id].right = r;
        return id;
    }
};

}  // namespace

std::optional<SplitCandidate> best_split(std::span<const double> xs, std::span<const double> ys,
                                         std::size_t min_leaf) {
    if (xs.size() != ys.size()) throw ShapeError("best_split: xs and ys differ in length");
    auto c = scan_sorted(xs, ys, min_leaf, 0.0);
    if (c) c->gain = std::max(c->gain, 0.0);
    return c;
}

RegressionTree RegressionTree::grow(const FeatureMatrix& x, std::span<const double> y,
                                    std::span<const std::size_t> rows, const TreeOptions& options,
                                    Rng& rng, std::span<const std::size_t> features) {
    if (rows.empty()) throw ShapeError("cannot grow a tree on zero rows");
    RegressionTree tree;
    std::vector<std::size_t> feats(features.begin(), features.end());
    if (feats.empty()) {
        feats.resize(x.cols());
        std::iota(feats.begin(), feats.end(), std::size_t{0});
    }
    std::sort(feats.begin(), feats.end());
    Grower g{x, y, options, rng, std::move(feats), tree.nodes_};
    g.grow(std::vector<std::size_t>(rows.begin(), rows.end()), 0);
    return tree;
}

double RegressionTree::predict(std::span<const double> row) const {
    std::uint32_t i = 0;
    while (nodes_[i].feature >= 0)
        i = row[static_cast<std::size_t>(nodes_[i].feature)] <= nodes_[i].threshold ? nodes_[i].left
                                                                                     : nodes_[i].right;
    return nodes_[i].value;
}

std::size_t RegressionTree::depth() const {
    std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
    std::size_t d = 0;
    while (!stack.empty()) {
        auto [i, level] = stack.back();
        stack.pop_back();
        d = std::max(d, level);
        if (nodes_[i].feature >= 0) {
            stack.emplace_back(nodes_[i].left, level + 1);
            stack.emplace_back(nodes_[i].right, level + 1);
        }
    }
    return d;
}

void RegressionTree::save(BinaryWriter& w) const {
    w.u64(nodes_.size());
    for (const auto& n : nodes_) {
        w.u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(n.feature)));
        w.f64(n.threshold);
        w.u64(n.left);
        w.u64(n.right);
        w.f64(n.value);
    }
}

RegressionTree RegressionTree::load(BinaryReader& r) {
    RegressionTree t;
    t.nodes_.resize(r.size());
    for (auto& n : t.nodes_) {
        n.feature = static_cast<std::int32_t>(static_cast<std::int64_t>(r.u64()));
        n.threshold = r.f64();
        n.left = static_cast<std::uint32_t>(r.u64());
        n.right = static_cast<std::uint32_t>(r.u64());
        n.value = r.f64();
    }
    if (t.nodes_.empty()) throw FormatError("empty tree in model blob");
    for (const auto& n : t.nodes_)
        if (n.feature >= 0 && (n.left >= t.nodes_.size() || n.right >= t.nodes_.size()))
            throw FormatError("corrupt tree node in model blob");
    return t;
}

std::vector<std::vector<double>> oblivious_borders(const FeatureMatrix& x,
                                                   std::size_t max_borders) {
    std::vector<std::vector<double>> borders(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) {
        auto v = x.column(f);
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        std::vector<double> mids;
        for (std::size_t i = 0; i + 1 < v.size(); ++i)
            mids.push_back(separating_midpoint(v[i], v[i + 1]));
        if (max_borders > 0 && mids.size() > max_borders) {
            std::vector<double> thin;
            for (std::size_t j = 0; j < max_borders; ++j) {
                const auto pos = (2 * j + 1) * mids.size() / (2 * max_borders);
                thin.push_back(mids[pos]);
            }
            thin.erase(std::unique(thin.begin(), thin.end()), thin.end());
            mids = std::move(thin);
        }
        borders[f] = std::move(mids);
    }
    return borders;
}

ObliviousTree ObliviousTree::grow(const FeatureMatrix& x, std::span<const double> y,
                                  const std::vector<std::vector<double>>& borders,
                                  const ObliviousOptions& options) {
    const std::size_t n = x.rows();
    if (n == 0) throw ShapeError("cannot grow a tree on zero rows");
    const double l2 = options.l2;

    std::vector<std::vector<std::size_t>> sorted(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) {
        sorted[f].resize(n);
        std::iota(sorted[f].begin(), sorted[f].end(), std::size_t{0});
        std::stable_sort(sorted[f].begin(), sorted[f].end(),
                         [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
    }

    ObliviousTree tree;
    std::vector<std::size_t> group(n, 0);
    for (std::size_t level = 0; level < options.depth; ++level) {
        const std::size_t groups = std::size_t{1} << level;
        std::vector<double> g_sum(groups, 0.0), g_cnt(groups, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            g_sum[group[i]] += y[i];
            g_cnt[group[i]] += 1.0;
        }

        bool found = false;
        double best_gain = 0.0;
        Level best;
        std::vector<double> l_sum(groups), l_cnt(groups);
        for (std::size_t f = 0; f < x.cols(); ++f) {
            std::fill(l_sum.begin(), l_sum.end(), 0.0);
            std::fill(l_cnt.begin(), l_cnt.end(), 0.0);
            std::size_t p = 0;
            for (double t : borders[f]) {
                while (p < n && x(sorted[f][p], f) <= t) {
                    const auto r = sorted[f][p];
                    l_sum[group[r]] += y[r];
                    l_cnt[group[r]] += 1.0;
                    ++p;
                }
                double gain = 0;
                for (std::size_t g = 0; g < groups; ++g)
                    gain += split_score(l_sum[g], l_cnt[g], g_sum[g] - l_sum[g],
                                        g_cnt[g] - l_cnt[g], g_sum[g], g_cnt[g], l2);
                if (gain > best_gain) {
                    best_gain = gain;
                    best = Level{f, t};
                    found = true;
                }
            }
        }
        if (!found) break;
        tree.levels_.push_back(best);
        for (std::size_t i = 0; i < n; ++i)
            if (x(i, best.feature) > best.threshold) group[i] |= std::size_t{1} << level;
    }

    const std::size_t leaves = std::size_t{1} << tree.levels_.size();
    std::vector<double> sum(leaves, 0.0), cnt(leaves, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        sum[group[i]] += y[i];
        cnt[group[i]] += 1.0;
    }
    tree.leaves_.assign(leaves, 0.0);
    for (std::size_t j = 0; j < leaves; ++j)
        if (cnt[j] > 0) tree.leaves_[j] = sum[j] / (cnt[j] + l2);
    return tree;
}

std::size_t ObliviousTree::leaf_index(std::span<const double> row) const {
    std::size_t idx = 0;
    for (std::size_t d = 0; d < levels_.size(); ++d)
        if (row[levels_[d].feature] > levels_[d].threshold) idx |= std::size_t{1} << d;
    return idx;
}

void ObliviousTree::save(BinaryWriter& w) const {
    w.u64(levels_.size());
    for (const auto& l : levels_) {
        w.u64(l.feature);
        w.f64(l.threshold);
    }
    w.f64s(leaves_);
}

ObliviousTree ObliviousTree::load(BinaryReader& r) {
    ObliviousTree t;
    t.levels_.resize(r.size(63));
    for (auto& l : t.levels_) {
        l.feature = r.size();
        l.threshold = r.f64();
    }
    t.leaves_ = r.f64s();
    if (t.leaves_.size() != (std::size_t{1} << t.levels_.size()))
        throw FormatError("oblivious tree leaf count does not match depth");
    return t;
}

}  // namespace compactml
