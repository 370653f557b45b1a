#include "cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "models.hpp"

namespace specrange {

double abs_correlation(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
    const Index n = x.size();
    if (n != y.size()) throw InvalidArgument("abs_correlation: length mismatch");
    if (n < 2) throw InvalidArgument("abs_correlation needs at least 2 observations");
    const double mx = x.mean();
    const double my = y.mean();
    const double vx = (x.array() - mx).square().sum();
    const double vy = (y.array() - my).square().sum();
    if (vx <= 0.0 || vy <= 0.0)
        throw DegenerateDataError("abs_correlation: zero-variance input");
    const double cov = ((x.array() - mx) * (y.array() - my)).sum();
    return std::min(1.0, std::abs(cov) / std::sqrt(vx * vy));
}

namespace {

// Pairwise |corr| between all variable columns, with a degeneracy check that
// names the offending wavelength.
Matrix correlation_matrix(const SpectraSet& train) {
    const Index n = train.n_samples();
    const Index p = train.n_vars();
    Matrix Z(n, p);
    for (Index j = 0; j < p; ++j) {
        const double m = train.absorbance.col(j).mean();
        const double ss = (train.absorbance.col(j).array() - m).square().sum();
        if (ss <= 0.0)
            throw DegenerateDataError(
                "constant spectral variable at wavelength " +
                std::to_string(train.wavelengths(j)) + " (index " + std::to_string(j) + ")");
        Z.col(j) = (train.absorbance.col(j).array() - m) / std::sqrt(ss);
    }
    Matrix R = (Z.transpose() * Z).cwiseAbs();
    R = R.cwiseMin(1.0);
    return R;
}

}  // namespace

ClusterTree build_tree(const SpectraSet& train) {
    train.validate();
    const int n = static_cast<int>(train.n_vars());
    const Matrix R = correlation_matrix(train);

    ClusterTree tree;
    tree.n_vars = n;
    tree.node_interval.reserve(2 * n - 1);
    for (int j = 0; j < n; ++j) tree.node_interval.emplace_back(j, j);

    // Active clusters left to right; sim(i,j) is the min-linkage similarity
    // between active clusters i and j (full matrix so that merges can update
    // any pair by min-of-mins, even though only adjacent pairs may merge).
    std::vector<int> node_id(n);
    std::iota(node_id.begin(), node_id.end(), 0);
    Matrix sim = R;

    auto erase_entry = [](Matrix& m, int idx) {
        const int last = static_cast<int>(m.rows()) - 1;
        for (int r = idx; r < last; ++r) m.row(r) = m.row(r + 1);
        for (int c = idx; c < last; ++c) m.col(c) = m.col(c + 1);
        m.conservativeResize(last, last);
    };

    for (int step = 0; step < n - 1; ++step) {
        const int active = static_cast<int>(node_id.size());
        int best = 0;
        double best_sim = -1.0;
        for (int i = 0; i + 1 < active; ++i) {
            if (sim(i, i + 1) > best_sim) {  // strict: leftmost wins ties
                best_sim = sim(i, i + 1);
                best = i;
            }
        }

        const int left = node_id[best];
        const int right = node_id[best + 1];
        const int merged = n + step;
        tree.merges.push_back({left, right, best_sim});
        tree.node_interval.emplace_back(tree.node_interval[left].first,
                                        tree.node_interval[right].second);

        // Min-of-mins update against every other cluster, then drop the row
        // and column of the absorbed right member.
        for (int k = 0; k < active; ++k) {
            if (k == best || k == best + 1) continue;
            const double m = std::min(sim(best, k), sim(best + 1, k));
            sim(best, k) = m;
            sim(k, best) = m;
        }
        erase_entry(sim, best + 1);
        node_id[best] = merged;
        node_id.erase(node_id.begin() + best + 1);
    }
    return tree;
}

Clustering cut(const ClusterTree& tree, int M) {
    if (M < 1 || M > tree.n_vars)
        throw InvalidArgument("cut: M=" + std::to_string(M) + " out of range [1, " +
                              std::to_string(tree.n_vars) + "]");
    // Apply the first n_vars - M merges to the singleton partition.
    std::vector<bool> alive(tree.node_interval.size(), false);
    for (int j = 0; j < tree.n_vars; ++j) alive[j] = true;
    const int apply = tree.n_vars - M;
    for (int t = 0; t < apply; ++t) {
        alive[tree.merges[t].left_id] = false;
        alive[tree.merges[t].right_id] = false;
        alive[tree.n_vars + t] = true;
    }
    std::vector<std::pair<int, int>> intervals;
    for (std::size_t id = 0; id < alive.size(); ++id)
        if (alive[id]) intervals.push_back(tree.node_interval[id]);
    std::sort(intervals.begin(), intervals.end());

    Clustering c;
    c.boundaries.reserve(intervals.size() + 1);
    c.boundaries.push_back(0);
    for (const auto& [lo, hi] : intervals) {
        if (lo != c.boundaries.back())
            throw NumericError("cut: non-contiguous cluster intervals (internal error)");
        c.boundaries.push_back(hi + 1);
    }
    if (c.boundaries.back() != tree.n_vars)
        throw NumericError("cut: intervals do not cover the variable range (internal error)");
    return c;
}

Matrix cluster_features(const Matrix& absorbance, const Clustering& c) {
    const int M = c.num_clusters();
    if (c.boundaries.front() != 0 || c.boundaries.back() != absorbance.cols())
        throw InvalidArgument("cluster_features: clustering does not match variable count");
    Matrix F(absorbance.rows(), M);
    for (int j = 0; j < M; ++j) {
        const auto [lo, hi] = c.interval(j);
        F.col(j) = absorbance.middleCols(lo, hi - lo + 1).rowwise().mean();
    }
    return F;
}

Matrix cluster_features(const SpectraSet& s, const Clustering& c) {
    return cluster_features(s.absorbance, c);
}

ClusterCountChoice select_num_clusters(const ClusterTree& tree, const SpectraSet& train,
                                       int folds,
                                       std::optional<std::pair<int, int>> m_range) {
    if (folds < 2) throw InvalidArgument("select_num_clusters: need at least 2 folds");
    int lo = 1, hi = tree.n_vars;
    if (m_range) {
        lo = m_range->first;
        hi = m_range->second;
        if (lo < 1 || hi > tree.n_vars || lo > hi)
            throw InvalidArgument("select_num_clusters: m_range outside [1, n_vars]");
    }

    const FoldSpec fold_spec = contiguous_folds(train.n_samples(), folds);
    const double inf = std::numeric_limits<double>::infinity();

    ClusterCountChoice choice;
    choice.m_best = lo;
    double best_score = inf;

    for (int M = lo; M <= hi; ++M) {
        const Matrix F = cluster_features(train, cut(tree, M));
        double total = 0.0;
        bool failed = false;
        for (std::size_t f = 0; f < fold_spec.folds.size() && !failed; ++f) {
            const auto tr = fold_spec.train_indices(f);
            const auto& va = fold_spec.folds[f];
            if (static_cast<int>(tr.size()) < M) {  // fewer samples than features
                failed = true;
                break;
            }
            Matrix Ftr(static_cast<Index>(tr.size()), F.cols());
            Vector ytr(static_cast<Index>(tr.size()));
            for (std::size_t r = 0; r < tr.size(); ++r) {
                Ftr.row(static_cast<Index>(r)) = F.row(tr[r]);
                ytr(static_cast<Index>(r)) = train.target(tr[r]);
            }
            Matrix Fva(static_cast<Index>(va.size()), F.cols());
            Vector yva(static_cast<Index>(va.size()));
            for (std::size_t r = 0; r < va.size(); ++r) {
                Fva.row(static_cast<Index>(r)) = F.row(va[r]);
                yva(static_cast<Index>(r)) = train.target(va[r]);
            }
            try {
                const OlsModel ols = fit_ols(Ftr, ytr);
                total += nmse(yva, predict(ols, Fva));
            } catch (const Error&) {
                failed = true;
            }
        }
        const double score = failed ? inf : total / static_cast<double>(folds);
        choice.m_values.push_back(M);
        choice.scores.push_back(score);
        if (score < best_score) {  // strict: ties keep the smaller M
            best_score = score;
            choice.m_best = M;
        }
    }
    return choice;
}

}  // namespace specrange
