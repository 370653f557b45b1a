#include "mutual_info.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/digamma.hpp>

namespace specrange {

namespace {

double digamma(double x) { return boost::math::digamma(x); }

// log volume of the unit l2 ball in R^d
double log_unit_ball_volume(int d) {
    return 0.5 * d * std::log(M_PI) - std::lgamma(0.5 * d + 1.0);
}

// Deterministic jitter in [-0.5, 0.5] from (seed, column, row).
double jitter_value(std::uint64_t seed, std::uint64_t col, std::uint64_t row) {
    std::uint64_t h = splitmix64(seed ^ splitmix64(col * 0x9e3779b97f4a7c15ULL + row));
    return (static_cast<double>(h >> 11) * 0x1.0p-53) - 0.5;
}

// Standardize a column; constant columns are centered only (the jitter then
// provides the tie-breaking scale).
void standardize_column(Eigen::Ref<Vector> col) {
    const double mean = col.mean();
    const double var = sample_variance(col);
    if (var > 1e-300) {
        col = (col.array() - mean) / std::sqrt(var);
    } else {
        col = col.array() - mean;
    }
}

}  // namespace

double ksg_mi(const Matrix& X, const Vector& y, const KsgOptions& opts) {
    const Index n = X.rows();
    const int d = static_cast<int>(X.cols());
    const int k = opts.k_neighbors;
    if (d < 1) throw InvalidArgument("ksg_mi: X needs at least one column");
    if (y.size() != n) throw InvalidArgument("ksg_mi: length mismatch");
    if (n <= k + 1)
        throw InvalidArgument("ksg_mi: need more than k+1=" + std::to_string(k + 1) +
                              " samples, got " + std::to_string(n));
    if (!X.allFinite() || !y.allFinite())
        throw InvalidArgument("ksg_mi: non-finite values in input");

    // Standardized and jittered working copies; y is block index d.
    Matrix Xs = X;
    for (Index j = 0; j < d; ++j) standardize_column(Xs.col(j));
    Vector ys = y;
    standardize_column(ys);
    constexpr double kJitterScale = 1e-10;
    for (Index j = 0; j < d; ++j)
        for (Index i = 0; i < n; ++i)
            Xs(i, j) += kJitterScale * jitter_value(opts.jitter_seed, static_cast<std::uint64_t>(j),
                                                    static_cast<std::uint64_t>(i));
    for (Index i = 0; i < n; ++i)
        ys(i) += kJitterScale * jitter_value(opts.jitter_seed, static_cast<std::uint64_t>(d),
                                             static_cast<std::uint64_t>(i));

    // Points as columns for contiguous access in the O(n^2) scans.
    const Matrix Xt = Xs.transpose();
    std::vector<double> dx2(static_cast<std::size_t>(n));
    std::vector<double> dy2(static_cast<std::size_t>(n));
    std::vector<double> scratch(static_cast<std::size_t>(n));
    const bool euclidean = opts.metric == JointMetric::euclidean;
    double psi_sum = 0.0;

    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            dx2[static_cast<std::size_t>(j)] = (Xt.col(j) - Xt.col(i)).squaredNorm();
            const double dy = ys(j) - ys(i);
            dy2[static_cast<std::size_t>(j)] = dy * dy;
        }
        for (Index j = 0; j < n; ++j) {
            const auto u = static_cast<std::size_t>(j);
            scratch[u] = euclidean ? dx2[u] + dy2[u] : std::max(dx2[u], dy2[u]);
        }
        scratch[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();
        std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
        const double eps2 = scratch[static_cast<std::size_t>(k - 1)];  // squared radius

        int nx = 0, ny = 0;
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const auto u = static_cast<std::size_t>(j);
            if (dx2[u] < eps2) ++nx;
            if (dy2[u] < eps2) ++ny;
        }
        psi_sum += digamma(nx + 1) + digamma(ny + 1);
    }

    double mi = digamma(k) + digamma(static_cast<double>(n)) -
                psi_sum / static_cast<double>(n);
    if (opts.metric == JointMetric::euclidean) {
        // With an l2 ball in the joint space the marginal masses overcount
        // relative to the product ball; correct by the log volume ratio
        // log(c_dx * c_dy / c_{dx+dy}).
        mi += log_unit_ball_volume(d) + log_unit_ball_volume(1) - log_unit_ball_volume(d + 1);
    }
    return mi;
}

double ksg_mi(const Matrix& X, const Vector& y, int k_neighbors) {
    KsgOptions opts;
    opts.k_neighbors = k_neighbors;
    return ksg_mi(X, y, opts);
}

ForwardSelection forward_select(const Matrix& features, const Vector& y, int P,
                                const KsgOptions& opts) {
    const int M = static_cast<int>(features.cols());
    if (M < 1) throw InvalidArgument("forward_select: no features");
    if (P < 1 || P > M)
        throw InvalidArgument("forward_select: P must be in [1, M]");

    ForwardSelection sel;
    std::vector<bool> used(static_cast<std::size_t>(M), false);
    Matrix joint(features.rows(), P);

    for (int step = 0; step < P; ++step) {
        int best = -1;
        double best_mi = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < M; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            joint.col(step) = features.col(j);
            const double mi = ksg_mi(joint.leftCols(step + 1), y, opts);
            if (mi > best_mi) {  // strict: ties keep the lowest index
                best_mi = mi;
                best = j;
            }
        }
        used[static_cast<std::size_t>(best)] = true;
        joint.col(step) = features.col(best);
        sel.order.push_back(best);
        sel.mi_trajectory.push_back(best_mi);
    }
    return sel;
}

SelectionResult exhaustive_search(const std::vector<int>& candidates,
                                  const SubsetEvaluator& evaluator,
                                  const std::string& evaluator_id,
                                  const ForwardSelection* forward) {
    const int P = static_cast<int>(candidates.size());
    if (P < 1 || P > 12)
        throw InvalidArgument("exhaustive_search: candidate count must be in [1, 12]");

    SelectionResult result;
    result.evaluator_id = evaluator_id;
    if (forward) {
        result.forward_order = forward->order;
        result.mi_trajectory = forward->mi_trajectory;
    } else {
        result.forward_order = candidates;
    }

    const double inf = std::numeric_limits<double>::infinity();
    const std::uint32_t n_subsets = (1u << P) - 1u;
    result.subset_scores.reserve(n_subsets);

    for (std::uint32_t mask = 1; mask <= n_subsets; ++mask) {
        SubsetScore score;
        for (int b = 0; b < P; ++b)
            if (mask & (1u << b)) score.subset.push_back(candidates[static_cast<std::size_t>(b)]);
        std::sort(score.subset.begin(), score.subset.end());
        try {
            score.cv_nmse = evaluator(score.subset);
        } catch (const std::exception& e) {
            score.cv_nmse = inf;
            score.note = e.what();
        }
        if (!std::isfinite(score.cv_nmse) && score.note.empty())
            score.note = "evaluator returned a non-finite score";
        result.subset_scores.push_back(std::move(score));
    }

    const SubsetScore* best = nullptr;
    for (const auto& s : result.subset_scores) {
        if (!best) {
            best = &s;
            continue;
        }
        if (s.cv_nmse < best->cv_nmse) {
            best = &s;
        } else if (s.cv_nmse == best->cv_nmse) {
            if (s.subset.size() < best->subset.size() ||
                (s.subset.size() == best->subset.size() && s.subset < best->subset)) {
                best = &s;
            }
        }
    }
    if (!std::isfinite(best->cv_nmse))
        throw NumericError("exhaustive_search: every subset evaluation failed");
    result.best_subset = best->subset;
    return result;
}

}  // namespace specrange
