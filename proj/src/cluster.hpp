#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "spectra.hpp"

namespace specrange {

// |corr(x, y)| from sample moments. Symmetric, affine-invariant, in [0,1].
double abs_correlation(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y);

struct ClusterMerge {
    int left_id;        // node ids: 0..n_vars-1 are leaves, n_vars+t is merge t
    int right_id;
    double similarity;  // min-linkage |corr| at the moment of the merge
};

// Contiguous partition of the variable index range: boundaries[j] ..
// boundaries[j+1]-1 is cluster j; boundaries.front()=0, boundaries.back()=n_vars.
struct Clustering {
    std::vector<int> boundaries;

    int num_clusters() const { return static_cast<int>(boundaries.size()) - 1; }
    std::pair<int, int> interval(int j) const {  // inclusive [lo, hi]
        return {boundaries[j], boundaries[j + 1] - 1};
    }
};

// Merge history of the contiguity-constrained agglomerative clustering.
// Similarities are recorded exactly as evaluated; no monotonicity is implied.
struct ClusterTree {
    int n_vars = 0;
    std::vector<ClusterMerge> merges;                 // n_vars - 1 entries
    std::vector<std::pair<int, int>> node_interval;   // per node id, inclusive
};

// Adjacent-only agglomeration: start from singletons, repeatedly merge the
// most similar consecutive pair (ties to the leftmost), and update the
// similarity between consecutive clusters as the minimum |corr| over all
// cross-cluster variable pairs.
ClusterTree build_tree(const SpectraSet& train);

// Partition present after undoing the last M-1 merges.
Clustering cut(const ClusterTree& tree, int M);

// Column j = row-wise mean of the absorbance over interval j (the piecewise
// constant approximation of each spectrum).
Matrix cluster_features(const Matrix& absorbance, const Clustering& c);
Matrix cluster_features(const SpectraSet& s, const Clustering& c);

struct ClusterCountChoice {
    int m_best = 0;
    std::vector<int> m_values;
    std::vector<double> scores;  // mean CV NMSE per candidate M (inf = failed)
};

// Chooses the cluster count by k-fold CV of an OLS model on the cluster-mean
// features; ties break toward smaller M. Folds are contiguous blocks.
ClusterCountChoice select_num_clusters(const ClusterTree& tree, const SpectraSet& train,
                                       int folds,
                                       std::optional<std::pair<int, int>> m_range = {});

}  // namespace specrange
