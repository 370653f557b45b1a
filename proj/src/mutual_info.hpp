#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace specrange {

enum class JointMetric {
    euclidean,   // l2 on the joint vector, with the ball-volume correction
    max_blocks,  // max of the per-block l2 distances (product norm)
};

struct KsgOptions {
    int k_neighbors = 6;
    JointMetric metric = JointMetric::euclidean;
    // Deterministic tie-breaking jitter of magnitude 1e-10 (features are
    // standardized first, so the scale is 1).
    std::uint64_t jitter_seed = 0x5eed5eed5eed5eedULL;
};

// Kraskov-Stoegbauer-Grassberger (variant 1) mutual information estimate, in
// nats, between the d-dimensional block X and the scalar y. Each column and
// the target are standardized before neighbor search; the estimate may be
// slightly negative and is returned unclamped.
double ksg_mi(const Matrix& X, const Vector& y, const KsgOptions& opts = {});
double ksg_mi(const Matrix& X, const Vector& y, int k_neighbors);

struct ForwardSelection {
    std::vector<int> order;              // selected feature indices, in order
    std::vector<double> mi_trajectory;   // joint MI of the first i+1 features with y
};

// Greedy forward selection: step 1 maximizes single-feature MI, later steps
// maximize the joint MI with everything already selected. The MI trajectory
// may decrease (estimator artifact); it is never used as a stopping rule.
// Ties go to the lowest feature index.
ForwardSelection forward_select(const Matrix& features, const Vector& y, int P,
                                const KsgOptions& opts = {});

struct SubsetScore {
    std::vector<int> subset;  // sorted feature indices
    double cv_nmse = 0.0;
    std::string note;         // failure reason when cv_nmse is infinite
};

struct SelectionResult {
    std::vector<int> forward_order;
    std::vector<double> mi_trajectory;
    std::vector<int> best_subset;
    std::vector<SubsetScore> subset_scores;  // every evaluated subset
    std::string evaluator_id;
};

// Model-evaluation contract: returns the CV NMSE of a model built on the
// given feature subset (performing its own hyperparameter selection).
using SubsetEvaluator = std::function<double(const std::vector<int>&)>;

// Evaluates every non-empty subset of the candidates (2^P - 1 calls).
// Best subset minimizes CV NMSE; ties prefer the smaller subset, then the
// lexicographically smallest sorted index list. A failing evaluator scores
// that subset infinite; only all subsets failing is fatal.
SelectionResult exhaustive_search(const std::vector<int>& candidates,
                                  const SubsetEvaluator& evaluator,
                                  const std::string& evaluator_id,
                                  const ForwardSelection* forward = nullptr);

}  // namespace specrange
