#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace specrange {

// PCA whitening of a signal matrix Z (rows = signals, columns = observations).
// Rows of Z are centered by their own means; the projection maps centered
// signals to k rows with zero mean and identity covariance (n-1 denominator).
struct Whitening {
    Matrix projection;   // k x p:  D^{-1/2} E^T
    Matrix inverse;      // p x k:  E D^{1/2}
    Vector eigenvalues;  // k retained covariance eigenvalues, descending
    double total_variance = 0.0;  // trace of the full covariance
    int rank = 0;                 // usable numerical rank
};

struct WhitenResult {
    Matrix whitened;  // k x n
    Whitening transform;
};

WhitenResult whiten(const Matrix& Z, int k);

struct IcaOptions {
    int max_iter = 1000;
    double tol = 1e-4;
    std::uint64_t seed = 0;
    bool stabilized = true;  // halve the step after 10 non-improving iterations
};

// Symmetric FastICA with the cubic nonlinearity g(u) = u^3.
struct IcaModel {
    Matrix mixing;    // p x k (A): column j = coefficients of source j per spectrum
    Matrix unmixing;  // k x p (W = rotation * whitening.projection)
    Matrix sources;   // k x n (S): unit-variance rows, largest-magnitude entry positive
    Matrix rotation;  // k x k orthonormal rows in whitened space
    Whitening whitening;
    int k = 0;
    bool converged = false;
    int iterations = 0;
    double final_delta = 0.0;  // last value of the convergence criterion

    // Model with zero components; reconstructs nothing but the row means.
    static IcaModel empty(Index p, Index n);
};

IcaModel fast_ica(const Matrix& Z, int k, const IcaOptions& opts = {});

// Squared relative Frobenius error of reconstructing the row-centered Z from
// mixing * sources.
double reconstruction_error(const IcaModel& model, const Matrix& Z);

struct ComponentCountChoice {
    int k = 0;
    std::vector<double> error_curve;  // error with 1..k_max components
    bool threshold_met = false;       // false: no k <= k_max reached the threshold
};

// Smallest k whose reconstruction error is at or below the threshold; k_max
// is clamped to the usable rank. The curve is computed from actual rank-k
// reconstruction residuals, which for this whitening coincide with the ICA
// reconstruction error at any rotation.
ComponentCountChoice choose_k(const Matrix& Z, double threshold, int k_max);

// The mixing matrix as features (one row per spectrum, one column per
// component); optionally each row centered and scaled to unit variance.
Matrix projection_features(const IcaModel& model, bool normalize_rows);

// Projection coefficients of arbitrary spectra onto the model's sources:
// each row is centered by its own mean and least-squares projected onto S.
// Reproduces the mixing matrix on the training spectra.
Matrix project_spectra(const IcaModel& model, const Matrix& Z, bool normalize_rows);

}  // namespace specrange
