#pragma once

// Test-side oracles and synthetic data generators. Everything here is an
// independent route to the quantities the library computes: the clustering
// oracle re-derives min-linkage similarities from scratch at every step, the
// PCA tail is eigenvalue mass rather than a reconstruction residual, and the
// generators build data with known ground truth.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "linalg.hpp"
#include "spectra.hpp"

namespace specrange::oracles {

// ---- brute-force contiguity-constrained clustering ----------------------

struct BruteMerge {
    int left_lo, left_hi;    // inclusive variable intervals of the merged pair
    int right_lo, right_hi;
    double similarity;
};

// From-scratch re-computation: at every step, evaluate the min absolute
// correlation over all cross-cluster variable pairs for every adjacent pair,
// merge the leftmost maximum. No incremental bookkeeping.
std::vector<BruteMerge> brute_force_cluster(const Matrix& absorbance);

// ---- constructions ------------------------------------------------------

// n-vector pairs with an exact prescribed sample correlation, built by
// Gram-Schmidt from seeded Gaussian draws.
std::pair<Vector, Vector> correlated_pair(Index n, double rho, std::uint64_t seed);

// Gaussian peak over `n` points, centered at `center` with width `width`.
Vector gaussian_peak(Index n, double center, double width);

// Stack of Gaussian-peak sources, centered rows; when decorrelate is set the
// rows are Gram-Schmidt orthogonalized so their sample correlations vanish.
// Rows are scaled to unit sample variance.
Matrix peak_sources(Index n, const std::vector<double>& centers,
                    const std::vector<double>& widths, bool decorrelate);

// Eigenvalue-mass route to the rank-k reconstruction error: the fraction of
// covariance spectrum mass beyond the first k eigenvalues.
double pca_tail_energy(const Matrix& Z, int k);

// Min over greedily matched |corr(recovered_i, truth_j)| pairs.
double min_matched_abs_correlation(const Matrix& recovered, const Matrix& truth);

// True iff every row and column has exactly one entry with |.| > hi and all
// remaining entries have |.| < lo.
bool is_signed_permutation(const Matrix& m, double hi, double lo);

// ---- synthetic datasets -------------------------------------------------

// Spectra composed of `n_bands` Gaussian bands with random per-sample
// amplitudes; the target is a (nonlinear if requested) function of the
// amplitude of `informative_band`. Wavelength axis starts at 800 nm.
struct BandData {
    SpectraSet spectra;
    std::pair<double, double> informative_range;  // wavelengths of the band
};
BandData band_dataset(Index n_samples, Index n_vars, int n_bands, int informative_band,
                      bool nonlinear_target, double noise, std::uint64_t seed);

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed);

// Bivariate Gaussian sample with correlation rho.
std::pair<Matrix, Vector> bivariate_gaussian(Index n, double rho, std::uint64_t seed);

}  // namespace specrange::oracles
