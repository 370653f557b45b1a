#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace specrange {

// Normalized mean squared error over an evaluation set: mean squared residual
// divided by the sample variance (n-1 denominator) of y_true. Predicting the
// mean of y_true therefore scores (Q-1)/Q.
double nmse(const Eigen::Ref<const Vector>& y_true, const Eigen::Ref<const Vector>& y_pred);

// ------------------------------------------------------------------ OLS

struct OlsModel {
    Vector weights;
    double intercept = 0.0;
};

// Minimum-norm least squares with intercept; rank decided by singular values
// above 1e-10 times the largest.
OlsModel fit_ols(const Matrix& X, const Vector& y);
Vector predict(const OlsModel& model, const Matrix& X);

// ----------------------------------------------------------------- PLSR

struct PlsrModel {
    int n_components = 0;          // components actually extracted
    int requested_components = 0;  // may exceed n_components when deflation degenerates
    bool truncated = false;
    Matrix x_weights;   // d x a
    Matrix x_loadings;  // d x a
    Vector y_loadings;  // a
    Vector coefficients;  // d, regression vector on centered data
    Vector x_mean;
    double y_mean = 0.0;
};

// PLS1 by iterative deflation on centered data.
PlsrModel fit_plsr(const Matrix& X, const Vector& y, int n_components);
Vector predict(const PlsrModel& model, const Matrix& X);

// --------------------------------------------------------------- LS-SVM

struct LsSvmModel {
    Vector alphas;
    double bias = 0.0;
    Matrix support_inputs;  // standardized training features
    double gamma = 0.0;     // regularization
    double sigma = 0.0;     // RBF width, k(x,z) = exp(-|x-z|^2 / (2 sigma^2))
    Vector feature_mean;
    Vector feature_scale;
    bool ill_conditioned = false;
    double kkt_residual = 0.0;  // relative residual of the saddle system
};

LsSvmModel fit_lssvm(const Matrix& X, const Vector& y, double gamma, double sigma);
Vector predict(const LsSvmModel& model, const Matrix& X);

// ------------------------------------------------------------- CV folds

struct FoldSpec {
    std::vector<std::vector<Index>> folds;  // validation indices per fold
    std::string scheme;

    std::vector<Index> train_indices(std::size_t fold) const;
    std::vector<std::size_t> sizes() const;
};

// Contiguous blocks in dataset order, sized as evenly as possible
// (e.g. 57/57/58 for 172 samples in 3 folds).
FoldSpec contiguous_folds(Index n, int folds);
// Seedable shuffled assignment, available behind a flag.
FoldSpec shuffled_folds(Index n, int folds, std::uint64_t seed);

// -------------------------------------------------------- LS-SVM tuning

struct LsSvmGrid {
    std::vector<double> gammas;
    std::vector<double> sigmas;

    // gamma in 10^{-2..6} (9 points); sigma = sqrt(d) * 10^{-1..2} (7 points).
    static LsSvmGrid defaults(int n_features);
};

struct LsSvmTuning {
    double gamma = 0.0;
    double sigma = 0.0;
    double cv_nmse = 0.0;
};

// Grid search minimizing mean fold NMSE; ties prefer smaller gamma, then
// larger sigma. Fold failures score that grid point infinite.
LsSvmTuning cv_tune_lssvm(const Matrix& X, const Vector& y, const FoldSpec& folds,
                          const LsSvmGrid& grid);
LsSvmTuning cv_tune_lssvm(const Matrix& X, const Vector& y, int folds, const LsSvmGrid& grid);

}  // namespace specrange
