#include "ica.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace specrange {

namespace {

Matrix center_rows(const Matrix& Z) {
    return Z.colwise() - Z.rowwise().mean();
}

// Orthonormalize rows: B <- (B B^T)^{-1/2} B, via SVD for stability.
Matrix symmetric_orthogonalize(const Matrix& B) {
    Eigen::JacobiSVD<Matrix> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace

WhitenResult whiten(const Matrix& Z, int k) {
    const Index p = Z.rows();
    const Index n = Z.cols();
    if (p < 1 || n < 2) throw InvalidArgument("whiten: need at least 1 signal of length 2");

    // SVD of the centered signals: Zc = U diag(s) V^T. Covariance eigenpairs
    // are (U, s^2/(n-1)); the singular values give a rank estimate whose
    // noise floor sits at machine precision rather than eigen-solver level.
    const Matrix Zc = center_rows(Z);
    Eigen::BDCSVD<Matrix> svd(Zc, Eigen::ComputeThinU);
    const Vector& s = svd.singularValues();
    const double s_max = s(0);
    if (s_max <= 0.0) throw DegenerateDataError("whiten: all signals are constant");
    int rank = 0;
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) >= 1e-10 * s_max) ++rank;

    if (k < 1 || k > rank)
        throw NumericError("whiten: k=" + std::to_string(k) +
                           " exceeds usable rank " + std::to_string(rank));

    Whitening w;
    w.rank = rank;
    w.total_variance = s.array().square().sum() / static_cast<double>(n - 1);
    w.eigenvalues.resize(k);
    w.projection.resize(k, p);
    w.inverse.resize(p, k);
    for (int j = 0; j < k; ++j) {
        const double lam = s(j) * s(j) / static_cast<double>(n - 1);
        w.eigenvalues(j) = lam;
        const Vector e = svd.matrixU().col(j);
        w.projection.row(j) = e.transpose() / std::sqrt(lam);
        w.inverse.col(j) = e * std::sqrt(lam);
    }
    return {w.projection * Zc, std::move(w)};
}

IcaModel IcaModel::empty(Index p, Index n) {
    IcaModel m;
    m.mixing = Matrix::Zero(p, 0);
    m.unmixing = Matrix::Zero(0, p);
    m.sources = Matrix::Zero(0, n);
    m.rotation = Matrix::Zero(0, 0);
    m.converged = true;
    return m;
}

IcaModel fast_ica(const Matrix& Z, int k, const IcaOptions& opts) {
    if (k == 0) return IcaModel::empty(Z.rows(), Z.cols());

    auto [X, white] = whiten(Z, k);
    const Index n = X.cols();

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix B(k, k);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j) B(i, j) = gauss(rng);
    B = symmetric_orthogonalize(B);

    IcaModel model;
    model.k = k;
    model.whitening = std::move(white);

    double step = 1.0;
    double best_delta = std::numeric_limits<double>::infinity();
    int stalled = 0;
    double delta = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        const Matrix Y = B * X;                       // current source estimates
        const Matrix G = Y.array().cube();            // g(u) = u^3
        const Vector gp = 3.0 * Y.array().square().rowwise().mean();  // E[g'(u)]
        Matrix update = (G * X.transpose()) / static_cast<double>(n) -
                        gp.asDiagonal() * B;
        if (opts.stabilized && step != 1.0)
            update = (1.0 - step) * B + step * update;
        if (!update.allFinite())
            throw NumericError("fast_ica: non-finite values at iteration " +
                               std::to_string(it));
        const Matrix B_new = symmetric_orthogonalize(update);

        delta = 0.0;
        for (Index r = 0; r < k; ++r)
            delta = std::max(delta, 1.0 - std::abs(B_new.row(r).dot(B.row(r))));
        B = B_new;
        if (delta < opts.tol) {
            model.converged = true;
            ++it;
            break;
        }
        if (opts.stabilized) {
            if (delta < best_delta - 1e-12) {
                best_delta = delta;
                stalled = 0;
            } else if (++stalled >= 10) {
                step *= 0.5;  // cycling without progress: shorten the step
                stalled = 0;
            }
        }
    }
    model.iterations = it;
    model.final_delta = delta;

    model.sources = B * X;
    // Fix the sign indeterminacy: largest-magnitude entry of each source positive.
    for (Index r = 0; r < k; ++r) {
        Index arg = 0;
        model.sources.row(r).cwiseAbs().maxCoeff(&arg);
        if (model.sources(r, arg) < 0.0) {
            model.sources.row(r) *= -1.0;
            B.row(r) *= -1.0;
        }
    }
    model.rotation = B;
    model.unmixing = B * model.whitening.projection;
    model.mixing = model.whitening.inverse * B.transpose();
    return model;
}

double reconstruction_error(const IcaModel& model, const Matrix& Z) {
    if (model.mixing.rows() != Z.rows())
        throw InvalidArgument("reconstruction_error: shape mismatch");
    const Matrix Zc = center_rows(Z);
    const double total = Zc.squaredNorm();
    if (total <= 0.0)
        throw DegenerateDataError("reconstruction_error undefined: centered data is zero");
    if (model.k == 0) return 1.0;
    return (Zc - model.mixing * model.sources).squaredNorm() / total;
}

ComponentCountChoice choose_k(const Matrix& Z, double threshold, int k_max) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw InvalidArgument("choose_k: threshold must lie in (0,1)");
    if (k_max < 1) throw InvalidArgument("choose_k: k_max must be positive");
    const auto probe = whiten(Z, 1);
    k_max = std::min(k_max, probe.transform.rank);  // search cannot exceed the rank

    const Matrix Zc = center_rows(Z);
    const double total = Zc.squaredNorm();
    if (total <= 0.0) throw DegenerateDataError("choose_k: centered data is zero");

    const auto top = whiten(Z, k_max);
    ComponentCountChoice choice;
    choice.error_curve.reserve(k_max);
    for (int k = 1; k <= k_max; ++k) {
        // Actual residual of the rank-k reconstruction; identical to the ICA
        // reconstruction error because the rotation cancels in mixing*sources.
        const Matrix recon = top.transform.inverse.leftCols(k) * top.whitened.topRows(k);
        choice.error_curve.push_back((Zc - recon).squaredNorm() / total);
    }
    for (int k = 1; k <= k_max; ++k) {
        if (choice.error_curve[k - 1] <= threshold) {
            choice.k = k;
            choice.threshold_met = true;
            return choice;
        }
    }
    choice.k = k_max;
    choice.threshold_met = false;
    return choice;
}

Matrix projection_features(const IcaModel& model, bool normalize_rows) {
    if (!normalize_rows) return model.mixing;
    Matrix A = model.mixing;
    for (Index i = 0; i < A.rows(); ++i) {
        const double mean = A.row(i).mean();
        const double var = A.cols() > 1
                               ? (A.row(i).array() - mean).square().sum() /
                                     static_cast<double>(A.cols() - 1)
                               : 0.0;
        if (var <= 0.0)
            throw DegenerateDataError("projection_features: zero-variance mixing row " +
                                      std::to_string(i));
        A.row(i) = (A.row(i).array() - mean) / std::sqrt(var);
    }
    return A;
}

Matrix project_spectra(const IcaModel& model, const Matrix& Z, bool normalize_rows) {
    if (model.k == 0) throw InvalidArgument("project_spectra: empty model");
    if (Z.cols() != model.sources.cols())
        throw InvalidArgument("project_spectra: wavelength count mismatch");
    const Matrix Zc = center_rows(Z);
    // Least-squares coefficients onto the source basis: Zc S^T (S S^T)^{-1}.
    const Matrix SST = model.sources * model.sources.transpose();
    Matrix A = SST.ldlt().solve(model.sources * Zc.transpose()).transpose();
    if (!normalize_rows) return A;
    for (Index i = 0; i < A.rows(); ++i) {
        const double mean = A.row(i).mean();
        const double var = A.cols() > 1
                               ? (A.row(i).array() - mean).square().sum() /
                                     static_cast<double>(A.cols() - 1)
                               : 0.0;
        if (var <= 0.0)
            throw DegenerateDataError("project_spectra: zero-variance coefficient row " +
                                      std::to_string(i));
        A.row(i) = (A.row(i).array() - mean) / std::sqrt(var);
    }
    return A;
}

}  // namespace specrange
