#include "models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace specrange {

double nmse(const Eigen::Ref<const Vector>& y_true, const Eigen::Ref<const Vector>& y_pred) {
    if (y_true.size() != y_pred.size())
        throw InvalidArgument("nmse: length mismatch");
    if (y_true.size() < 2)
        throw InvalidArgument("nmse needs at least 2 observations");
    const double var = sample_variance(y_true);
    if (var <= 0.0)
        throw DegenerateDataError("nmse undefined: y_true has zero variance");
    const double mse = (y_pred - y_true).squaredNorm() / static_cast<double>(y_true.size());
    return mse / var;
}

// ------------------------------------------------------------------ OLS

OlsModel fit_ols(const Matrix& X, const Vector& y) {
    if (X.rows() != y.size()) throw InvalidArgument("fit_ols: row count mismatch");
    if (X.rows() < 1) throw InvalidArgument("fit_ols: empty input");

    const Vector x_mean = X.colwise().mean();
    const double y_mean = y.mean();
    const Matrix Xc = X.rowwise() - x_mean.transpose();
    const Vector yc = y.array() - y_mean;

    Eigen::BDCSVD<Matrix> svd(Xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-10);
    OlsModel model;
    model.weights = svd.solve(yc);
    model.intercept = y_mean - x_mean.dot(model.weights);
    return model;
}

Vector predict(const OlsModel& model, const Matrix& X) {
    return (X * model.weights).array() + model.intercept;
}

// ----------------------------------------------------------------- PLSR

PlsrModel fit_plsr(const Matrix& X, const Vector& y, int n_components) {
    const Index n = X.rows();
    const Index d = X.cols();
    if (n != y.size()) throw InvalidArgument("fit_plsr: row count mismatch");
    if (n_components < 1 || n_components > std::min<Index>(d, n - 1))
        throw InvalidArgument("fit_plsr: n_components must be in [1, min(d, n-1)]");

    PlsrModel model;
    model.requested_components = n_components;
    model.x_mean = X.colwise().mean();
    model.y_mean = y.mean();

    Matrix Xk = X.rowwise() - model.x_mean.transpose();
    Vector yk = y.array() - model.y_mean;

    model.x_weights.resize(d, n_components);
    model.x_loadings.resize(d, n_components);
    model.y_loadings.resize(n_components);

    int a = 0;
    for (; a < n_components; ++a) {
        Vector w = Xk.transpose() * yk;  // single y: covariance direction, no inner loop
        const double wn = w.norm();
        if (wn < 1e-12 * std::max(1.0, Xk.norm())) {
            model.truncated = true;
            break;
        }
        w /= wn;
        const Vector t = Xk * w;
        const double tt = t.squaredNorm();
        if (tt <= 0.0) {
            model.truncated = true;
            break;
        }
        const Vector p = Xk.transpose() * t / tt;
        const double q = yk.dot(t) / tt;
        model.x_weights.col(a) = w;
        model.x_loadings.col(a) = p;
        model.y_loadings(a) = q;
        Xk.noalias() -= t * p.transpose();
        yk.noalias() -= q * t;
    }
    if (a == 0)
        throw DegenerateDataError("fit_plsr: X carries no covariance with y");
    model.n_components = a;
    model.x_weights.conservativeResize(d, a);
    model.x_loadings.conservativeResize(d, a);
    model.y_loadings.conservativeResize(a);

    // beta = W (P^T W)^{-1} q
    const Matrix pw = model.x_loadings.transpose() * model.x_weights;
    model.coefficients =
        model.x_weights * pw.colPivHouseholderQr().solve(model.y_loadings);
    return model;
}

Vector predict(const PlsrModel& model, const Matrix& X) {
    return ((X.rowwise() - model.x_mean.transpose()) * model.coefficients).array() +
           model.y_mean;
}

// --------------------------------------------------------------- LS-SVM

namespace {

Matrix rbf_kernel(const Matrix& A, const Matrix& B, double sigma) {
    // K_ij = exp(-|a_i - b_j|^2 / (2 sigma^2))
    const Vector a2 = A.rowwise().squaredNorm();
    const Vector b2 = B.rowwise().squaredNorm();
    Matrix K = -2.0 * (A * B.transpose());
    K.colwise() += a2;
    K.rowwise() += b2.transpose();
    return (-K / (2.0 * sigma * sigma)).array().exp();
}

Matrix standardize_rows(const Matrix& X, const Vector& mean, const Vector& scale) {
    Matrix out = X.rowwise() - mean.transpose();
    out.array().rowwise() /= scale.transpose().array();
    return out;
}

}  // namespace

LsSvmModel fit_lssvm(const Matrix& X, const Vector& y, double gamma, double sigma) {
    const Index n = X.rows();
    if (n != y.size()) throw InvalidArgument("fit_lssvm: row count mismatch");
    if (n < 2) throw InvalidArgument("fit_lssvm needs at least 2 samples");
    if (gamma <= 0.0 || sigma <= 0.0)
        throw InvalidArgument("fit_lssvm: gamma and sigma must be positive");

    LsSvmModel model;
    model.gamma = gamma;
    model.sigma = sigma;
    model.feature_mean = X.colwise().mean();
    model.feature_scale.resize(X.cols());
    for (Index j = 0; j < X.cols(); ++j) {
        const double sd = std::sqrt(sample_variance(X.col(j)));
        model.feature_scale(j) = sd > 1e-300 ? sd : 1.0;
    }
    model.support_inputs = standardize_rows(X, model.feature_mean, model.feature_scale);

    Matrix H = rbf_kernel(model.support_inputs, model.support_inputs, sigma);
    H.diagonal().array() += 1.0 / gamma;

    // Saddle system [[0, 1^T],[1, H]] [b; alpha] = [0; y], solved through the
    // positive definite block: H eta = 1, H nu = y, b = (1^T nu)/(1^T eta).
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success)
        throw NumericError("fit_lssvm: kernel system factorization failed");
    const double rc = llt.rcond();
    model.ill_conditioned = rc < 1e-12;

    const Vector ones = Vector::Ones(n);
    const Vector eta = llt.solve(ones);
    const Vector nu = llt.solve(y);
    const double denom = ones.dot(eta);
    if (!std::isfinite(denom) || std::abs(denom) < 1e-300)
        throw NumericError("fit_lssvm: degenerate bias equation");
    model.bias = ones.dot(nu) / denom;
    model.alphas = nu - model.bias * eta;
    if (!model.alphas.allFinite() || !std::isfinite(model.bias))
        throw NumericError("fit_lssvm: non-finite solution");

    const double top = ones.dot(model.alphas);
    const Vector residual = H * model.alphas + model.bias * ones - y;
    const double ynorm = std::max(y.norm(), 1e-300);
    model.kkt_residual = std::sqrt(residual.squaredNorm() + top * top) / ynorm;
    return model;
}

Vector predict(const LsSvmModel& model, const Matrix& X) {
    const Matrix Xs = standardize_rows(X, model.feature_mean, model.feature_scale);
    const Matrix K = rbf_kernel(Xs, model.support_inputs, model.sigma);
    return (K * model.alphas).array() + model.bias;
}

// ------------------------------------------------------------- CV folds

std::vector<Index> FoldSpec::train_indices(std::size_t fold) const {
    std::vector<Index> out;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        if (f == fold) continue;
        out.insert(out.end(), folds[f].begin(), folds[f].end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> FoldSpec::sizes() const {
    std::vector<std::size_t> out;
    out.reserve(folds.size());
    for (const auto& f : folds) out.push_back(f.size());
    return out;
}

FoldSpec contiguous_folds(Index n, int folds) {
    if (folds < 2) throw InvalidArgument("need at least 2 folds");
    if (n < folds) throw InvalidArgument("fewer samples than folds");
    FoldSpec spec;
    spec.scheme = "contiguous";
    const Index base = n / folds;
    const Index extra = n % folds;
    Index pos = 0;
    for (int f = 0; f < folds; ++f) {
        // Remainder goes to the trailing folds (57/57/58 for 172 in 3 folds).
        const Index len = base + (f >= folds - extra ? 1 : 0);
        std::vector<Index> idx(static_cast<std::size_t>(len));
        std::iota(idx.begin(), idx.end(), pos);
        pos += len;
        spec.folds.push_back(std::move(idx));
    }
    return spec;
}

FoldSpec shuffled_folds(Index n, int folds, std::uint64_t seed) {
    FoldSpec spec = contiguous_folds(n, folds);
    spec.scheme = "shuffled";
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::size_t pos = 0;
    for (auto& fold : spec.folds) {
        for (auto& idx : fold) idx = perm[pos++];
        std::sort(fold.begin(), fold.end());
    }
    return spec;
}

// -------------------------------------------------------- LS-SVM tuning

LsSvmGrid LsSvmGrid::defaults(int n_features) {
    LsSvmGrid grid;
    for (int e = -2; e <= 6; ++e) grid.gammas.push_back(std::pow(10.0, e));
    const double scale = std::sqrt(static_cast<double>(std::max(1, n_features)));
    for (int h = -2; h <= 4; ++h) grid.sigmas.push_back(scale * std::pow(10.0, 0.5 * h));
    return grid;
}

namespace {

Matrix rows_of(const Matrix& X, const std::vector<Index>& idx) {
    Matrix out(static_cast<Index>(idx.size()), X.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Index>(r)) = X.row(idx[r]);
    return out;
}

Vector entries_of(const Vector& y, const std::vector<Index>& idx) {
    Vector out(static_cast<Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) out(static_cast<Index>(r)) = y(idx[r]);
    return out;
}

}  // namespace

LsSvmTuning cv_tune_lssvm(const Matrix& X, const Vector& y, const FoldSpec& folds,
                          const LsSvmGrid& grid) {
    if (grid.gammas.empty() || grid.sigmas.empty())
        throw InvalidArgument("cv_tune_lssvm: empty grid");
    if (folds.folds.size() < 2) throw InvalidArgument("cv_tune_lssvm: need at least 2 folds");

    const double inf = std::numeric_limits<double>::infinity();
    LsSvmTuning best{0.0, 0.0, inf};
    bool found = false;

    for (double gamma : grid.gammas) {
        for (double sigma : grid.sigmas) {
            double total = 0.0;
            bool failed = false;
            for (std::size_t f = 0; f < folds.folds.size() && !failed; ++f) {
                const auto tr = folds.train_indices(f);
                const auto& va = folds.folds[f];
                try {
                    const LsSvmModel m =
                        fit_lssvm(rows_of(X, tr), entries_of(y, tr), gamma, sigma);
                    total += nmse(entries_of(y, va), predict(m, rows_of(X, va)));
                } catch (const Error&) {
                    failed = true;
                }
            }
            const double score = failed ? inf : total / static_cast<double>(folds.folds.size());
            // Scanning gammas then sigmas ascending, keeping the first strict
            // improvement prefers smaller gamma on ties; within the same
            // gamma a tied larger sigma replaces (smoother model).
            if (!found || score < best.cv_nmse ||
                (score == best.cv_nmse && gamma == best.gamma && sigma > best.sigma)) {
                best = {gamma, sigma, score};
                found = true;
            }
        }
    }
    if (!std::isfinite(best.cv_nmse))
        throw NumericError("cv_tune_lssvm: every grid point failed cross-validation");
    return best;
}

LsSvmTuning cv_tune_lssvm(const Matrix& X, const Vector& y, int folds, const LsSvmGrid& grid) {
    return cv_tune_lssvm(X, y, contiguous_folds(X.rows(), folds), grid);
}

}  // namespace specrange
