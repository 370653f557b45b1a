// Acceptance suite: one line per criterion, [PASS]/[FAIL]/[SKIP], nonzero
// exit when anything fails. Criteria 1-10 and 12 run fully offline on
// synthetic data; criterion 11 needs the Tecator benchmark and is skipped
// with a notice when neither the network nor a cached/local copy is
// available (set SPECRANGE_TECATOR_SOURCE to a local copy to enable it).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cluster.hpp"
#include "ica.hpp"
#include "models.hpp"
#include "mutual_info.hpp"
#include "pipeline.hpp"
#include "spectra.hpp"
#include "support/oracles.hpp"
#include "tecator.hpp"

using namespace specrange;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

void run_criterion(int number, const std::string& name,
                   const std::function<void(Check&)>& body) {
    const auto start = std::chrono::steady_clock::now();
    Check check;
    try {
        body(check);
    } catch (const std::exception& e) {
        check.ok = false;
        check.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream line;
    line << (check.ok ? "[PASS]" : "[FAIL]") << " criterion " << number << ": " << name
         << "  (" << std::fixed << secs << "s)";
    if (!check.ok) {
        line << "  -- " << check.detail;
        ++g_failures;
    }
    std::cout << line.str() << std::endl;
}

void skip_criterion(int number, const std::string& name, const std::string& why) {
    std::cout << "[SKIP] criterion " << number << ": " << name << "  -- " << why
              << std::endl;
}

SpectraSet wrap(const Matrix& absorbance) {
    SpectraSet s;
    s.absorbance = absorbance;
    s.wavelengths = Vector::LinSpaced(absorbance.cols(), 850.0,
                                      850.0 + 2.0 * (absorbance.cols() - 1));
    s.target = Vector::LinSpaced(absorbance.rows(), 0.0, 1.0);
    return s;
}

fs::path scratch_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() /
                     ("specrange_acceptance_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

// ---------------------------------------------------------------- 1 & 2

void criterion_clustering_oracle(Check& check) {
    std::mt19937_64 seeder(1000);
    for (int run = 0; run < 200; ++run) {
        const Index p = 3 + static_cast<Index>(seeder() % 10);  // 3..12
        const Matrix m = oracles::random_matrix(18, p, seeder());
        const ClusterTree tree = build_tree(wrap(m));
        const auto oracle = oracles::brute_force_cluster(m);
        check.require(tree.merges.size() == oracle.size(), "merge count mismatch");
        if (!check.ok) return;
        for (std::size_t t = 0; t < oracle.size(); ++t) {
            const auto l = tree.node_interval[tree.merges[t].left_id];
            const auto r = tree.node_interval[tree.merges[t].right_id];
            const bool same = l.first == oracle[t].left_lo && l.second == oracle[t].left_hi &&
                              r.first == oracle[t].right_lo && r.second == oracle[t].right_hi;
            check.require(same, "merge sequence diverges at run " + std::to_string(run) +
                                    ", step " + std::to_string(t));
            if (!check.ok) return;
        }
    }
}

void criterion_cut_consistency(Check& check) {
    std::mt19937_64 seeder(2000);
    for (int run = 0; run < 50; ++run) {
        const Index p = 4 + static_cast<Index>(seeder() % 20);
        const Matrix m = oracles::random_matrix(15, p, seeder());
        const ClusterTree tree = build_tree(wrap(m));
        for (int M = 1; M <= static_cast<int>(p); ++M) {
            const Clustering c = cut(tree, M);
            check.require(c.num_clusters() == M, "cut produced wrong cluster count");
            check.require(c.boundaries.front() == 0 &&
                              c.boundaries.back() == static_cast<int>(p),
                          "cut does not cover the variable range");
            for (int j = 0; j < M; ++j)
                check.require(c.boundaries[j] < c.boundaries[j + 1],
                              "empty or non-contiguous interval");
        }
        for (int M = 1; M < static_cast<int>(p); ++M) {
            const auto a = cut(tree, M).boundaries;
            const auto b = cut(tree, M + 1).boundaries;
            std::vector<int> diff;
            std::set_difference(b.begin(), b.end(), a.begin(), a.end(),
                                std::back_inserter(diff));
            check.require(diff.size() == 1, "cut(M) vs cut(M+1) differ by more than one");
        }
        if (!check.ok) return;
    }
}

// -------------------------------------------------------------------- 3

void criterion_ica_recovery(Check& check) {
    const Matrix S_true = oracles::peak_sources(200, {30.0, 100.0, 170.0},
                                                {5.0, 10.0, 20.0}, true);
    std::mt19937_64 rng(3000);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::normal_distribution<double> gauss;
    int passes = 0;
    for (int seed = 0; seed < 20; ++seed) {
        Matrix A_true(10, 3);
        do {
            for (Index i = 0; i < 10; ++i)
                for (Index j = 0; j < 3; ++j) A_true(i, j) = unif(rng);
        } while (Eigen::JacobiSVD<Matrix>(A_true).singularValues()(2) <
                 0.1 * Eigen::JacobiSVD<Matrix>(A_true).singularValues()(0));
        Matrix Z = A_true * S_true;
        const double noise = 0.001 * Z.cwiseAbs().maxCoeff();
        for (Index i = 0; i < Z.rows(); ++i)
            for (Index j = 0; j < Z.cols(); ++j) Z(i, j) += noise * gauss(rng);

        IcaOptions opts;
        opts.seed = static_cast<std::uint64_t>(seed);
        const IcaModel model = fast_ica(Z, 3, opts);
        const double min_corr = oracles::min_matched_abs_correlation(model.sources, S_true);
        const Matrix WA = model.rotation * (model.whitening.projection * A_true);
        if (model.converged && min_corr > 0.98 &&
            oracles::is_signed_permutation(WA, 0.9, 0.1))
            ++passes;
    }
    check.require(passes >= 18, "only " + std::to_string(passes) + "/20 seeds recovered");
}

// -------------------------------------------------------------------- 4

void criterion_reconstruction_curve(Check& check) {
    const Matrix S = oracles::peak_sources(220, {20, 60, 100, 140, 190},
                                           {4, 7, 9, 12, 6}, true);
    Matrix A = oracles::random_matrix(14, 5, 400);
    Matrix Z = A * S;
    std::mt19937_64 rng(401);
    std::normal_distribution<double> g;
    for (Index i = 0; i < Z.rows(); ++i)
        for (Index j = 0; j < Z.cols(); ++j) Z(i, j) += 1e-3 * g(rng);

    const auto choice = choose_k(Z, 0.5, 12);
    for (std::size_t i = 1; i < choice.error_curve.size(); ++i)
        check.require(choice.error_curve[i] <= choice.error_curve[i - 1] + 1e-9,
                      "error curve increases at k=" + std::to_string(i + 1));
    for (std::size_t i = 0; i < choice.error_curve.size(); ++i) {
        const double tail = oracles::pca_tail_energy(Z, static_cast<int>(i) + 1);
        check.require(std::abs(choice.error_curve[i] - tail) < 1e-6,
                      "curve departs from PCA tail at k=" + std::to_string(i + 1));
    }
}

// -------------------------------------------------------------------- 5

void criterion_ksg_calibration(Check& check) {
    const double rhos[3] = {0.0, 0.5, 0.9};
    for (double rho : rhos) {
        const double truth = -0.5 * std::log(1.0 - rho * rho);
        std::vector<double> estimates;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto [X, y] = oracles::bivariate_gaussian(5000, rho, 500 + seed);
            estimates.push_back(ksg_mi(X, y, 6));
        }
        std::nth_element(estimates.begin(), estimates.begin() + 5, estimates.end());
        const double upper = estimates[5];
        std::nth_element(estimates.begin(), estimates.begin() + 4, estimates.end());
        const double median = 0.5 * (estimates[4] + upper);
        std::ostringstream os;
        os << "rho=" << rho << ": median " << median << " vs " << truth;
        check.require(std::abs(median - truth) <= 0.05, os.str());
    }
}

// -------------------------------------------------------------------- 6

void criterion_forward_selection(Check& check) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(600 + seed);
        std::normal_distribution<double> g;
        const Index n = 1000;
        Matrix X(n, 21);  // feature 3 informative, 20 noise
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < 21; ++j) X(i, j) = g(rng);
        Vector y(n);
        for (Index i = 0; i < n; ++i) y(i) = std::sin(3.0 * X(i, 3)) + 0.1 * g(rng);
        const ForwardSelection sel = forward_select(X, y, 1, {});
        if (sel.order[0] == 3) ++hits;
    }
    check.require(hits >= 9, "V1=feature3 in only " + std::to_string(hits) + "/10 seeds");

    // Exhaustive search over P=3 candidates with a stub evaluator against an
    // independent brute-force enumeration.
    auto score = [](const std::vector<int>& s) {
        double v = 1.0;
        for (int idx : s) v += 0.61 * idx * idx - 1.7 * idx;
        return std::abs(v);
    };
    const std::vector<int> candidates{1, 4, 6};
    const auto result = exhaustive_search(candidates, score, "stub");
    std::vector<int> best_subset;
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask < 8; ++mask) {
        std::vector<int> subset;
        for (int b = 0; b < 3; ++b)
            if (mask & (1u << b)) subset.push_back(candidates[static_cast<std::size_t>(b)]);
        const double v = score(subset);
        if (v < best) {
            best = v;
            best_subset = subset;
        }
    }
    check.require(result.best_subset == best_subset, "exhaustive search winner mismatch");
    check.require(result.subset_scores.size() == 7, "exhaustive search coverage != 2^3-1");
}

// -------------------------------------------------------------------- 7

void criterion_lssvm_solver(Check& check) {
    // KKT residual across a spread of hyperparameters and data.
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Matrix X = oracles::random_matrix(35, 3, 700 + seed);
        std::mt19937_64 rng(720 + seed);
        std::normal_distribution<double> g;
        Vector y(35);
        for (Index i = 0; i < 35; ++i)
            y(i) = std::sin(X(i, 0)) - 0.4 * X(i, 1) * X(i, 2) + 0.05 * g(rng);
        const double gamma = std::pow(10.0, static_cast<double>(seed % 5) - 1.0);
        const LsSvmModel m = fit_lssvm(X, y, gamma, 1.5);
        check.require(m.kkt_residual < 1e-8,
                      "KKT residual " + std::to_string(m.kkt_residual));
    }

    // Near interpolation at gamma = 1e8 on a noiseless smooth target.
    const Matrix X = oracles::random_matrix(50, 2, 730);
    Vector y(50);
    for (Index i = 0; i < 50; ++i) y(i) = std::sin(X(i, 0)) + std::cos(X(i, 1));
    const LsSvmModel interp = fit_lssvm(X, y, 1e8, 1.0);
    check.require(nmse(y, predict(interp, X)) < 1e-6, "no near-interpolation at gamma=1e8");

    // Planted dual coefficients (sum alpha = 0) recovered at huge gamma.
    const Index n = 30;
    const Matrix Xp = oracles::random_matrix(n, 2, 740);
    const double sigma = 1.8;
    Vector mean = Xp.colwise().mean();
    Vector scale(2);
    for (Index j = 0; j < 2; ++j) scale(j) = std::sqrt(sample_variance(Xp.col(j)));
    Matrix Xs = Xp.rowwise() - mean.transpose();
    Xs.array().rowwise() /= scale.transpose().array();
    Matrix K(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            K(i, j) = std::exp(-(Xs.row(i) - Xs.row(j)).squaredNorm() / (2.0 * sigma * sigma));
    Vector alpha_true = oracles::random_matrix(n, 1, 741).col(0);
    alpha_true.array() -= alpha_true.mean();
    const Vector yp = K * alpha_true + Vector::Constant(n, 0.3);
    const LsSvmModel planted = fit_lssvm(Xp, yp, 1e10, sigma);
    check.require((planted.alphas - alpha_true).cwiseAbs().maxCoeff() < 1e-3,
                  "planted alphas not recovered within 1e-3");
}

// -------------------------------------------------------------------- 8

void criterion_plsr_equals_ols(Check& check) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix X = oracles::random_matrix(20, 5, 800 + seed);
        std::mt19937_64 rng(820 + seed);
        std::normal_distribution<double> g;
        Vector y(20);
        for (Index i = 0; i < 20; ++i) y(i) = g(rng);
        const PlsrModel pls = fit_plsr(X, y, 5);
        const OlsModel ols = fit_ols(X, y);
        const double diff = (predict(pls, X) - predict(ols, X)).cwiseAbs().maxCoeff();
        check.require(diff < 1e-6, "PLSR/OLS prediction gap " + std::to_string(diff));
    }
}

// -------------------------------------------------------------------- 9

void criterion_nmse_properties(Check& check) {
    Vector y(7);
    y << 3, 1, 4, 1, 5, 9, 2;
    check.require(nmse(y, y) == 0.0, "perfect predictions not scored zero");

    const Vector mean_pred = Vector::Constant(7, y.mean());
    check.require(std::abs(nmse(y, mean_pred) - 6.0 / 7.0) < 1e-13,
                  "mean predictor not (Q-1)/Q");

    std::mt19937_64 rng(900);
    std::normal_distribution<double> g;
    Vector p(7);
    for (Index i = 0; i < 7; ++i) p(i) = y(i) + 0.5 * g(rng);
    const double base = nmse(y, p);
    const Vector ya = -1.7 * y.array() + 3.0;
    const Vector pa = -1.7 * p.array() + 3.0;
    check.require(std::abs(nmse(ya, pa) - base) < 1e-12, "affine invariance violated");
}

// ------------------------------------------------------------------- 10

void write_matrix_dataset(const fs::path& path, const SpectraSet& s) {
    std::ofstream out(path);
    for (Index j = 0; j < s.n_vars(); ++j) out << s.wavelengths(j) << ',';
    out << "target\n";
    for (Index i = 0; i < s.n_samples(); ++i) {
        for (Index j = 0; j < s.n_vars(); ++j) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.17g", s.absorbance(i, j));
            out << buf << ',';
        }
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", s.target(i));
        out << buf << "\n";
    }
}

// Wine-shaped synthetic stand-in: 124 samples x 256 wavenumbers with enough
// effective components that the 30-component ICA path is exercised.
SpectraSet wine_shaped_dataset(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> amp(0.5, 2.0);
    const Index n = 124, p = 256;
    const int bands = 40;
    Matrix basis(bands, p);
    for (int b = 0; b < bands; ++b) {
        const double center = (b + 0.5) * static_cast<double>(p) / bands;
        basis.row(b) = oracles::gaussian_peak(p, center, 4.0).transpose();
    }
    SpectraSet s;
    s.absorbance.resize(n, p);
    s.target.resize(n);
    for (Index i = 0; i < n; ++i) {
        Vector a(bands);
        for (int b = 0; b < bands; ++b) a(b) = amp(rng);
        s.absorbance.row(i) = a.transpose() * basis;
        for (Index j = 0; j < p; ++j) s.absorbance(i, j) += 0.01 * g(rng);
        s.target(i) = std::sin(2.0 * a(10)) + 0.5 * a(25);
    }
    // Mid-infrared axis: decreasing wavenumbers, 4000 down to 400 1/cm.
    s.wavelengths = Vector::LinSpaced(p, 4000.0, 400.0);
    s.axis_unit = AxisUnit::wavenumber;
    return s;
}

PipelineConfig wine_synthetic_config(const fs::path& csv, const fs::path& out,
                                     PipelineKind kind) {
    PipelineConfig cfg = preset_config("wine-table2");
    cfg.dataset.path = csv.string();
    cfg.pipeline = kind;
    cfg.seed = 424242;
    cfg.output_dir = out.string();
    // Compact grid keeps the 127-subset exhaustive search quick.
    LsSvmGrid grid;
    grid.gammas = {0.1, 10.0, 1000.0};
    grid.sigmas = {1.0, 4.0, 16.0};
    cfg.params.lssvm_grid = grid;
    return cfg;
}

void criterion_determinism(Check& check) {
    const fs::path dir = scratch_dir() / "determinism";
    fs::create_directories(dir);
    const fs::path csv = dir / "wine_shaped.csv";
    write_matrix_dataset(csv, wine_shaped_dataset(777));

    PipelineConfig cfg = wine_synthetic_config(csv, dir / "run", PipelineKind::cluster_mi_lssvm);
    cfg.params.cluster.m_range = {1, 64};  // bounded sweep keeps this quick

    run_pipeline(cfg);
    json first = load_json_file((dir / "run" / "report.json").string());
    run_pipeline(cfg);
    json second = load_json_file((dir / "run" / "report.json").string());
    first.erase("timings");
    second.erase("timings");
    check.require(first.dump() == second.dump(),
                  "reports differ between identical runs");
}

// ------------------------------------------------------------------- 12

void criterion_wine_preset_structural(Check& check) {
    const fs::path dir = scratch_dir() / "wine_preset";
    fs::create_directories(dir);
    const fs::path csv = dir / "wine_shaped.csv";
    write_matrix_dataset(csv, wine_shaped_dataset(778));

    const PipelineConfig cfg =
        wine_synthetic_config(csv, dir / "run", PipelineKind::ica_mi_lssvm);
    const json report = run_pipeline(cfg);

    check.require(report["dataset"]["n_train"].get<int>() == 91, "train size != 91");
    check.require(report["dataset"]["n_test"].get<int>() == 30, "test size != 30");
    check.require(report["dataset"]["n_excluded"].get<int>() == 3, "excluded != 3");
    check.require(report["dataset"]["axis_unit"] == "wavenumber", "axis unit not preserved");

    const json& proj = report["stages"]["projection"];
    check.require(proj["k"].get<int>() == 30, "ICA did not run the 30-component path");
    check.require(proj["normalize_rows"].get<bool>(), "row normalization not applied");

    for (const char* key :
         {"schema_version", "method", "config", "dataset", "stages",
          "selected_wavelength_ranges", "selected_feature_indices", "n_latent_variables",
          "plot_data", "warnings", "timings"})
        check.require(report.contains(key), std::string("report missing key ") + key);
    check.require(report["stages"].contains("selection") &&
                      report["stages"].contains("fit"),
                  "stage artifacts missing");
    check.require(std::isfinite(report["stages"]["fit"]["test_nmse"].get<double>()),
                  "test NMSE not finite");
}

// ------------------------------------------------------------------- 11

std::optional<SpectraSet> try_fetch_tecator(std::string& origin) {
    const fs::path cache = scratch_dir() / "tecator-cache";
    if (const char* env = std::getenv("SPECRANGE_TECATOR_SOURCE")) {
        origin = env;
        try {
            return fetch_tecator(env, cache.string());
        } catch (const std::exception& e) {
            std::cout << "  note: SPECRANGE_TECATOR_SOURCE failed: " << e.what()
                      << std::endl;
        }
    }
    origin = kTecatorDefaultUrl;
    try {
        return fetch_tecator("", cache.string());
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void criterion_tecator_table1(Check& check, const fs::path& csv_path) {
    const fs::path dir = scratch_dir() / "tecator";
    fs::create_directories(dir);

    auto run_kind = [&](PipelineKind kind) {
        PipelineConfig cfg = preset_config("tecator-table1");
        cfg.dataset.tecator_fetch = false;
        cfg.dataset.path = csv_path.string();
        cfg.pipeline = kind;
        cfg.seed = 31415;
        cfg.output_dir = (dir / to_string(kind)).string();
        return run_pipeline(cfg);
    };

    const json plsr = run_kind(PipelineKind::plsr_baseline);
    const double plsr_nmse = plsr["stages"]["fit"]["test_nmse"].get<double>();
    check.require(plsr_nmse <= 0.030,
                  "PLSR test NMSE " + std::to_string(plsr_nmse) + " > 0.030");
    std::cout << "  tecator plsr_baseline: test NMSE " << plsr_nmse << ", "
              << plsr["n_latent_variables"].get<int>() << " components" << std::endl;

    const json full = run_kind(PipelineKind::lssvm_full);
    const double full_nmse = full["stages"]["fit"]["test_nmse"].get<double>();
    check.require(full_nmse <= 0.020,
                  "full LS-SVM test NMSE " + std::to_string(full_nmse) + " > 0.020");
    check.require(full["n_latent_variables"].get<int>() == 100, "full LS-SVM not on 100 vars");
    std::cout << "  tecator lssvm_full: test NMSE " << full_nmse << std::endl;

    const json clu = run_kind(PipelineKind::cluster_mi_lssvm);
    const double clu_nmse = clu["stages"]["fit"]["test_nmse"].get<double>();
    check.require(clu_nmse <= 0.020,
                  "clustering pipeline test NMSE " + std::to_string(clu_nmse) + " > 0.020");
    const int subset_size = static_cast<int>(clu["selected_feature_indices"].size());
    check.require(subset_size >= 3 && subset_size <= 8,
                  "selected subset size " + std::to_string(subset_size) + " outside [3,8]");
    const int m_chosen = clu["stages"]["projection"]["M"].get<int>();
    check.require(m_chosen >= 15 && m_chosen <= 40,
                  "cluster count " + std::to_string(m_chosen) + " outside [15,40]");
    bool hits_930 = false;
    for (const auto& r : clu["selected_wavelength_ranges"]) {
        if (r[1].get<double>() >= 920.0 && r[0].get<double>() <= 940.0) hits_930 = true;
    }
    check.require(hits_930, "no selected range intersects 920-940 nm");
    std::cout << "  tecator cluster_mi_lssvm: test NMSE " << clu_nmse << ", M=" << m_chosen
              << ", subset size " << subset_size << std::endl;

    const json ica = run_kind(PipelineKind::ica_mi_lssvm);
    const double ica_nmse = ica["stages"]["fit"]["test_nmse"].get<double>();
    check.require(ica_nmse <= 0.035,
                  "ICA pipeline test NMSE " + std::to_string(ica_nmse) + " > 0.035");
    check.require(ica["stages"]["projection"]["k"].get<int>() <= 12, "ICA k exceeds cap 12");
    std::cout << "  tecator ica_mi_lssvm: test NMSE " << ica_nmse << ", k="
              << ica["stages"]["projection"]["k"].get<int>() << std::endl;
}

}  // namespace

int main() {
    std::cout << "specrange acceptance suite" << std::endl;

    run_criterion(1, "clustering merge sequence equals brute-force oracle (200 datasets)",
                  criterion_clustering_oracle);
    run_criterion(2, "contiguity and cut consistency", criterion_cut_consistency);
    run_criterion(3, "ICA recovery of peak sources over 20 seeds", criterion_ica_recovery);
    run_criterion(4, "reconstruction error curve monotone and equals PCA tail",
                  criterion_reconstruction_curve);
    run_criterion(5, "KSG estimator calibration on bivariate Gaussians",
                  criterion_ksg_calibration);
    run_criterion(6, "forward selection and exhaustive search correctness",
                  criterion_forward_selection);
    run_criterion(7, "LS-SVM solver KKT residual, interpolation and planted recovery",
                  criterion_lssvm_solver);
    run_criterion(8, "PLSR equals OLS at full rank", criterion_plsr_equals_ols);
    run_criterion(9, "NMSE properties", criterion_nmse_properties);
    run_criterion(10, "end-to-end determinism of preset runs", criterion_determinism);

    std::string origin;
    const auto tecator = try_fetch_tecator(origin);
    if (tecator) {
        // Materialize as CSV once so all four runs share the identical split.
        const fs::path csv = scratch_dir() / "tecator.csv";
        write_matrix_dataset(csv, *tecator);
        run_criterion(11, "Tecator Table-1 tolerance bands",
                      [&](Check& check) { criterion_tecator_table1(check, csv); });
    } else {
        skip_criterion(11, "Tecator Table-1 tolerance bands",
                       "Tecator unavailable (no network/cache; tried " + origin +
                           "; set SPECRANGE_TECATOR_SOURCE to a local copy)");
    }

    run_criterion(12, "wine-table2 preset structural run on synthetic data",
                  criterion_wine_preset_structural);

    std::error_code ec;
    fs::remove_all(scratch_dir(), ec);

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) FAILED" << std::endl;
        return 1;
    }
    std::cout << "all runnable criteria passed" << std::endl;
    return 0;
}
