// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "coxsel/harness/config.hpp"
#include "coxsel/harness/simulation.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <unistd.h>

using namespace coxsel;
using namespace coxsel::harness;
using coxsel::testing::fd_gradient;
using coxsel::testing::fd_jacobian;
using coxsel::testing::ks_pvalue;
using coxsel::testing::naive_loglik;
using coxsel::testing::nested_grid_max;
using coxsel::testing::random_instance;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail)
{
    std::printf("%s [%2d] %s: %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

int threads()
{
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// Log partial likelihood with the risk sets listed up front; used on dense
// grids where the direct double loop would be too slow.
struct GridLoglik
{
    const SurvivalDataset& data;
    std::vector<std::vector<int>> risk;

    explicit GridLoglik(const SurvivalDataset& d) : data(d)
    {
        for (int i = 0; i < d.n(); ++i) {
            if (d.status()[i] != 1) continue;
            std::vector<int> r;
            for (int j = 0; j < d.n(); ++j)
                if (d.time()[j] >= d.time()[i]) r.push_back(j);
            risk.push_back(std::move(r));
        }
    }

    double operator()(double b0, double b1) const
    {
        std::vector<double> eta(static_cast<size_t>(data.n())), e(eta.size());
        for (int j = 0; j < data.n(); ++j) {
            eta[static_cast<size_t>(j)] = data.x()(j, 0) * b0 + data.x()(j, 1) * b1;
            e[static_cast<size_t>(j)] = std::exp(eta[static_cast<size_t>(j)]);
        }
        double ll = 0.0;
        size_t k = 0;
        for (int i = 0; i < data.n(); ++i) {
            if (data.status()[i] != 1) continue;
            double denom = 0.0;
            for (int j : risk[k]) denom += e[static_cast<size_t>(j)];
            ll += eta[static_cast<size_t>(i)] - std::log(denom);
            ++k;
        }
        return ll;
    }
};

void criterion_derivatives()
{
    double worst_score = 0.0, worst_info = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto data = random_instance(50, 5, 5000 + seed);
        Rng rng(seed);
        Vector beta(5);
        for (int j = 0; j < 5; ++j) beta[j] = 0.5 * standard_normal(rng);
        const Vector u = score(data, beta);
        const Vector fd = fd_gradient([&](const Vector& b) { return naive_loglik(data, b); }, beta, 1e-5);
        worst_score = std::max(worst_score, (u - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff()));
        const Matrix info = information(data, beta);
        const Matrix jac = fd_jacobian([&](const Vector& b) { return Vector(score(data, b)); }, beta, 1e-5);
        const Matrix diff = info + jac; // I = -d U / d beta
        worst_info = std::max(worst_info, diff.cwiseAbs().maxCoeff() / std::max(1.0, jac.cwiseAbs().maxCoeff()));
    }
    report(1, worst_score < 1e-6 && worst_info < 1e-4, "score and information vs finite differences (100 instances)",
           "max rel err score " + fmt("%.2e", worst_score) + " (< 1e-6), information " + fmt("%.2e", worst_info) +
               " (< 1e-4)");
}

void criterion_mle_grid()
{
    int done = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; done < 20 && seed < 200; ++seed) {
        const auto data = random_instance(20, 2, 6000 + seed, 0.5, 0.2);
        const auto mle = fit_cox_mle(data);
        if (!mle.converged || mle.separation || mle.beta.cwiseAbs().maxCoeff() > 8.0) continue;
        const Vector grid = nested_grid_max([&](const Vector& b) { return naive_loglik(data, b); }, -10.0, 10.0);
        worst = std::max(worst, (grid - mle.beta).cwiseAbs().maxCoeff());
        ++done;
    }
    report(2, done == 20 && worst < 1e-4, "MLE vs nested grid search (20 instances, n=20, p=2)",
           std::to_string(done) + " instances, max |diff| " + fmt("%.2e", worst) + " (< 1e-4)");
}

void criterion_lasso()
{
    double worst_obj = 0.0;
    bool below = true;
    for (std::uint64_t k = 0; k < 20; ++k) {
        const auto data = random_instance(30, 2, 7000 + k, 0.7);
        const auto w = PenaltyWeights::ones(2);
        const double lam = (0.05 + 0.045 * static_cast<double>(k)) * lambda_max(data, w);
        const auto fit = fit_cox_lasso(data, lam, w);
        const double r = std::max(3.0, 1.2 * fit.beta.cwiseAbs().maxCoeff());
        const GridLoglik ll(data);
        double best = -kInf;
        for (int a = 0; a <= 400; ++a) {
            const double b0 = -r + 2.0 * r * a / 400;
            for (int c = 0; c <= 400; ++c) {
                const double b1 = -r + 2.0 * r * c / 400;
                best = std::max(best, ll(b0, b1) - lam * (std::abs(b0) + std::abs(b1)));
            }
        }
        const double obj = naive_loglik(data, fit.beta) - lam * fit.beta.cwiseAbs().sum();
        worst_obj = std::max(worst_obj, std::abs(obj - best));
        below = below && obj >= best - 1e-9;
    }

    double worst_kkt = 0.0; // residual relative to 1e-4 max(1, lambda)
    int fits = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const bool wide = s % 10 == 9;
        const auto data = random_instance(wide ? 40 : 100, wide ? 60 : 10, 7100 + s, wide ? 0.3 : 0.5).standardized();
        const auto w = PenaltyWeights::ones(data.p());
        const auto path = lambda_path(data, w);
        for (const auto& fit : path.fits) {
            const Vector u = score(data, fit.beta);
            const double tol = 1e-4 * std::max(1.0, fit.lambda);
            for (int j = 0; j < data.p(); ++j) {
                const double res = fit.beta[j] != 0.0 ? std::abs(u[j] - fit.lambda * (fit.beta[j] > 0 ? 1.0 : -1.0))
                                                      : std::max(0.0, std::abs(u[j]) - fit.lambda);
                worst_kkt = std::max(worst_kkt, res / tol);
            }
            ++fits;
        }
    }
    report(3, worst_obj <= 1e-3 && below && worst_kkt <= 1.0,
           "Lasso vs 401x401 grid (20 instances) and KKT on 50 paths",
           "max objective gap " + fmt("%.2e", worst_obj) + " (<= 1e-3), solver never below grid: " +
               (below ? "yes" : "no") + "; " + std::to_string(fits) + " fits, max KKT residual / tolerance " +
               fmt("%.3f", worst_kkt));
}

void criterion_psi()
{
    double worst = 0.0;
    int instances = 0;
    for (std::uint64_t s = 0; instances < 20 && s < 100; ++s) {
        const auto data = random_instance(200, 4, 8000 + s).standardized();
        const auto w = PenaltyWeights::ones(4);
        const auto fit = fit_cox_lasso(data, 0.3 * lambda_max(data, w), w);
        if (fit.active.empty()) continue;
        const auto psi = infer_exact_psi(data, fit, w, 0.1, false);
        const auto r0 = infer_refit0(data, fit, 0.1);
        if (psi.intervals.size() != r0.intervals.size()) {
            worst = kInf;
            break;
        }
        for (size_t k = 0; k < psi.intervals.size(); ++k) {
            worst = std::max({worst, std::abs(psi.intervals[k].lower - r0.intervals[k].lower),
                              std::abs(psi.intervals[k].upper - r0.intervals[k].upper),
                              std::abs(psi.intervals[k].estimate - r0.intervals[k].estimate)});
        }
        ++instances;
    }

    Matrix sigma(2, 2);
    sigma << 1.0, 0.5, 0.5, 2.0;
    Vector mu(2);
    mu << 0.3, -0.2;
    const Matrix l = Eigen::LLT<Matrix>(sigma).matrixL();
    const auto [a, b] = selection_constraints({1, 1}, Vector::Ones(2), 0.3, sigma);
    Rng rng(2024);
    std::vector<double> piv0, piv1;
    while (piv0.size() < 2000) {
        Vector z(2);
        z << standard_normal(rng), standard_normal(rng);
        const Vector y = mu + l * z;
        if (((a * y - b).array() > 0.0).any()) continue;
        const auto t0 = polyhedral_bounds(a, b, y, sigma, Vector::Unit(2, 0));
        const auto t1 = polyhedral_bounds(a, b, y, sigma, Vector::Unit(2, 1));
        piv0.push_back(truncated_normal_cdf(t0.value, mu[0], t0.sigma, t0.v_minus, t0.v_plus));
        piv1.push_back(truncated_normal_cdf(t1.value, mu[1], t1.sigma, t1.v_minus, t1.v_plus));
    }
    const double p0 = ks_pvalue(piv0), p1 = ks_pvalue(piv1);
    report(4, instances == 20 && worst <= 1e-6 && p0 > 0.01 && p1 > 0.01,
           "exact PSI without constraints vs one-step Wald; pivot uniformity",
           std::to_string(instances) + " instances, max |diff| " + fmt("%.2e", worst) + " (<= 1e-6); KS p " +
               fmt("%.3f", p0) + ", " + fmt("%.3f", p1) + " (> 0.01, 2000 draws)");
}

void criterion_debiased()
{
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto data = random_instance(150, 4, 9000 + s).standardized();
        const auto fit = fit_cox_lasso(data, 0.0, PenaltyWeights::ones(4));
        NodewiseRule rule;
        rule.c = 0.0;
        const auto nw = estimate_nodewise_inverse(data, fit.beta, rule);
        const auto db = infer_debiased(data, fit, nw, 0.1);
        const auto mle = fit_cox_mle(data);
        const auto wald = wald_ci(mle, 0.1);
        for (size_t k = 0; k < 4; ++k) {
            worst = std::max({worst, std::abs(db.intervals[k].estimate - mle.beta[static_cast<Eigen::Index>(k)]),
                              std::abs(db.intervals[k].lower - wald[k].lower),
                              std::abs(db.intervals[k].upper - wald[k].upper)});
        }
    }
    report(5, worst <= 1e-5, "debiased at lambda=0 with exact inverse vs MLE and Wald (20 instances)",
           "max |diff| " + fmt("%.2e", worst) + " (<= 1e-5)");
}

// Monte Carlo block -----------------------------------------------------------

std::vector<SummaryRow> run_grid(const json& j, std::vector<IntervalRecord>& keep)
{
    const auto cfg = parse_config(j);
    SubmodelTruthCache truth(cfg.options.n_pop_truth);
    for (const auto& e : cfg.scenarios) {
        const auto t0 = std::chrono::steady_clock::now();
        auto out = run_scenario(cfg, e, truth, fixed_lambdas_for(cfg, e), threads(), false);
        truth.release_population(e.scenario.id);
        std::cerr << "  " << e.scenario.id << ": "
                  << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
        keep.insert(keep.end(), std::make_move_iterator(out.records.begin()),
                    std::make_move_iterator(out.records.end()));
    }
    return summarize(keep);
}

const GroupStats& cell(const std::vector<SummaryRow>& rows, const std::string& scenario, const std::string& method,
                       const std::string& tuning)
{
    for (const auto& r : rows)
        if (r.block == "cell" && r.key.scenario_id == scenario && r.key.method == method && r.key.tuning == tuning)
            return r.stats;
    throw Error("no summary cell for " + scenario + " / " + method + " / " + tuning);
}

json toy_grid(json n, json p, json pc)
{
    return {{"n", std::move(n)},
            {"p", std::move(p)},
            {"rho", {0.3}},
            {"censor_target", std::move(pc)},
            {"baseline", {"weibull"}},
            {"pattern", {"realistic"}}};
}

void criteria_monte_carlo()
{
    const json options = {{"prediction", false}};
    std::cerr << "Monte Carlo: p=10 realistic design\n";
    json j = {{"scenarios", toy_grid({200, 400}, {10}, {0.0, 0.3})},
              {"methods", {"refit", "split", "debiased", "exact_psi"}},
              {"tuning_rules", {"cv_min"}},
              {"n_sim", 200},
              {"seed", 20240901},
              {"options", options}};
    std::vector<IntervalRecord> rec;
    std::vector<SummaryRow> rows;
    {
        json a = j;
        a["scenarios"] = toy_grid({400}, {10}, {0.0});
        rows = run_grid(a, rec);
        json b = j;
        b["scenarios"] = toy_grid({200}, {10}, {0.0, 0.3});
        rows = run_grid(b, rec);
    }
    const std::string s400 = "toy_n400_p10_rho0.3_pc0_weibull_realistic";
    const std::string s200 = "toy_n200_p10_rho0.3_pc0_weibull_realistic";
    const std::string s200c = "toy_n200_p10_rho0.3_pc0.3_weibull_realistic";

    {
        const auto& sp = cell(rows, s400, "split", "cv_min").coverage;
        const auto& db = cell(rows, s400, "debiased", "cv_min").coverage;
        const auto& ps = cell(rows, s400, "exact_psi", "cv_min").coverage;
        const bool ok = sp.value >= 0.85 && sp.value <= 0.95 && db.value >= 0.85 && db.value <= 0.95 &&
                        ps.value <= 0.90 - 3.0 * ps.se;
        report(6, ok, "coverage at n=400 (cv_min, 200 replicates)",
               "split " + fmt("%.3f", sp.value) + ", debiased " + fmt("%.3f", db.value) + " (in [0.85, 0.95]); exact_psi " +
                   fmt("%.3f", ps.value) + " (se " + fmt("%.3f", ps.se) + ", needs <= " +
                   fmt("%.3f", 0.90 - 3.0 * ps.se) + ")");
    }
    {
        const double wp = cell(rows, s200, "exact_psi", "cv_min").width.median;
        const double ws = cell(rows, s200, "split", "cv_min").width.median;
        const double wd = cell(rows, s200, "debiased", "cv_min").width.median;
        report(7, wp >= ws && ws >= wd, "median width ordering at n=200",
               "exact_psi " + fmt("%.3f", wp) + " >= split " + fmt("%.3f", ws) + " >= debiased " + fmt("%.3f", wd));
    }
    {
        bool ok = true;
        std::string detail;
        for (const char* m : {"split", "debiased", "refit"}) {
            const double p0 = cell(rows, s200, m, "cv_min").power.value;
            const double p3 = cell(rows, s200c, m, "cv_min").power.value;
            ok = ok && p3 <= p0;
            detail += std::string(detail.empty() ? "" : "; ") + m + " " + fmt("%.3f", p3) + " <= " + fmt("%.3f", p0);
        }
        report(8, ok, "power under 30% censoring vs none at n=200", detail);
    }

    std::cerr << "Monte Carlo: p=20 selection\n";
    std::vector<IntervalRecord> rec20;
    const auto rows20 = run_grid({{"scenarios", toy_grid({200}, {20}, {0.0})},
                                  {"methods", {"refit"}},
                                  {"tuning_rules", {"cv_min", "bic"}},
                                  {"n_sim", 200},
                                  {"seed", 20240902},
                                  {"options", options}},
                                 rec20);
    {
        const std::string s = "toy_n200_p20_rho0.3_pc0_weibull_realistic";
        const auto& cv = cell(rows20, s, "refit", "cv_min");
        const auto& bic = cell(rows20, s, "refit", "bic");
        report(9, cv.mean_model_size > bic.mean_model_size && bic.mean_p_true > cv.mean_p_true,
               "cv_min vs bic at p=20, n=200",
               "mean size " + fmt("%.2f", cv.mean_model_size) + " > " + fmt("%.2f", bic.mean_model_size) +
                   "; P_true " + fmt("%.3f", bic.mean_p_true) + " > " + fmt("%.3f", cv.mean_p_true));
    }
}

void criterion_censoring()
{
    double worst = 0.0;
    for (double pc : {0.1, 0.3}) {
        for (const char* base : {"weibull", "exponential"}) {
            ToyScenario toy;
            toy.n = 10000;
            toy.p = 10;
            toy.rho = 0.3;
            toy.censor_target = pc;
            toy.baseline = base[0] == 'w' ? BaselineSpec::weibull(2.0, 1.0) : BaselineSpec::exponential(1.0);
            toy.pattern = CoefficientPattern::parse("realistic");
            const auto sc = make_scenario(toy);
            for (int r = 0; r < 50; ++r) {
                Rng rng(derive_seed(77, sc.id, static_cast<std::uint64_t>(r)));
                const auto g = generate(sc, toy.n, rng);
                const double frac = 1.0 - static_cast<double>(g.data.status().sum()) / toy.n;
                worst = std::max(worst, std::abs(frac - pc));
            }
        }
    }
    report(10, worst <= 0.02, "realized censoring at n=10000 (50 replicates each)",
           "max |observed - target| " + fmt("%.4f", worst) + " (<= 0.02)");
}

void criterion_ibs()
{
    // Hand example with one censored observation: G = 1 before t=2, 2/3 after.
    const Vector t = (Vector(4) << 1, 2, 3, 4).finished();
    const IntVector d = (IntVector(4) << 1, 0, 1, 1).finished();
    const SurvivalDataset data(t, d, Matrix::Zero(4, 1));
    const auto g = km_censoring_survivor(data);
    const auto model = [](int i, double s) { return std::exp(-(0.5 + 0.25 * i) * s); };
    const auto res = integrated_brier(data, model, g);

    const double tau = 3.7;
    const auto ghat = [](double s) { return s < 2.0 ? 1.0 : 2.0 / 3.0; };
    const auto bs = [&](double s) {
        double sum = 0.0;
        for (int i = 0; i < 4; ++i) {
            const double sv = model(i, s);
            if (t[i] <= s && d[i] == 1) sum += sv * sv / ghat(t[i] - 1e-12);
            else if (t[i] > s) sum += (1.0 - sv) * (1.0 - sv) / ghat(s);
        }
        return sum / 4.0;
    };
    double integral = 0.0;
    const double h = tau / 99.0;
    for (int k = 0; k < 99; ++k) integral += 0.5 * h * (bs(h * k) + bs(k == 98 ? tau : h * (k + 1)));
    const double expected = integral / tau;
    const double err = std::abs(res.ibs - expected);

    bool in_range = true;
    Rng rng(99);
    int checked = 0;
    for (int rep = 0; rep < 500; ++rep) {
        const int n = 5 + static_cast<int>(rng() % 80);
        const double cens = 0.8 * uniform_open(rng);
        const auto inst = random_instance(n, 1, 11000 + static_cast<std::uint64_t>(rep), 0.5, cens);
        const auto gk = km_censoring_survivor(inst);
        std::vector<double> rate(static_cast<size_t>(n));
        for (auto& r : rate) r = std::exp(4.0 * (uniform_open(rng) - 0.5));
        const int kind = rep % 4;
        const auto m = [&](int i, double s) {
            if (kind == 0) return std::exp(-rate[static_cast<size_t>(i)] * s);
            if (kind == 1) return 1.0;
            if (kind == 2) return s > 0.0 ? 0.0 : 1.0;
            return 0.5;
        };
        const auto r = integrated_brier(inst, m, gk);
        if (std::isnan(r.ibs)) continue;
        ++checked;
        in_range = in_range && r.ibs >= 0.0 && r.ibs <= 1.0;
    }
    report(11, err <= 1e-6 && in_range && res.tau == tau, "integrated Brier score",
           "hand example |diff| " + fmt("%.2e", err) + " (<= 1e-6); " + std::to_string(checked) +
               " fuzzed instances in [0,1]: " + (in_range ? "yes" : "no"));
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void criterion_determinism()
{
    namespace fs = std::filesystem;
    const json j = {{"scenarios",
                     {{"n", {100}},
                      {"p", {5}},
                      {"rho", {0.0, 0.5}},
                      {"censor_target", {0.2}},
                      {"baseline", {"weibull"}},
                      {"pattern", {"realistic"}}}},
                    {"methods", {"full", "oracle", "refit", "refit0", "split", "debiased", "exact_psi"}},
                    {"tuning_rules", {"cv_min", "bic"}},
                    {"lasso", {{"flavors", {"standard", "adaptive"}}}},
                    {"n_sim", 8},
                    {"seed", 5},
                    {"options", {{"n_pop_truth", 5000}}}};
    const auto cfg = parse_config(j);
    const fs::path root = fs::temp_directory_path() / ("coxsel_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    run_simulation(cfg, root / "t1", {1, false, nullptr});
    run_simulation(cfg, root / "t8", {8, false, nullptr});
    const std::string l1 = slurp(root / "t1" / "long.csv"), l8 = slurp(root / "t8" / "long.csv");
    const std::string s1 = slurp(root / "t1" / "summary.csv"), s8 = slurp(root / "t8" / "summary.csv");
    fs::remove_all(root);
    report(12, !l1.empty() && l1 == l8 && s1 == s8, "outputs with 1 vs 8 threads",
           std::string("long.csv ") + (l1 == l8 ? "identical" : "differs") + " (" + std::to_string(l1.size()) +
               " bytes), summary.csv " + (s1 == s8 ? "identical" : "differs"));
}

template <class F>
void guarded(int id, const char* name, F f)
{
    try {
        f();
    } catch (const std::exception& e) {
        report(id, false, name, std::string("exception: ") + e.what());
    }
}

} // namespace

int main()
{
    guarded(1, "score and information", criterion_derivatives);
    guarded(2, "MLE vs grid", criterion_mle_grid);
    guarded(3, "Lasso vs grid and KKT", criterion_lasso);
    guarded(4, "exact PSI", criterion_psi);
    guarded(5, "debiased at lambda=0", criterion_debiased);
    guarded(6, "Monte Carlo criteria", criteria_monte_carlo);
    guarded(10, "censoring proportion", criterion_censoring);
    guarded(11, "integrated Brier score", criterion_ibs);
    guarded(12, "thread determinism", criterion_determinism);
    std::printf("%s: %d criterion(s) failed\n", failures ? "FAILED" : "OK", failures);
    return failures ? 1 : 0;
}
