#pragma once

// Simulated survival data: toy AR(1) designs and designs calibrated to a real
// dataset, Weibull/exponential event times, administrative censoring, tie
// jitter, and large-population submodel coefficients used as the inferential
// target for coverage.

#include "coxsel/common.hpp"
#include "coxsel/survival_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace coxsel {

struct CoefficientPattern
{
    enum class Kind { allones, highcontrast, realistic, sparse, custom };
    Kind kind = Kind::sparse;
    Vector custom;

    static CoefficientPattern parse(const std::string& s)
    {
        if (s == "allones") return {Kind::allones, {}};
        if (s == "highcontrast") return {Kind::highcontrast, {}};
        if (s == "realistic") return {Kind::realistic, {}};
        if (s == "sparse") return {Kind::sparse, {}};
        throw Error("unknown coefficient pattern '" + s + "'");
    }

    static CoefficientPattern from_vector(Vector v) { return {Kind::custom, std::move(v)}; }

    std::string name() const
    {
        switch (kind) {
        case Kind::allones: return "allones";
        case Kind::highcontrast: return "highcontrast";
        case Kind::realistic: return "realistic";
        case Kind::sparse: return "sparse";
        case Kind::custom: return "custom";
        }
        return "?";
    }
};

inline Vector make_beta(const CoefficientPattern& pattern, int p)
{
    if (p < 1) throw Error("make_beta: p must be positive");
    std::vector<double> prefix;
    switch (pattern.kind) {
    case CoefficientPattern::Kind::allones: return Vector::Ones(p);
    case CoefficientPattern::Kind::sparse: prefix = {1.0, 1.0}; break;
    case CoefficientPattern::Kind::realistic: prefix = {0.8, 0.7, 0.5, 0.8}; break;
    case CoefficientPattern::Kind::highcontrast: prefix = {0.3, 1.0, 0.3, 1.0}; break;
    case CoefficientPattern::Kind::custom: prefix.assign(pattern.custom.data(), pattern.custom.data() + pattern.custom.size()); break;
    }
    if (static_cast<int>(prefix.size()) > p)
        throw Error("make_beta: pattern " + pattern.name() + " needs p >= " + std::to_string(prefix.size()));
    Vector beta = Vector::Zero(p);
    for (size_t j = 0; j < prefix.size(); ++j) beta[static_cast<Eigen::Index>(j)] = prefix[j];
    return beta;
}

struct BaselineSpec
{
    enum class Kind { exponential, weibull };
    Kind kind = Kind::weibull;
    double shape = 2.0;
    double scale = 1.0;

    static BaselineSpec exponential(double rate = 1.0) { return {Kind::exponential, 1.0, rate}; }
    static BaselineSpec weibull(double shape = 2.0, double scale = 1.0) { return {Kind::weibull, shape, scale}; }

    double k() const { return kind == Kind::exponential ? 1.0 : shape; }

    void validate() const
    {
        if (!(k() > 0.0 && std::isfinite(k()))) throw Error("BaselineSpec: shape must be positive");
        if (!(scale > 0.0 && std::isfinite(scale))) throw Error("BaselineSpec: scale must be positive");
    }

    /// H0(t) = s t^k.
    double cumulative_hazard(double t) const { return scale * std::pow(t, k()); }

    std::string name() const { return kind == Kind::exponential ? "exponential" : "weibull"; }
};

// ---------------------------------------------------------------------------
// Primitive generators
// ---------------------------------------------------------------------------

/// n x p draws from N(0, Sigma) with Sigma_ij = rho^|i-j|.
inline Matrix sample_covariates(int n, int p, double rho, Rng& rng)
{
    if (!(rho >= 0.0 && rho < 1.0)) throw Error("sample_covariates: rho must lie in [0,1)");
    Matrix sigma(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) sigma(i, j) = std::pow(rho, std::abs(i - j));
    const Eigen::LLT<Matrix> llt(sigma);
    const Matrix lower = llt.matrixL();
    Matrix z(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) z(i, j) = standard_normal(rng);
    return z * lower.transpose();
}

/// Listed columns mapped to 1{x > 0}.
inline Matrix dichotomize(Matrix x, const IndexList& columns)
{
    for (int j : columns) {
        if (j < 0 || j >= x.cols()) throw Error("dichotomize: column index out of range");
        x.col(j) = (x.col(j).array() > 0.0).cast<double>();
    }
    return x;
}

/// T = (-log U / (s exp(lp)))^(1/k) for a given uniform U.
inline double event_time_from_uniform(double lp, const BaselineSpec& baseline, double u)
{
    const double e = -std::log(u) / (baseline.scale * std::exp(lp));
    return baseline.kind == BaselineSpec::Kind::exponential ? e : std::pow(e, 1.0 / baseline.shape);
}

/// One inverse-transform draw per linear predictor.
inline Vector sample_event_times(const Vector& linear_predictors, const BaselineSpec& baseline, Rng& rng)
{
    baseline.validate();
    Vector t(linear_predictors.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        t[i] = event_time_from_uniform(linear_predictors[i], baseline, uniform_open(rng));
        if (!(t[i] > 0.0 && std::isfinite(t[i])))
            throw Error("sample_event_times: non-positive or infinite time (linear predictor " +
                        std::to_string(linear_predictors[i]) + ")");
    }
    return t;
}

/// Type-7 sample quantile (linear interpolation between order statistics).
inline double quantile_type7(std::vector<double> v, double q)
{
    if (v.empty()) throw Error("quantile_type7: empty input");
    if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile_type7: probability outside [0,1]");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<size_t>(std::floor(h));
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

struct CensoredTimes
{
    Vector time;
    IntVector status;
    double cutoff = 0.0;
};

/// Y = min(T, c*), delta = 1{T <= c*}, c* the (1 - pi_C) type-7 quantile of T.
inline CensoredTimes apply_admin_censoring(const Vector& event_times, double censor_target)
{
    if (!(censor_target >= 0.0 && censor_target < 1.0)) throw Error("apply_admin_censoring: pi_C must lie in [0,1)");
    CensoredTimes out;
    out.cutoff = quantile_type7(std::vector<double>(event_times.data(), event_times.data() + event_times.size()),
                                1.0 - censor_target);
    out.time.resize(event_times.size());
    out.status.resize(event_times.size());
    for (Eigen::Index i = 0; i < event_times.size(); ++i) {
        out.status[i] = event_times[i] <= out.cutoff ? 1 : 0;
        out.time[i] = std::min(event_times[i], out.cutoff);
    }
    return out;
}

enum class JitterRole { event, censoring };

inline double jitter_epsilon(JitterRole role)
{
    return role == JitterRole::event ? 1e-8 : 5e-9;
}

namespace detail {

inline double value_range(const Vector& v)
{
    return v.size() == 0 ? 0.0 : v.maxCoeff() - v.minCoeff();
}

// Offsets the k-th member (k = first_k, first_k+1, ...) of each group of
// identical values among `members` by k * eps * scale, where scale is `range`
// or max(1, |value|) when the range is zero.
inline void jitter_group_members(Vector& times, const std::vector<int>& members, double eps, double range, int first_k)
{
    std::vector<int> sorted = members;
    std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) { return times[a] < times[b]; });
    size_t start = 0;
    while (start < sorted.size()) {
        size_t end = start + 1;
        const double v = times[sorted[start]];
        while (end < sorted.size() && times[sorted[end]] == v) ++end;
        if (end - start > 1 || first_k > 0) {
            const double scale = range > 0.0 ? range : std::max(1.0, std::abs(v));
            double prev = -kInf;
            for (size_t m = start; m < end; ++m) {
                const int k = first_k + static_cast<int>(m - start);
                double nv = v + k * eps * scale;
                if (k > 0 && nv <= prev) nv = std::nextafter(prev, kInf);
                if (k > 0 && nv <= v) nv = std::nextafter(std::max(v, prev), kInf);
                times[sorted[m]] = nv;
                prev = nv;
            }
        }
        start = end;
    }
}

inline bool all_distinct(const Vector& v)
{
    std::vector<double> s(v.data(), v.data() + v.size());
    std::sort(s.begin(), s.end());
    return std::adjacent_find(s.begin(), s.end()) == s.end();
}

} // namespace detail

/// Within each group of identical values the k-th member in original order
/// (k = 0, 1, ...) moves up by k * eps * range(times). Repeats until every
/// value is distinct, so offsets landing on an existing value are resolved.
inline Vector jitter_ties(Vector times, JitterRole role)
{
    const double eps = jitter_epsilon(role);
    const double range = detail::value_range(times);
    std::vector<int> members(static_cast<size_t>(times.size()));
    for (int i = 0; i < static_cast<int>(members.size()); ++i) members[static_cast<size_t>(i)] = i;
    for (int round = 0; round < 1000 && !detail::all_distinct(times); ++round)
        detail::jitter_group_members(times, members, eps, range, 0);
    if (!detail::all_distinct(times)) throw Error("jitter_ties: could not separate tied values");
    return times;
}

/// Jitters event and censored times separately, each group scaled by the
/// range of all observed times. If a censored value coincides with an event
/// time the censored members of that group all move (k starts at 1).
inline Vector jitter_observed(Vector time, const IntVector& status)
{
    const double range = detail::value_range(time);
    std::vector<int> events, censored;
    for (int i = 0; i < time.size(); ++i) (status[i] == 1 ? events : censored).push_back(i);
    for (int round = 0; round < 1000 && !detail::all_distinct(time); ++round) {
        detail::jitter_group_members(time, events, jitter_epsilon(JitterRole::event), range, 0);
        std::vector<double> event_values;
        for (int i : events) event_values.push_back(time[i]);
        std::sort(event_values.begin(), event_values.end());
        std::vector<int> colliding, free;
        for (int i : censored)
            (std::binary_search(event_values.begin(), event_values.end(), time[i]) ? colliding : free).push_back(i);
        detail::jitter_group_members(time, free, jitter_epsilon(JitterRole::censoring), range, 0);
        detail::jitter_group_members(time, colliding, jitter_epsilon(JitterRole::censoring), range, 1);
    }
    if (!detail::all_distinct(time)) throw Error("jitter_observed: could not separate tied values");
    return time;
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

struct ToyScenario
{
    int n = 100;
    int p = 10;
    double rho = 0.0;
    double censor_target = 0.0;
    BaselineSpec baseline;
    CoefficientPattern pattern;
    IndexList dichotomize;

    void validate() const
    {
        if (n < 2) throw Error("ToyScenario: n must be at least 2");
        if (!(rho >= 0.0 && rho < 1.0)) throw Error("ToyScenario: rho must lie in [0,1)");
        if (!(censor_target >= 0.0 && censor_target < 1.0)) throw Error("ToyScenario: censor target must lie in [0,1)");
        baseline.validate();
        make_beta(pattern, p);
        for (int j : dichotomize)
            if (j < 0 || j >= p) throw Error("ToyScenario: dichotomize index out of range");
    }

    std::string id() const
    {
        char rho_s[32], pc_s[32];
        std::snprintf(rho_s, sizeof rho_s, "%g", rho);
        std::snprintf(pc_s, sizeof pc_s, "%g", censor_target);
        std::string s = "toy_n" + std::to_string(n) + "_p" + std::to_string(p) + "_rho" + rho_s + "_pc" + pc_s + "_" +
                        baseline.name() + "_" + pattern.name();
        if (baseline.kind == BaselineSpec::Kind::weibull && (baseline.shape != 2.0 || baseline.scale != 1.0)) {
            char ks[64];
            std::snprintf(ks, sizeof ks, "_k%g_s%g", baseline.shape, baseline.scale);
            s += ks;
        }
        if (!dichotomize.empty()) {
            s += "_dich";
            for (int j : dichotomize) s += "-" + std::to_string(j + 1);
        }
        return s;
    }
};

struct CalibratedScenario
{
    Matrix covariate_pool;
    std::vector<std::string> names;
    Vector beta_truth;
    BaselineSpec baseline = BaselineSpec::weibull();
    double censor_target = 0.0;
};

/// Everything needed to draw replicates: the truth beta0, the covariate
/// mechanism (AR(1) normal or resampling from a fixed pool), the baseline and
/// the censoring target.
struct Scenario
{
    std::string id;
    int n = 0;
    Vector beta;
    BaselineSpec baseline;
    double censor_target = 0.0;
    double rho = 0.0;
    IndexList dichotomize;
    std::shared_ptr<const Matrix> pool;

    int p() const { return static_cast<int>(beta.size()); }
    IndexList true_active() const
    {
        IndexList a;
        for (int j = 0; j < p(); ++j)
            if (beta[j] != 0.0) a.push_back(j);
        return a;
    }

    Matrix covariates(int rows, Rng& rng) const
    {
        if (pool) {
            Matrix x(rows, pool->cols());
            const auto m = static_cast<std::uint64_t>(pool->rows());
            for (int i = 0; i < rows; ++i) x.row(i) = pool->row(static_cast<Eigen::Index>(rng() % m));
            return x;
        }
        return coxsel::dichotomize(sample_covariates(rows, p(), rho, rng), dichotomize);
    }
};

inline Scenario make_scenario(const ToyScenario& toy)
{
    toy.validate();
    Scenario s;
    s.id = toy.id();
    s.n = toy.n;
    s.beta = make_beta(toy.pattern, toy.p);
    s.baseline = toy.baseline;
    s.censor_target = toy.censor_target;
    s.rho = toy.rho;
    s.dichotomize = toy.dichotomize;
    return s;
}

inline Scenario make_scenario(const CalibratedScenario& cal, int n, const std::string& id)
{
    if (n < 2) throw Error("calibrated scenario: n must be at least 2");
    if (cal.covariate_pool.cols() != cal.beta_truth.size()) throw Error("calibrated scenario: pool/beta mismatch");
    Scenario s;
    s.id = id;
    s.n = n;
    s.beta = cal.beta_truth;
    s.baseline = cal.baseline;
    s.censor_target = cal.censor_target;
    s.pool = std::make_shared<const Matrix>(cal.covariate_pool);
    return s;
}

struct GeneratedData
{
    SurvivalDataset data;
    double cutoff = 0.0;
};

/// One replicate of size `rows`: covariates, event times, censoring, jitter.
inline GeneratedData generate(const Scenario& scenario, int rows, Rng& rng, std::optional<double> censor = {})
{
    const Matrix x = scenario.covariates(rows, rng);
    const Vector t = sample_event_times(x * scenario.beta, scenario.baseline, rng);
    const auto cens = apply_admin_censoring(t, censor.value_or(scenario.censor_target));
    Vector y = jitter_observed(cens.time, cens.status);
    return {SurvivalDataset(std::move(y), cens.status, x), cens.cutoff};
}

inline GeneratedData generate(const Scenario& scenario, Rng& rng)
{
    return generate(scenario, scenario.n, rng);
}

// ---------------------------------------------------------------------------
// Calibration to a real dataset: Weibull proportional-hazards MLE.
// ---------------------------------------------------------------------------

struct WeibullFit
{
    double shape = 1.0;
    double scale = 1.0;
    Vector beta;
    double loglik = 0.0;
    int iterations = 0;
};

namespace detail {

struct WeibullEval
{
    double loglik = 0.0;
    Vector grad;
    Matrix hess;
};

// Parameters theta = (log k, log s, beta).
// l = sum delta (log k + log s + (k-1) log t + eta) - sum s t^k exp(eta).
inline WeibullEval weibull_eval(const Vector& time, const IntVector& status, const Matrix& x, const Vector& theta,
                                bool derivatives)
{
    const auto p = x.cols();
    const double k = std::exp(theta[0]);
    WeibullEval ev;
    if (derivatives) {
        ev.grad = Vector::Zero(p + 2);
        ev.hess = Matrix::Zero(p + 2, p + 2);
    }
    Vector z(p + 2);
    for (Eigen::Index i = 0; i < time.size(); ++i) {
        const double lt = std::log(time[i]);
        const double eta = p > 0 ? x.row(i).dot(theta.tail(p)) : 0.0;
        const double h = std::exp(theta[1] + k * lt + eta);
        const double d = status[i];
        ev.loglik += d * (theta[0] + theta[1] + (k - 1.0) * lt + eta) - h;
        if (!derivatives) continue;
        const double klt = k * lt;
        z[0] = klt;
        z[1] = 1.0;
        if (p > 0) z.tail(p) = x.row(i).transpose();
        ev.grad[0] += d * (1.0 + klt) - h * klt;
        ev.grad[1] += d - h;
        if (p > 0) ev.grad.tail(p) += (d - h) * x.row(i).transpose();
        ev.hess.noalias() -= h * z * z.transpose();
        ev.hess(0, 0) += (d - h) * klt;
    }
    return ev;
}

} // namespace detail

/// Maximum-likelihood Weibull PH fit by damped Newton iterations.
inline WeibullFit fit_weibull_ph(const Vector& time, const IntVector& status, const Matrix& x, int max_iter = 200)
{
    const auto p = x.cols();
    const int d = static_cast<int>(status.sum());
    if (d == 0) throw Error("fit_weibull_ph: no events");
    for (Eigen::Index i = 0; i < time.size(); ++i)
        if (!(time[i] > 0.0)) throw Error("fit_weibull_ph: times must be positive");

    Vector theta = Vector::Zero(p + 2);
    theta[1] = std::log(d / time.sum());
    auto ev = detail::weibull_eval(time, status, x, theta, true);
    double damping = 0.0;
    WeibullFit fit;
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
        fit.iterations = it + 1;
        if (ev.grad.cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, std::abs(ev.loglik))) {
            converged = true;
            break;
        }
        bool improved = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            const Matrix neg = -ev.hess + damping * Matrix::Identity(p + 2, p + 2);
            const Eigen::LDLT<Matrix> ldlt(neg);
            Vector step = ldlt.solve(ev.grad);
            if (ldlt.info() == Eigen::Success && step.allFinite() && ldlt.isPositive()) {
                const Vector trial = theta + step;
                const auto tv = detail::weibull_eval(time, status, x, trial, false);
                if (std::isfinite(tv.loglik) && tv.loglik >= ev.loglik - 1e-12 * std::abs(ev.loglik)) {
                    theta = trial;
                    ev = detail::weibull_eval(time, status, x, theta, true);
                    damping *= 0.1;
                    if (damping < 1e-12) damping = 0.0;
                    improved = true;
                    break;
                }
            }
            damping = damping == 0.0 ? 1e-6 * std::max(1.0, (-ev.hess).diagonal().cwiseAbs().maxCoeff()) : damping * 10.0;
        }
        if (!improved) break;
    }
    if (!converged && ev.grad.cwiseAbs().maxCoeff() >= 1e-6 * std::max(1.0, std::abs(ev.loglik))) {
        char msg[256];
        std::snprintf(msg, sizeof msg,
                      "fit_weibull_ph: did not converge after %d iterations (max |gradient| %.3g, log k %.4g, log s %.4g)",
                      fit.iterations, ev.grad.cwiseAbs().maxCoeff(), theta[0], theta[1]);
        throw Error(msg);
    }
    fit.shape = std::exp(theta[0]);
    fit.scale = std::exp(theta[1]);
    fit.beta = theta.tail(p);
    fit.loglik = ev.loglik;
    return fit;
}

struct CleanedDesign
{
    Matrix x;
    std::vector<std::string> names;
    IndexList kept; // columns of the input that survived
    Standardization standardization;
};

/// Drops constant columns and 0/1 columns whose positive (or negative) rate
/// is below `rare_threshold`, then centers and scales the rest.
inline CleanedDesign clean_design(const Matrix& x, const std::vector<std::string>& names, double rare_threshold = 0.01)
{
    if (names.size() != static_cast<size_t>(x.cols())) throw Error("clean_design: names/columns mismatch");
    CleanedDesign out;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const auto col = x.col(j);
        if (col.maxCoeff() - col.minCoeff() <= 0.0) continue;
        const bool binary = ((col.array() == 0.0) || (col.array() == 1.0)).all();
        if (binary) {
            const double rate = col.mean();
            if (rate < rare_threshold || rate > 1.0 - rare_threshold) continue;
        }
        out.kept.push_back(static_cast<int>(j));
        out.names.push_back(names[static_cast<size_t>(j)]);
    }
    if (out.kept.empty()) throw Error("clean_design: no usable covariates remain");
    const Matrix kept = x(Eigen::all, out.kept);
    const auto n = kept.rows();
    out.standardization.center = kept.colwise().mean().transpose();
    out.standardization.scale.resize(kept.cols());
    for (Eigen::Index j = 0; j < kept.cols(); ++j)
        out.standardization.scale[j] =
            std::sqrt((kept.col(j).array() - out.standardization.center[j]).square().sum() / static_cast<double>(n - 1));
    out.x = (kept.rowwise() - out.standardization.center.transpose()).array().rowwise() /
            out.standardization.scale.transpose().array();
    return out;
}

/// Fits the Weibull PH model once to (cleaned, standardized) real data and
/// returns it as a simulation truth with the observed design as covariate pool.
inline CalibratedScenario calibrate_from_dataset(const SurvivalDataset& data, std::vector<std::string> names = {})
{
    const auto fit = fit_weibull_ph(data.time(), data.status(), data.x());
    CalibratedScenario cal;
    cal.covariate_pool = data.x();
    cal.names = std::move(names);
    if (cal.names.empty())
        for (int j = 0; j < data.p(); ++j) cal.names.push_back("x" + std::to_string(j + 1));
    cal.beta_truth = fit.beta;
    cal.baseline = BaselineSpec::weibull(fit.shape, fit.scale);
    cal.censor_target = 1.0 - static_cast<double>(data.events()) / data.n();
    return cal;
}

// ---------------------------------------------------------------------------
// Submodel truth beta_{.,M}
// ---------------------------------------------------------------------------

/// Caches population datasets per scenario and fitted submodel coefficients
/// per (scenario id, subset). Safe to share between threads; concurrent
/// requests for the same key wait for a single computation.
class SubmodelTruthCache
{
public:
    explicit SubmodelTruthCache(int n_pop = 200000, std::uint64_t seed = 0x7275746873656564ULL)
        : n_pop_(n_pop), seed_(seed)
    {
        if (n_pop < 100) throw Error("SubmodelTruthCache: population size too small");
    }

    int n_pop() const { return n_pop_; }

    Vector get(const Scenario& scenario, const IndexList& subset)
    {
        if (subset.empty()) throw Error("submodel_truth: subset must be nonempty");
        const std::string key = scenario.id + "|" + to_string(subset);
        std::shared_future<Vector> fut;
        bool compute = false;
        std::promise<Vector> promise;
        {
            std::lock_guard lock(mutex_);
            auto it = values_.find(key);
            if (it == values_.end()) {
                fut = promise.get_future().share();
                values_.emplace(key, fut);
                compute = true;
            } else {
                fut = it->second;
            }
        }
        if (compute) {
            try {
                promise.set_value(fit_subset(scenario, subset));
            } catch (...) {
                promise.set_exception(std::current_exception());
                std::lock_guard lock(mutex_);
                values_.erase(key);
            }
        }
        return fut.get();
    }

    /// Frees the population data of a scenario; cached coefficients stay.
    void release_population(const std::string& scenario_id)
    {
        std::lock_guard lock(mutex_);
        populations_.erase(scenario_id);
    }

    /// Uncensored population dataset of size n_pop, drawn with a seed derived
    /// from the scenario id only.
    std::shared_ptr<const SurvivalDataset> population(const Scenario& scenario)
    {
        std::shared_future<std::shared_ptr<const SurvivalDataset>> fut;
        bool compute = false;
        std::promise<std::shared_ptr<const SurvivalDataset>> promise;
        {
            std::lock_guard lock(mutex_);
            auto it = populations_.find(scenario.id);
            if (it == populations_.end()) {
                fut = promise.get_future().share();
                populations_.emplace(scenario.id, fut);
                compute = true;
            } else {
                fut = it->second;
            }
        }
        if (compute) {
            try {
                Rng rng(derive_seed(seed_, scenario.id, 0));
                auto gen = generate(scenario, n_pop_, rng, 0.0);
                // Stored in time order so the risk-set sweeps read memory sequentially.
                promise.set_value(std::make_shared<const SurvivalDataset>(gen.data.rows(gen.data.order())));
            } catch (...) {
                promise.set_exception(std::current_exception());
                std::lock_guard lock(mutex_);
                populations_.erase(scenario.id);
            }
        }
        return fut.get();
    }

private:
    Vector fit_subset(const Scenario& scenario, const IndexList& subset)
    {
        const auto pop = population(scenario);
        CoxOptions opt;
        opt.rel_tol = 1e-12;
        const auto fit = fit_cox_mle(*pop, subset, opt);
        if (!fit.converged || fit.separation)
            throw Error("submodel_truth: population fit did not converge for " + scenario.id + " subset " +
                        to_string(subset));
        return fit.beta;
    }

    int n_pop_;
    std::uint64_t seed_;
    std::mutex mutex_;
    std::map<std::string, std::shared_future<Vector>> values_;
    std::map<std::string, std::shared_future<std::shared_ptr<const SurvivalDataset>>> populations_;
};

inline Vector submodel_truth(const Scenario& scenario, const IndexList& subset, SubmodelTruthCache& cache)
{
    return cache.get(scenario, subset);
}

} // namespace coxsel
