#pragma once

// L1-penalized partial likelihood: Lasso and adaptive Lasso fits, the
// lambda path, cross-validated deviance, information criteria and the
// tuning rules that pick a single lambda from them.
//
// The penalty is on the scale of the summed log partial likelihood:
//   maximize  l(beta) - lambda * sum_j w_j |beta_j|.

#include "coxsel/common.hpp"
#include "coxsel/survival_core.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace coxsel {

struct PenaltyWeights
{
    Vector w;
    int gamma = 1;

    static PenaltyWeights ones(int p) { return {Vector::Ones(p), 1}; }

    IndexList finite() const
    {
        IndexList idx;
        for (Eigen::Index j = 0; j < w.size(); ++j)
            if (std::isfinite(w[j])) idx.push_back(static_cast<int>(j));
        return idx;
    }

    void validate(int p) const
    {
        if (w.size() != p) throw Error("PenaltyWeights: expected " + std::to_string(p) + " weights");
        for (Eigen::Index j = 0; j < w.size(); ++j)
            if (!(w[j] >= 0.0)) throw Error("PenaltyWeights: weights must be nonnegative");
        if (finite().empty()) throw Error("PenaltyWeights: every weight is infinite");
    }
};

/// w_j = 1 / |beta_j|^gamma; near-zero initial estimates exclude the coordinate.
inline PenaltyWeights adaptive_weights(const Vector& init_beta, int gamma = 1)
{
    if (gamma < 1) throw Error("adaptive_weights: gamma must be a positive integer");
    PenaltyWeights out;
    out.gamma = gamma;
    out.w.resize(init_beta.size());
    for (Eigen::Index j = 0; j < init_beta.size(); ++j) {
        const double a = std::abs(init_beta[j]);
        out.w[j] = a < 1e-8 ? kInf : 1.0 / std::pow(a, gamma);
    }
    return out;
}

struct PenalizedFit
{
    double lambda = 0.0;
    Vector beta;
    IndexList active;
    std::vector<int> signs;
    double objective = 0.0;
    bool converged = true;
    int iterations = 0;

    Vector active_beta() const { return beta(active); }
};

struct LassoOptions
{
    double tol = 1e-9;        // outer: max coefficient change of an accepted step
    double inner_tol = 1e-11; // coordinate descent sweeps
    int max_outer = 100;
    int max_inner = 10000;
    int max_halving = 30;
    double kkt_slack = 1e-9;
};

namespace detail {

inline double soft_threshold(double a, double t)
{
    if (a > t) return a - t;
    if (a < -t) return a + t;
    return 0.0;
}

inline double penalty_value(const Vector& beta, const PenaltyWeights& weights, double lambda)
{
    double pen = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j)
        if (beta[j] != 0.0) pen += weights.w[j] * std::abs(beta[j]);
    return lambda * pen;
}

inline double lasso_objective(const SurvivalDataset& data, const Vector& beta, const PenaltyWeights& weights,
                              double lambda)
{
    return log_partial_likelihood(data, beta) - penalty_value(beta, weights, lambda);
}

inline void finalize(PenalizedFit& fit, const SurvivalDataset& data, const PenaltyWeights& weights)
{
    fit.active.clear();
    fit.signs.clear();
    for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
        if (fit.beta[j] == 0.0) continue;
        fit.active.push_back(static_cast<int>(j));
        fit.signs.push_back(fit.beta[j] > 0.0 ? 1 : -1);
    }
    fit.objective = lasso_objective(data, fit.beta, weights, fit.lambda);
}

// Proximal Newton on the working set: the quadratic model of l around the
// current beta uses the exact score and information restricted to `work`,
// is maximized by cyclic coordinate descent with soft-thresholding, and the
// resulting direction is accepted with step halving on the true objective.
inline bool solve_working_set(const SurvivalDataset& data, Vector& beta, const IndexList& work,
                              const PenaltyWeights& weights, double lambda, const LassoOptions& opt, int& iters)
{
    const auto q = static_cast<Eigen::Index>(work.size());
    if (q == 0) return true;
    const Vector pw = weights.w(work);

    for (int outer = 0; outer < opt.max_outer; ++outer) {
        ++iters;
        const Vector bw = beta(work);
        const auto ev = evaluate(data, bw, work, Want::information);
        const double obj = ev.loglik - penalty_value(beta, weights, lambda);

        Vector b = bw;
        Vector r = Vector::Zero(q); // I (b - bw)
        for (int sweep = 0; sweep < opt.max_inner; ++sweep) {
            double max_change = 0.0;
            for (Eigen::Index k = 0; k < q; ++k) {
                const double hkk = ev.information(k, k);
                double nb = 0.0;
                if (hkk > 1e-12) {
                    const double a = ev.score[k] - r[k] + hkk * b[k];
                    nb = soft_threshold(a, lambda * pw[k]) / hkk;
                }
                const double delta = nb - b[k];
                if (delta != 0.0) {
                    r.noalias() += ev.information.col(k) * delta;
                    b[k] = nb;
                    max_change = std::max(max_change, std::abs(delta));
                }
            }
            if (max_change < opt.inner_tol) break;
        }

        const Vector dir = b - bw;
        if (dir.cwiseAbs().maxCoeff() < opt.tol) return true;

        double t = 1.0;
        bool accepted = false;
        Vector trial = beta;
        for (int h = 0; h <= opt.max_halving; ++h) {
            trial(work) = bw + t * dir;
            const double tobj = lasso_objective(data, trial, weights, lambda);
            if (tobj >= obj - 1e-13 * std::max(1.0, std::abs(obj))) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) return false;
        beta = trial;
        if ((t * dir).cwiseAbs().maxCoeff() < opt.tol) return true;
    }
    return false;
}

} // namespace detail

/// Lasso fit at one lambda. Coordinates with infinite weight stay at zero.
///
/// An active-set strategy wraps the proximal Newton solver: after each solve
/// the full-score KKT conditions are checked and violators join the working
/// set, so the returned fit satisfies KKT over every finite-weight coordinate.
inline PenalizedFit fit_cox_lasso(const SurvivalDataset& data, double lambda, const PenaltyWeights& weights,
                                  const std::optional<Vector>& warm_start = std::nullopt,
                                  const LassoOptions& opt = {})
{
    if (!(lambda >= 0.0)) throw Error("fit_cox_lasso: lambda must be nonnegative");
    const int p = data.p();
    weights.validate(p);
    const IndexList finite = weights.finite();

    PenalizedFit fit;
    fit.lambda = lambda;
    fit.beta = Vector::Zero(p);
    if (warm_start) {
        if (warm_start->size() != p) throw Error("fit_cox_lasso: warm start has wrong length");
        for (int j : finite) fit.beta[j] = (*warm_start)[j];
    }

    IndexList work;
    for (int j : finite)
        if (fit.beta[j] != 0.0) work.push_back(j);

    for (int round = 0; round < 2 * p + 5; ++round) {
        const Vector u = score(data, fit.beta(finite), finite);
        bool grew = false;
        for (size_t k = 0; k < finite.size(); ++k) {
            const int j = finite[k];
            if (std::binary_search(work.begin(), work.end(), j)) continue;
            if (std::abs(u[static_cast<Eigen::Index>(k)]) > lambda * weights.w[j] + opt.kkt_slack) {
                work.insert(std::upper_bound(work.begin(), work.end(), j), j);
                grew = true;
            }
        }
        if (!grew && round > 0) break;
        if (!detail::solve_working_set(data, fit.beta, work, weights, lambda, opt, fit.iterations))
            fit.converged = false;
    }
    detail::finalize(fit, data, weights);
    return fit;
}

struct LambdaPath
{
    std::vector<double> lambdas;
    std::vector<PenalizedFit> fits;
};

/// Smallest lambda at which the all-zero vector satisfies KKT.
inline double lambda_max(const SurvivalDataset& data, const PenaltyWeights& weights)
{
    weights.validate(data.p());
    const Vector u0 = score(data, Vector::Zero(data.p()));
    double lmax = 0.0;
    for (int j : weights.finite()) {
        if (weights.w[j] == 0.0) continue; // unpenalized coordinates do not bound lambda
        lmax = std::max(lmax, std::abs(u0[j]) / weights.w[j]);
    }
    return lmax;
}

inline std::vector<double> lambda_sequence(double lmax, int n_lambda, double eps)
{
    if (n_lambda < 2) throw Error("lambda_path: n_lambda must be at least 2");
    if (!(eps > 0.0 && eps < 1.0)) throw Error("lambda_path: eps must lie in (0,1)");
    if (!(lmax > 0.0)) throw Error("lambda_path: lambda_max is zero (no covariate signal)");
    std::vector<double> out(static_cast<size_t>(n_lambda));
    const double step = std::log(eps) / (n_lambda - 1);
    for (int k = 0; k < n_lambda; ++k) out[static_cast<size_t>(k)] = lmax * std::exp(step * k);
    out.front() = lmax;
    return out;
}

inline double default_eps(const SurvivalDataset& data)
{
    return data.n() < data.p() ? 0.05 : 0.01;
}

/// Fits along a decreasing lambda sequence with warm starts.
inline LambdaPath fit_path(const SurvivalDataset& data, const PenaltyWeights& weights,
                           const std::vector<double>& lambdas, const LassoOptions& opt = {})
{
    LambdaPath path;
    path.lambdas = lambdas;
    path.fits.reserve(lambdas.size());
    std::optional<Vector> warm;
    for (double lam : lambdas) {
        path.fits.push_back(fit_cox_lasso(data, lam, weights, warm, opt));
        warm = path.fits.back().beta;
    }
    return path;
}

inline LambdaPath lambda_path(const SurvivalDataset& data, const PenaltyWeights& weights, int n_lambda = 100,
                              double eps = 0.0, const LassoOptions& opt = {})
{
    if (eps == 0.0) eps = default_eps(data);
    return fit_path(data, weights, lambda_sequence(lambda_max(data, weights), n_lambda, eps), opt);
}

struct CvCurve
{
    std::vector<double> lambdas;
    std::vector<double> deviance;
    std::vector<double> se;
    std::vector<int> fold_of; // fold id per record
};

/// Event-stratified fold assignment: events and censored records are dealt
/// round-robin after independent shuffles.
inline std::vector<int> assign_folds(const SurvivalDataset& data, int folds, Rng& rng)
{
    if (folds < 2) throw Error("cross_validate: need at least 2 folds");
    for (int attempt = 0; attempt < 10; ++attempt) {
        std::vector<int> fold_of(static_cast<size_t>(data.n()), 0);
        const auto perm = random_permutation(data.n(), rng);
        int next_event = 0, next_censored = 0;
        for (int i : perm) {
            int& counter = data.status()[i] == 1 ? next_event : next_censored;
            fold_of[static_cast<size_t>(i)] = counter % folds;
            ++counter;
        }
        std::vector<int> events(static_cast<size_t>(folds), 0);
        for (int i = 0; i < data.n(); ++i) events[static_cast<size_t>(fold_of[static_cast<size_t>(i)])] += data.status()[i];
        if (std::all_of(events.begin(), events.end(), [](int e) { return e > 0; })) return fold_of;
    }
    throw Error("cross_validate: could not give every fold an event (events=" + std::to_string(data.events()) +
                ", folds=" + std::to_string(folds) + ")");
}

/// K-fold cross-validated partial-likelihood deviance in the difference form
/// dev_k = -2 [ l_full(beta_{-k}) - l_{-k}(beta_{-k}) ], normalized by the
/// number of events in fold k and averaged with event weights.
inline CvCurve cross_validate(const SurvivalDataset& data, const PenaltyWeights& weights,
                              const std::vector<double>& lambdas, const std::vector<int>& fold_of,
                              const LassoOptions& opt = {})
{
    if (static_cast<int>(fold_of.size()) != data.n()) throw Error("cross_validate: fold assignment length");
    const int folds = *std::max_element(fold_of.begin(), fold_of.end()) + 1;
    if (folds < 2) throw Error("cross_validate: need at least 2 folds");
    const auto nl = lambdas.size();

    std::vector<std::vector<double>> raw(static_cast<size_t>(folds), std::vector<double>(nl, 0.0));
    std::vector<double> fold_events(static_cast<size_t>(folds), 0.0);
    for (int k = 0; k < folds; ++k) {
        std::vector<int> train;
        for (int i = 0; i < data.n(); ++i) {
            if (fold_of[static_cast<size_t>(i)] == k)
                fold_events[static_cast<size_t>(k)] += data.status()[i];
            else
                train.push_back(i);
        }
        if (fold_events[static_cast<size_t>(k)] == 0.0) throw Error("cross_validate: fold without events");
        const auto train_data = data.rows(train);
        const auto path = fit_path(train_data, weights, lambdas, opt);
        for (size_t l = 0; l < nl; ++l) {
            const Vector& b = path.fits[l].beta;
            const double dev = -2.0 * (log_partial_likelihood(data, b) - log_partial_likelihood(train_data, b));
            raw[static_cast<size_t>(k)][l] = dev / fold_events[static_cast<size_t>(k)];
        }
    }

    CvCurve cv;
    cv.lambdas = lambdas;
    cv.fold_of = fold_of;
    cv.deviance.assign(nl, 0.0);
    cv.se.assign(nl, 0.0);
    double wsum = 0.0;
    for (double e : fold_events) wsum += e;
    for (size_t l = 0; l < nl; ++l) {
        double m = 0.0;
        for (int k = 0; k < folds; ++k) m += fold_events[static_cast<size_t>(k)] * raw[static_cast<size_t>(k)][l];
        m /= wsum;
        double v = 0.0;
        for (int k = 0; k < folds; ++k) {
            const double dlt = raw[static_cast<size_t>(k)][l] - m;
            v += fold_events[static_cast<size_t>(k)] * dlt * dlt;
        }
        cv.deviance[l] = m;
        cv.se[l] = std::sqrt(v / wsum / (folds - 1));
    }
    return cv;
}

inline CvCurve cross_validate(const SurvivalDataset& data, const PenaltyWeights& weights,
                              const std::vector<double>& lambdas, int folds, Rng& rng,
                              const LassoOptions& opt = {})
{
    return cross_validate(data, weights, lambdas, assign_folds(data, folds, rng), opt);
}

enum class BicSampleSize { events, n };

struct InformationCriteria
{
    std::vector<double> aic;
    std::vector<double> bic;
};

/// AIC = -2 l + 2 df and BIC = -2 l + log(d) df with df = |E(lambda)|;
/// d is the number of events by default.
inline InformationCriteria information_criteria(const SurvivalDataset& data, const LambdaPath& path,
                                                BicSampleSize size = BicSampleSize::events)
{
    if (data.events() == 0) throw Error("information_criteria: no events");
    const double d = size == BicSampleSize::events ? data.events() : data.n();
    InformationCriteria ic;
    for (const auto& fit : path.fits) {
        const double m2ll = -2.0 * log_partial_likelihood(data, fit.beta);
        const auto df = static_cast<double>(fit.active.size());
        ic.aic.push_back(m2ll + 2.0 * df);
        ic.bic.push_back(m2ll + std::log(d) * df);
    }
    return ic;
}

struct TuningRule
{
    enum class Kind { cv_min, cv_1se, fixed, aic, bic };
    Kind kind = Kind::cv_min;
    double fixed_lambda = 0.0;

    bool needs_cv() const { return kind == Kind::cv_min || kind == Kind::cv_1se; }
    bool needs_criteria() const { return kind == Kind::aic || kind == Kind::bic; }

    static TuningRule parse(const std::string& s)
    {
        if (s == "cv_min" || s == "min") return {Kind::cv_min, 0.0};
        if (s == "cv_1se" || s == "1se") return {Kind::cv_1se, 0.0};
        if (s == "aic") return {Kind::aic, 0.0};
        if (s == "bic") return {Kind::bic, 0.0};
        if (s == "fix" || s == "fixed") return {Kind::fixed, 0.0};
        throw Error("unknown tuning rule '" + s + "'");
    }

    std::string name() const
    {
        switch (kind) {
        case Kind::cv_min: return "cv_min";
        case Kind::cv_1se: return "cv_1se";
        case Kind::fixed: return "fix";
        case Kind::aic: return "aic";
        case Kind::bic: return "bic";
        }
        return "?";
    }
};

namespace detail {

// Index of the minimum; the first (largest-lambda) index wins ties.
inline size_t argmin_prefer_first(const std::vector<double>& v)
{
    size_t best = 0;
    for (size_t k = 1; k < v.size(); ++k)
        if (v[k] < v[best]) best = k;
    return best;
}

} // namespace detail

/// Picks lambda for the rule. `lambdas` must be decreasing, matching the cv
/// curve or criteria when those are supplied.
inline double select_lambda(const TuningRule& rule, const std::vector<double>& lambdas, const CvCurve* cv,
                            const InformationCriteria* ic)
{
    switch (rule.kind) {
    case TuningRule::Kind::fixed:
        if (!(rule.fixed_lambda >= 0.0)) throw Error("select_lambda: fixed lambda must be nonnegative");
        return rule.fixed_lambda;
    case TuningRule::Kind::cv_min:
    case TuningRule::Kind::cv_1se: {
        if (!cv) throw Error("select_lambda: rule " + rule.name() + " needs a cross-validation curve");
        const size_t best = detail::argmin_prefer_first(cv->deviance);
        if (rule.kind == TuningRule::Kind::cv_min) return cv->lambdas[best];
        const double bound = cv->deviance[best] + cv->se[best];
        for (size_t k = 0; k < cv->lambdas.size(); ++k)
            if (cv->deviance[k] <= bound) return cv->lambdas[k];
        return cv->lambdas[best];
    }
    case TuningRule::Kind::aic:
    case TuningRule::Kind::bic: {
        if (!ic) throw Error("select_lambda: rule " + rule.name() + " needs information criteria");
        const auto& crit = rule.kind == TuningRule::Kind::aic ? ic->aic : ic->bic;
        if (crit.size() != lambdas.size()) throw Error("select_lambda: criteria do not match the path");
        return lambdas[detail::argmin_prefer_first(crit)];
    }
    }
    throw Error("select_lambda: unknown rule");
}

// ---------------------------------------------------------------------------
// Full selection pipeline: weights -> path -> tuning -> fit at chosen lambda.
// ---------------------------------------------------------------------------

enum class LassoFlavor { standard, adaptive };

inline LassoFlavor parse_flavor(const std::string& s)
{
    if (s == "standard") return LassoFlavor::standard;
    if (s == "adaptive") return LassoFlavor::adaptive;
    throw Error("unknown lasso flavor '" + s + "'");
}

inline std::string flavor_name(LassoFlavor f)
{
    return f == LassoFlavor::standard ? "standard" : "adaptive";
}

struct SelectionOptions
{
    int n_lambda = 100;
    double eps = 0.0; // 0 = 0.01, or 0.05 when n < p
    int folds = 10;
    int gamma = 1;
    double ridge = 1e-3;
    BicSampleSize bic_size = BicSampleSize::events;
    LassoOptions lasso;
};

/// Ridge-penalized Cox fit maximizing l(beta) - (ridge * n / 2) ||beta||^2.
inline Vector fit_cox_ridge(const SurvivalDataset& data, double ridge, int max_iter = 100)
{
    const int p = data.p();
    const double kappa = ridge * data.n();
    const IndexList all = all_indices(p);
    Vector beta = Vector::Zero(p);
    const auto objective = [&](const Vector& b) {
        return log_partial_likelihood(data, b, all) - 0.5 * kappa * b.squaredNorm();
    };
    double obj = objective(beta);
    for (int it = 0; it < max_iter; ++it) {
        const auto ev = detail::evaluate(data, beta, all, detail::Want::information);
        const Vector grad = ev.score - kappa * beta;
        const Matrix hess = ev.information + kappa * Matrix::Identity(p, p);
        const Vector step = hess.ldlt().solve(grad);
        double t = 1.0;
        Vector trial = beta + step;
        double tobj = objective(trial);
        for (int h = 0; h < 30 && tobj < obj; ++h) {
            t *= 0.5;
            trial = beta + t * step;
            tobj = objective(trial);
        }
        if (tobj < obj) break;
        const double change = std::abs(tobj - obj) / std::max(1.0, std::abs(tobj));
        beta = trial;
        obj = tobj;
        if (change < 1e-12 || step.cwiseAbs().maxCoeff() < 1e-10) break;
    }
    return beta;
}

/// Initial estimator for adaptive weights: the unpenalized MLE when p < n/2
/// and it converges, otherwise a lightly ridge-penalized fit.
inline Vector adaptive_initial_estimate(const SurvivalDataset& data, double ridge)
{
    if (2 * data.p() < data.n()) {
        const auto mle = fit_cox_mle(data);
        if (mle.converged && !mle.separation && !mle.rank_deficient) return mle.beta;
    }
    return fit_cox_ridge(data, ridge);
}

inline PenaltyWeights make_weights(const SurvivalDataset& data, LassoFlavor flavor, const SelectionOptions& opt)
{
    if (flavor == LassoFlavor::standard) return PenaltyWeights::ones(data.p());
    return adaptive_weights(adaptive_initial_estimate(data, opt.ridge), opt.gamma);
}

struct SelectionResult
{
    PenalizedFit fit;
    PenaltyWeights weights;
    double lambda = 0.0;
    LambdaPath path;
    std::optional<CvCurve> cv;
    std::optional<InformationCriteria> criteria;
};

/// Runs the complete selection step on (standardized) data.
inline SelectionResult select_model(const SurvivalDataset& data, LassoFlavor flavor, const TuningRule& rule,
                                    Rng& rng, const SelectionOptions& opt = {})
{
    SelectionResult out;
    out.weights = make_weights(data, flavor, opt);
    out.path = lambda_path(data, out.weights, opt.n_lambda, opt.eps, opt.lasso);
    if (rule.needs_cv()) out.cv = cross_validate(data, out.weights, out.path.lambdas, opt.folds, rng, opt.lasso);
    if (rule.needs_criteria()) out.criteria = information_criteria(data, out.path, opt.bic_size);
    out.lambda = select_lambda(rule, out.path.lambdas, out.cv ? &*out.cv : nullptr,
                               out.criteria ? &*out.criteria : nullptr);

    const auto& lams = out.path.lambdas;
    const auto hit = std::find(lams.begin(), lams.end(), out.lambda);
    if (hit != lams.end()) {
        out.fit = out.path.fits[static_cast<size_t>(hit - lams.begin())];
    } else {
        // Off-path lambda (fixed rule): warm start from the nearest larger grid point.
        std::optional<Vector> warm;
        for (size_t k = 0; k < lams.size() && lams[k] >= out.lambda; ++k) warm = out.path.fits[k].beta;
        out.fit = fit_cox_lasso(data, out.lambda, out.weights, warm, opt.lasso);
    }
    return out;
}

} // namespace coxsel
