#pragma once

// Confidence intervals after Lasso selection: full-model and oracle Wald
// intervals, naive refits, sample splitting, the debiased Lasso and
// polyhedral (exact) post-selection inference.

#include "coxsel/common.hpp"
#include "coxsel/normal.hpp"
#include "coxsel/penalized_cox.hpp"
#include "coxsel/survival_core.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace coxsel {

enum class TargetKind { submodel, full_model };

enum class Method { full, oracle, refit, refit0, split, debiased, exact_psi };

inline const std::vector<Method>& all_methods()
{
    static const std::vector<Method> m{Method::full,  Method::oracle,   Method::refit,    Method::refit0,
                                       Method::split, Method::debiased, Method::exact_psi};
    return m;
}

inline std::string method_name(Method m)
{
    switch (m) {
    case Method::full: return "full";
    case Method::oracle: return "oracle";
    case Method::refit: return "refit";
    case Method::refit0: return "refit0";
    case Method::split: return "split";
    case Method::debiased: return "debiased";
    case Method::exact_psi: return "exact_psi";
    }
    return "?";
}

inline Method parse_method(const std::string& s)
{
    for (Method m : all_methods())
        if (method_name(m) == s) return m;
    if (s == "exact" || s == "psi") return Method::exact_psi;
    throw Error("unknown method '" + s + "'");
}

/// Methods whose coefficient set comes from a Lasso fit.
inline bool uses_lasso(Method m)
{
    return m != Method::full && m != Method::oracle;
}

inline std::string target_name(TargetKind t)
{
    return t == TargetKind::submodel ? "submodel" : "full_model";
}

struct SelectiveInterval
{
    int coef_index = 0; // zero-based
    double estimate = kNaN;
    double lower = -kInf;
    double upper = kInf;
    double se = kNaN;
    double alpha = 0.1;
    TargetKind target = TargetKind::submodel;
    Method method = Method::full;
    bool degenerate = false;

    double width() const { return upper - lower; }
    bool covers(double truth) const { return lower <= truth && truth <= upper; }
};

struct InferenceResult
{
    Method method = Method::full;
    IndexList selected; // coefficient set the intervals refer to
    std::vector<SelectiveInterval> intervals;
    bool separation = false;
    bool not_converged = false;
    bool split_no_events = false;
    bool singular = false;

    const SelectiveInterval* find(int j) const
    {
        for (const auto& iv : intervals)
            if (iv.coef_index == j) return &iv;
        return nullptr;
    }
};

struct SelectionEvent
{
    IndexList active;
    std::vector<int> signs;
    double lambda = 0.0;
    PenaltyWeights weights;

    static SelectionEvent from(const PenalizedFit& fit, const PenaltyWeights& weights)
    {
        return {fit.active, fit.signs, fit.lambda, weights};
    }
};

namespace detail {

inline void check_alpha(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("inference: alpha must lie in (0,1)");
}

inline std::vector<SelectiveInterval> from_wald(const std::vector<WaldInterval>& wald, const IndexList& subset,
                                                double alpha, TargetKind target, Method method)
{
    std::vector<SelectiveInterval> out;
    for (size_t k = 0; k < subset.size(); ++k) {
        const auto& w = wald[k];
        SelectiveInterval iv;
        iv.coef_index = subset[k];
        iv.estimate = w.estimate;
        iv.lower = w.lower;
        iv.upper = w.upper;
        iv.se = w.se;
        iv.alpha = alpha;
        iv.target = target;
        iv.method = method;
        iv.degenerate = w.degenerate;
        out.push_back(iv);
    }
    return out;
}

inline InferenceResult wald_on_subset(const SurvivalDataset& data, const IndexList& subset, double alpha,
                                      TargetKind target, Method method)
{
    check_alpha(alpha);
    InferenceResult res;
    res.method = method;
    res.selected = subset;
    if (subset.empty()) return res;
    const auto fit = fit_cox_mle(data, subset);
    res.separation = fit.separation;
    res.not_converged = !fit.converged;
    res.singular = fit.rank_deficient;
    res.intervals = from_wald(wald_ci(fit, alpha), subset, alpha, target, method);
    if (fit.separation)
        for (auto& iv : res.intervals) iv.degenerate = true;
    return res;
}

inline std::vector<SelectiveInterval> degenerate_intervals(const IndexList& subset, const Vector& estimate,
                                                           double alpha, TargetKind target, Method method)
{
    std::vector<SelectiveInterval> out;
    for (size_t k = 0; k < subset.size(); ++k) {
        SelectiveInterval iv;
        iv.coef_index = subset[k];
        iv.estimate = estimate.size() > 0 ? estimate[static_cast<Eigen::Index>(k)] : kNaN;
        iv.se = kInf;
        iv.alpha = alpha;
        iv.target = target;
        iv.method = method;
        iv.degenerate = true;
        out.push_back(iv);
    }
    return out;
}

} // namespace detail

/// Unpenalized MLE on all covariates with Wald intervals.
inline InferenceResult infer_full(const SurvivalDataset& data, double alpha)
{
    return detail::wald_on_subset(data, all_indices(data.p()), alpha, TargetKind::full_model, Method::full);
}

/// Wald intervals from the model restricted to the truly active covariates.
inline InferenceResult infer_oracle(const SurvivalDataset& data, const IndexList& true_active, double alpha)
{
    return detail::wald_on_subset(data, true_active, alpha, TargetKind::submodel, Method::oracle);
}

/// Naive refit: unpenalized Cox model on the selected set.
inline InferenceResult infer_refit(const SurvivalDataset& data, const SelectionEvent& event, double alpha)
{
    return detail::wald_on_subset(data, event.active, alpha, TargetKind::submodel, Method::refit);
}

/// One Newton step from the Lasso estimate on the selected set, Wald
/// intervals from the information at the one-step point.
inline InferenceResult infer_refit0(const SurvivalDataset& data, const PenalizedFit& fit, double alpha)
{
    detail::check_alpha(alpha);
    InferenceResult res;
    res.method = Method::refit0;
    res.selected = fit.active;
    if (fit.active.empty()) return res;
    const Vector start = fit.beta(fit.active);
    try {
        const Vector bar = one_step_update(data, start, fit.active);
        const Matrix info = information(data, bar, fit.active);
        res.intervals = detail::from_wald(wald_ci(bar, info, alpha), fit.active, alpha, TargetKind::submodel,
                                          Method::refit0);
    } catch (const Error&) {
        res.singular = true;
        res.intervals = detail::degenerate_intervals(fit.active, start, alpha, TargetKind::submodel, Method::refit0);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Sample splitting
// ---------------------------------------------------------------------------

struct SplitHalves
{
    std::vector<int> select;
    std::vector<int> infer;
};

/// Event-stratified 50/50 partition: events and censored records are each
/// shuffled and dealt alternately, so both halves keep events when d >= 2.
inline std::optional<SplitHalves> split_sample(const SurvivalDataset& data, Rng& rng)
{
    if (data.n() < 4) throw Error("infer_split: need at least 4 records");
    for (int attempt = 0; attempt < 10; ++attempt) {
        SplitHalves h;
        const auto perm = random_permutation(data.n(), rng);
        int ne = 0, nc = 0;
        // Start the censored deal on the half that received fewer events.
        std::vector<int> ev, ce;
        for (int i : perm) (data.status()[i] == 1 ? ev : ce).push_back(i);
        for (int i : ev) (ne++ % 2 == 0 ? h.select : h.infer).push_back(i);
        const int offset = static_cast<int>(ev.size() % 2);
        for (int i : ce) ((nc++ + offset) % 2 == 0 ? h.select : h.infer).push_back(i);
        std::sort(h.select.begin(), h.select.end());
        std::sort(h.infer.begin(), h.infer.end());
        const auto has_event = [&](const std::vector<int>& idx) {
            return std::any_of(idx.begin(), idx.end(), [&](int i) { return data.status()[i] == 1; });
        };
        if (has_event(h.select) && has_event(h.infer)) return h;
    }
    return std::nullopt;
}

struct SplitSelection
{
    LassoFlavor flavor = LassoFlavor::standard;
    TuningRule rule;
    SelectionOptions options;
};

/// Selects on one half with the full penalized pipeline and reports Wald
/// intervals from the refit on the other half.
inline InferenceResult infer_split(const SurvivalDataset& data, const SplitSelection& spec, double alpha, Rng& rng,
                                   std::optional<SelectionEvent>* event_out = nullptr)
{
    detail::check_alpha(alpha);
    InferenceResult res;
    res.method = Method::split;
    const auto halves = split_sample(data, rng);
    if (!halves) {
        res.split_no_events = true;
        return res;
    }
    const auto a = data.rows(halves->select);
    const auto b = data.rows(halves->infer);
    SelectionResult sel;
    try {
        sel = select_model(a, spec.flavor, spec.rule, rng, spec.options);
    } catch (const Error&) {
        // Typically too few events in a CV fold of the half sample.
        res.split_no_events = true;
        return res;
    }
    if (event_out) *event_out = SelectionEvent::from(sel.fit, sel.weights);
    res = detail::wald_on_subset(b, sel.fit.active, alpha, TargetKind::submodel, Method::split);
    res.not_converged = res.not_converged || !sel.fit.converged;
    return res;
}

// ---------------------------------------------------------------------------
// Debiased Lasso
// ---------------------------------------------------------------------------

struct NodewiseInverse
{
    Matrix theta;
    Vector tau_sq;
    Vector nodewise_lambdas;
    std::vector<bool> degenerate;
};

struct NodewiseRule
{
    double c = 1.0; // lambda_j = c * sqrt(log p / n)
    bool sandwich = true;
};

/// Nodewise Lasso inverse of a symmetric PSD matrix with a shared penalty.
inline NodewiseInverse nodewise_inverse(const Matrix& sigma, double lambda, int max_sweeps = 10000, double tol = 1e-12)
{
    const auto p = sigma.rows();
    NodewiseInverse out;
    out.theta = Matrix::Zero(p, p);
    out.tau_sq = Vector::Zero(p);
    out.nodewise_lambdas = Vector::Constant(p, lambda);
    out.degenerate.assign(static_cast<size_t>(p), false);
    for (Eigen::Index j = 0; j < p; ++j) {
        std::vector<Eigen::Index> others;
        for (Eigen::Index k = 0; k < p; ++k)
            if (k != j) others.push_back(k);
        const auto q = static_cast<Eigen::Index>(others.size());
        Vector gamma = Vector::Zero(q);
        Vector ag = Vector::Zero(q); // A gamma
        for (int sweep = 0; sweep < max_sweeps && q > 0; ++sweep) {
            double change = 0.0;
            for (Eigen::Index k = 0; k < q; ++k) {
                const double akk = sigma(others[static_cast<size_t>(k)], others[static_cast<size_t>(k)]);
                if (!(akk > 0.0)) continue;
                const double bk = sigma(others[static_cast<size_t>(k)], j);
                const double partial = bk - (ag[k] - akk * gamma[k]);
                const double ng = detail::soft_threshold(partial, lambda) / akk;
                const double delta = ng - gamma[k];
                if (delta == 0.0) continue;
                for (Eigen::Index l = 0; l < q; ++l)
                    ag[l] += sigma(others[static_cast<size_t>(l)], others[static_cast<size_t>(k)]) * delta;
                gamma[k] = ng;
                change = std::max(change, std::abs(delta));
            }
            if (change < tol) break;
        }
        double bg = 0.0;
        for (Eigen::Index k = 0; k < q; ++k) bg += sigma(others[static_cast<size_t>(k)], j) * gamma[k];
        const double tau = sigma(j, j) - bg;
        out.tau_sq[j] = tau;
        if (!(tau > 1e-10)) {
            out.degenerate[static_cast<size_t>(j)] = true;
            out.theta.row(j).setConstant(kNaN);
            continue;
        }
        out.theta(j, j) = 1.0 / tau;
        for (Eigen::Index k = 0; k < q; ++k) out.theta(j, others[static_cast<size_t>(k)]) = -gamma[k] / tau;
    }
    return out;
}

/// Sigma-hat = I(beta_hat)/n, penalty c * sqrt(log p / n).
inline NodewiseInverse estimate_nodewise_inverse(const SurvivalDataset& data, const Vector& beta_hat,
                                                 const NodewiseRule& rule = {})
{
    if (!(rule.c >= 0.0)) throw Error("estimate_nodewise_inverse: c must be nonnegative");
    const double n = data.n();
    const Matrix sigma = information(data, beta_hat) / n;
    const double lambda = rule.c * std::sqrt(std::log(static_cast<double>(data.p())) / n);
    return nodewise_inverse(sigma, lambda);
}

/// beta_tilde = beta_hat + Theta U(beta_hat) / n with intervals
/// beta_tilde_j +- z sigma_j / sqrt(n), computed for every coefficient.
inline InferenceResult infer_debiased(const SurvivalDataset& data, const PenalizedFit& fit,
                                      const NodewiseInverse& nodewise, double alpha, bool sandwich = true)
{
    detail::check_alpha(alpha);
    const int p = data.p();
    if (nodewise.theta.rows() != p) throw Error("infer_debiased: nodewise inverse has wrong dimension");
    const double n = data.n();
    const double z = norm_quantile(1.0 - alpha / 2.0);
    const auto ev = detail::evaluate(data, fit.beta, all_indices(p), detail::Want::information);
    const Matrix sigma = ev.information / n;

    InferenceResult res;
    res.method = Method::debiased;
    res.selected = fit.active;
    for (int j = 0; j < p; ++j) {
        SelectiveInterval iv;
        iv.coef_index = j;
        iv.alpha = alpha;
        iv.target = TargetKind::full_model;
        iv.method = Method::debiased;
        if (nodewise.degenerate[static_cast<size_t>(j)]) {
            iv.estimate = fit.beta[j];
            iv.se = kInf;
            iv.degenerate = true;
            res.singular = true;
            res.intervals.push_back(iv);
            continue;
        }
        const auto row = nodewise.theta.row(j);
        iv.estimate = fit.beta[j] + row.dot(ev.score) / n;
        const double var = sandwich ? row.dot(sigma * row.transpose()) : nodewise.theta(j, j);
        if (!(var > 0.0) || !std::isfinite(var)) {
            iv.se = kInf;
            iv.degenerate = true;
            res.singular = true;
        } else {
            iv.se = std::sqrt(var / n);
            iv.lower = iv.estimate - z * iv.se;
            iv.upper = iv.estimate + z * iv.se;
        }
        res.intervals.push_back(iv);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Polyhedral (exact) post-selection inference
// ---------------------------------------------------------------------------

struct TruncationBounds
{
    double value = 0.0; // eta' y
    double sigma = 0.0; // sqrt(eta' Sigma eta)
    double v_minus = -kInf;
    double v_plus = kInf;
};

/// Truncation interval of eta'y given {A y <= b}, y ~ N(mu, Sigma).
inline TruncationBounds polyhedral_bounds(const Matrix& a, const Vector& b, const Vector& y, const Matrix& sigma,
                                          const Vector& eta)
{
    TruncationBounds out;
    const Vector se = sigma * eta;
    const double var = eta.dot(se);
    if (!(var > 0.0)) throw Error("polyhedral_bounds: eta has zero variance");
    out.sigma = std::sqrt(var);
    out.value = eta.dot(y);
    const Vector c = se / var;
    const Vector zz = y - c * out.value;
    const Vector ac = a * c;
    const Vector resid = b - a * zz;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (ac[i] > 1e-14 * c.cwiseAbs().maxCoeff() * a.row(i).cwiseAbs().maxCoeff())
            out.v_plus = std::min(out.v_plus, resid[i] / ac[i]);
        else if (ac[i] < -1e-14 * c.cwiseAbs().maxCoeff() * a.row(i).cwiseAbs().maxCoeff())
            out.v_minus = std::max(out.v_minus, resid[i] / ac[i]);
    }
    return out;
}

struct PivotInterval
{
    double lower = -kInf;
    double upper = kInf;
    bool degenerate = false;
};

/// The set of mu with F^{mu,sigma^2}_{[V-,V+]}(value) in [alpha/2, 1 - alpha/2],
/// found by bisection (the pivot is decreasing in mu).
inline PivotInterval invert_truncated_pivot(const TruncationBounds& tb, double alpha, double max_sigmas = 1e6)
{
    PivotInterval out;
    const double s = tb.sigma;
    if (!(tb.v_plus - tb.v_minus >= 1e-10 * s) || tb.value < tb.v_minus || tb.value > tb.v_plus) {
        out.degenerate = true;
        return out;
    }
    const auto pivot = [&](double mu) { return truncated_normal_cdf(tb.value, mu, s, tb.v_minus, tb.v_plus); };

    // Solves pivot(mu) = target; returns +-inf when not bracketed within max_sigmas.
    const auto solve = [&](double target, bool& bounded) {
        double lo = tb.value - s, hi = tb.value + s;
        double step = s;
        while (pivot(lo) < target) {
            step *= 2.0;
            lo = tb.value - step;
            if (step > max_sigmas * s) {
                bounded = false;
                return -kInf;
            }
        }
        step = s;
        while (pivot(hi) > target) {
            step *= 2.0;
            hi = tb.value + step;
            if (step > max_sigmas * s) {
                bounded = false;
                return kInf;
            }
        }
        for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(s, std::abs(lo) + std::abs(hi)); ++it) {
            const double mid = 0.5 * (lo + hi);
            (pivot(mid) > target ? lo : hi) = mid;
        }
        bounded = true;
        return 0.5 * (lo + hi);
    };
    bool lb = true, ub = true;
    out.lower = solve(1.0 - alpha / 2.0, lb);
    out.upper = solve(alpha / 2.0, ub);
    out.degenerate = !lb || !ub;
    return out;
}

/// Affine sign constraints of the selection event in A y <= b form:
/// diag(s)(y - lambda Sigma W s) >= 0.
inline std::pair<Matrix, Vector> selection_constraints(const std::vector<int>& signs, const Vector& weights,
                                                       double lambda, const Matrix& sigma)
{
    const auto q = static_cast<Eigen::Index>(signs.size());
    Vector s(q);
    for (Eigen::Index k = 0; k < q; ++k) s[k] = signs[static_cast<size_t>(k)];
    const Vector shift = lambda * (sigma * weights.cwiseProduct(s));
    Matrix a = Matrix::Zero(q, q);
    Vector b(q);
    for (Eigen::Index k = 0; k < q; ++k) {
        a(k, k) = -s[k];
        b[k] = -s[k] * shift[k];
    }
    return {a, b};
}

/// Polyhedral intervals for the selected coefficients at a fixed lambda,
/// using the one-step estimator on E as the Gaussian statistic. With
/// `constrained` false the selection event is ignored (untruncated pivot).
inline InferenceResult infer_exact_psi(const SurvivalDataset& data, const PenalizedFit& fit,
                                       const PenaltyWeights& weights, double alpha, bool constrained = true)
{
    detail::check_alpha(alpha);
    InferenceResult res;
    res.method = Method::exact_psi;
    res.selected = fit.active;
    const IndexList& e = fit.active;
    if (e.empty()) return res;
    const Vector start = fit.beta(e);
    Vector bar;
    Matrix sigma;
    try {
        bar = one_step_update(data, start, e);
        const Matrix info = information(data, bar, e);
        Eigen::LDLT<Matrix> ldlt(info);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw Error("singular information");
        sigma = ldlt.solve(Matrix::Identity(info.rows(), info.cols()));
        if (!sigma.allFinite()) throw Error("singular information");
    } catch (const Error&) {
        res.singular = true;
        res.intervals = detail::degenerate_intervals(e, start, alpha, TargetKind::submodel, Method::exact_psi);
        return res;
    }
    auto [a, b] = selection_constraints(fit.signs, weights.w(e), fit.lambda, sigma);
    if (!constrained) {
        a.resize(0, sigma.cols());
        b.resize(0);
    }
    const auto q = static_cast<Eigen::Index>(e.size());
    for (Eigen::Index k = 0; k < q; ++k) {
        const Vector eta = Vector::Unit(q, k);
        const auto tb = polyhedral_bounds(a, b, bar, sigma, eta);
        const auto pi = invert_truncated_pivot(tb, alpha);
        SelectiveInterval iv;
        iv.coef_index = e[static_cast<size_t>(k)];
        iv.estimate = bar[k];
        iv.se = tb.sigma;
        iv.alpha = alpha;
        iv.target = TargetKind::submodel;
        iv.method = Method::exact_psi;
        iv.degenerate = pi.degenerate;
        iv.lower = pi.degenerate ? -kInf : pi.lower;
        iv.upper = pi.degenerate ? kInf : pi.upper;
        res.intervals.push_back(iv);
    }
    return res;
}

/// Maps intervals computed on standardized covariates back to the original
/// covariate scale (coefficients divide by the column scale).
inline void to_original_scale(InferenceResult& res, const Standardization& st)
{
    if (st.is_identity()) return;
    for (auto& iv : res.intervals) {
        const double s = st.scale[iv.coef_index];
        iv.estimate /= s;
        iv.lower /= s;
        iv.upper /= s;
        iv.se /= s;
    }
}

inline Vector to_original_scale(const Vector& beta_std, const Standardization& st)
{
    if (st.is_identity()) return beta_std;
    return beta_std.cwiseQuotient(st.scale);
}

} // namespace coxsel
