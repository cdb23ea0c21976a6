#pragma once

// Cox partial-likelihood machinery: evaluation, derivatives, Newton fitting,
// Breslow baseline and Wald intervals.
//
// All routines take a column subset so that submodel fits never need to copy
// the dataset. Observed times are required to be distinct; the risk set of an
// event at Y_i is {j : Y_j >= Y_i}.

#include "coxsel/common.hpp"
#include "coxsel/normal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>

namespace coxsel {

/// Per-column (center, scale). Empty vectors mean the identity transform.
struct Standardization
{
    Vector center;
    Vector scale;

    bool is_identity() const { return center.size() == 0; }

    static Standardization identity() { return {}; }
};

/// Observed (Y, delta, X) triples with the standardization that produced X.
class SurvivalDataset
{
public:
    SurvivalDataset(Vector time, IntVector status, Matrix x, Standardization standardization = {})
        : time_(std::move(time)), status_(std::move(status)), x_(std::move(x)),
          standardization_(std::move(standardization))
    {
        validate();
        order_.resize(static_cast<size_t>(n()));
        std::iota(order_.begin(), order_.end(), 0);
        std::sort(order_.begin(), order_.end(), [this](int a, int b) { return time_[a] < time_[b]; });
        for (size_t k = 1; k < order_.size(); ++k) {
            if (time_[order_[k]] == time_[order_[k - 1]])
                throw Error("SurvivalDataset: tied observed time " + std::to_string(time_[order_[k]]) +
                            " (jitter ties before construction)");
        }
        events_ = static_cast<int>(status_.sum());
    }

    int n() const { return static_cast<int>(time_.size()); }
    int p() const { return static_cast<int>(x_.cols()); }
    int events() const { return events_; }

    const Vector& time() const { return time_; }
    const IntVector& status() const { return status_; }
    const Matrix& x() const { return x_; }
    const Standardization& standardization() const { return standardization_; }

    /// Row indices sorted by ascending observed time.
    const std::vector<int>& order() const { return order_; }

    /// Centers each column on its mean and scales by its sample standard
    /// deviation. Columns with zero spread keep scale 1.
    SurvivalDataset standardized() const
    {
        if (!standardization_.is_identity()) throw Error("SurvivalDataset: already standardized");
        Standardization s;
        s.center = x_.colwise().mean().transpose();
        s.scale.resize(p());
        for (int j = 0; j < p(); ++j) {
            const double ss = (x_.col(j).array() - s.center[j]).square().sum();
            const double sd = n() > 1 ? std::sqrt(ss / (n() - 1)) : 0.0;
            s.scale[j] = sd > 1e-12 ? sd : 1.0;
        }
        return with_standardization(s);
    }

    /// Applies an externally fitted standardization (e.g. from a training set).
    SurvivalDataset with_standardization(const Standardization& s) const
    {
        if (!standardization_.is_identity()) throw Error("SurvivalDataset: already standardized");
        if (s.is_identity()) return *this;
        Matrix z = (x_.rowwise() - s.center.transpose()).array().rowwise() / s.scale.transpose().array();
        return SurvivalDataset(time_, status_, std::move(z), s);
    }

    SurvivalDataset rows(std::span<const int> idx) const
    {
        Vector t(static_cast<Eigen::Index>(idx.size()));
        IntVector d(static_cast<Eigen::Index>(idx.size()));
        Matrix xs(static_cast<Eigen::Index>(idx.size()), p());
        for (size_t k = 0; k < idx.size(); ++k) {
            const auto i = idx[k];
            if (i < 0 || i >= n()) throw Error("SurvivalDataset::rows: index out of range");
            const auto r = static_cast<Eigen::Index>(k);
            t[r] = time_[i];
            d[r] = status_[i];
            xs.row(r) = x_.row(i);
        }
        return SurvivalDataset(std::move(t), std::move(d), std::move(xs), standardization_);
    }

    SurvivalDataset columns(const IndexList& cols) const
    {
        Matrix xs = x_(Eigen::all, cols);
        Standardization s;
        if (!standardization_.is_identity()) {
            s.center = standardization_.center(cols);
            s.scale = standardization_.scale(cols);
        }
        return SurvivalDataset(time_, status_, std::move(xs), std::move(s));
    }

private:
    void validate() const
    {
        if (time_.size() < 2) throw Error("SurvivalDataset: need n >= 2");
        if (status_.size() != time_.size() || x_.rows() != time_.size())
            throw Error("SurvivalDataset: inconsistent row counts");
        for (Eigen::Index i = 0; i < time_.size(); ++i) {
            if (!std::isfinite(time_[i]) || time_[i] <= 0.0)
                throw Error("SurvivalDataset: time must be positive and finite (row " + std::to_string(i + 1) + ")");
            if (status_[i] != 0 && status_[i] != 1)
                throw Error("SurvivalDataset: status must be 0/1 (row " + std::to_string(i + 1) + ")");
        }
        if (!x_.allFinite()) throw Error("SurvivalDataset: non-finite covariate value");
        if (!standardization_.is_identity()) {
            if (standardization_.center.size() != x_.cols() || standardization_.scale.size() != x_.cols())
                throw Error("SurvivalDataset: standardization length mismatch");
            if ((standardization_.scale.array() <= 0.0).any())
                throw Error("SurvivalDataset: standardization scale must be positive");
        }
    }

    Vector time_;
    IntVector status_;
    Matrix x_;
    Standardization standardization_;
    std::vector<int> order_;
    int events_ = 0;
};

struct CoxFit
{
    Vector beta;
    double loglik = 0.0;
    Vector score_at_solution;
    Matrix information;
    bool converged = false;
    bool separation = false;
    bool rank_deficient = false;
    int iterations = 0;
    IndexList subset;
};

struct CoxOptions
{
    int max_iter = 100;
    double rel_tol = 1e-9;
    double score_tol = 1e-8;
    int max_halving = 20;
    double divergence_bound = 50.0;
};

namespace detail {

enum class Want { loglik, score, information };

struct CoxEval
{
    double loglik = 0.0;
    Vector score;
    Matrix information;
};

inline void check_subset(const SurvivalDataset& data, const Vector& beta, const IndexList& subset)
{
    if (beta.size() != static_cast<Eigen::Index>(subset.size()))
        throw Error("cox: beta length " + std::to_string(beta.size()) + " != subset size " +
                    std::to_string(subset.size()));
    for (int j : subset)
        if (j < 0 || j >= data.p()) throw Error("cox: subset index " + std::to_string(j) + " out of range");
    if (!beta.allFinite()) throw Error("cox: non-finite coefficient vector");
}

// One pass from the latest time backwards accumulates the risk-set sums
// S0 = sum exp(eta), S1 = sum exp(eta) x, S2 = sum exp(eta) x x^T, all
// scaled by exp(-shift) where shift is the running maximum of eta over the
// risk set. Rescaling when the maximum moves keeps every term in range.
inline CoxEval evaluate(const SurvivalDataset& data, const Vector& beta, const IndexList& subset, Want want)
{
    check_subset(data, beta, subset);
    const int n = data.n();
    const auto q = static_cast<Eigen::Index>(subset.size());
    const Matrix& X = data.x();

    Vector eta = Vector::Zero(n);
    for (Eigen::Index k = 0; k < q; ++k)
        if (beta[k] != 0.0) eta.noalias() += beta[k] * X.col(subset[static_cast<size_t>(k)]);

    CoxEval out;
    const bool need_score = want != Want::loglik;
    const bool need_info = want == Want::information;
    if (need_score) out.score = Vector::Zero(q);
    if (need_info) out.information = Matrix::Zero(q, q);

    // Plain loops over preallocated buffers; s2 and the information keep
    // only their lower triangles (column-major, index r + c * q).
    const auto qq = static_cast<size_t>(q);
    std::vector<double> s1(qq, 0.0), xi(qq, 0.0), mean(qq, 0.0);
    std::vector<double> s2(need_info ? qq * qq : 0, 0.0), info(need_info ? qq * qq : 0, 0.0);
    std::vector<const double*> cols(qq);
    for (size_t k = 0; k < qq; ++k) cols[k] = X.col(subset[k]).data();
    double* score = need_score ? out.score.data() : nullptr;
    const int* status = data.status().data();

    double s0 = 0.0;
    const auto& order = data.order();
    double shift = -kInf;
    for (int r = n - 1; r >= 0; --r) {
        const int i = order[static_cast<size_t>(r)];
        if (eta[i] > shift) {
            const double factor = std::exp(shift - eta[i]);
            s0 *= factor;
            if (need_score)
                for (double& v : s1) v *= factor;
            if (need_info)
                for (double& v : s2) v *= factor;
            shift = eta[i];
        }
        const double w = std::exp(eta[i] - shift);
        s0 += w;
        if (need_score) {
            for (size_t k = 0; k < qq; ++k) {
                xi[k] = cols[k][i];
                s1[k] += w * xi[k];
            }
            if (need_info)
                for (size_t c = 0; c < qq; ++c) {
                    const double wc = w * xi[c];
                    for (size_t rr = c; rr < qq; ++rr) s2[rr + c * qq] += wc * xi[rr];
                }
        }
        if (status[i] == 1) {
            out.loglik += eta[i] - shift - std::log(s0);
            if (need_score) {
                const double inv = 1.0 / s0;
                for (size_t k = 0; k < qq; ++k) {
                    mean[k] = s1[k] * inv;
                    score[k] += xi[k] - mean[k];
                }
                if (need_info)
                    for (size_t c = 0; c < qq; ++c)
                        for (size_t rr = c; rr < qq; ++rr)
                            info[rr + c * qq] += s2[rr + c * qq] * inv - mean[rr] * mean[c];
            }
        }
    }
    if (need_info)
        for (size_t c = 0; c < qq; ++c)
            for (size_t rr = c; rr < qq; ++rr) {
                out.information(static_cast<Eigen::Index>(rr), static_cast<Eigen::Index>(c)) = info[rr + c * qq];
                out.information(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(rr)) = info[rr + c * qq];
            }
    if (!std::isfinite(out.loglik)) throw Error("cox: non-finite log partial likelihood");
    return out;
}

// Moore-Penrose inverse of a symmetric PSD matrix; also reports the rank
// deficiency and which coordinates touch the null space.
struct SymPinv
{
    Matrix inverse;
    bool rank_deficient = false;
    std::vector<bool> in_null_space;
};

inline SymPinv sym_pinv(const Matrix& a)
{
    const auto q = a.rows();
    SymPinv out;
    out.in_null_space.assign(static_cast<size_t>(q), false);
    if (q == 0) {
        out.inverse = Matrix(0, 0);
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    const Vector& ev = es.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    const double cut = top > 0.0 ? 1e-12 * top : kInf;
    Matrix inv = Matrix::Zero(q, q);
    for (Eigen::Index k = 0; k < q; ++k) {
        const Vector v = es.eigenvectors().col(k);
        if (ev[k] > cut) {
            inv.noalias() += v * v.transpose() / ev[k];
        } else {
            out.rank_deficient = true;
            for (Eigen::Index j = 0; j < q; ++j)
                if (std::abs(v[j]) > 1e-8) out.in_null_space[static_cast<size_t>(j)] = true;
        }
    }
    out.inverse = std::move(inv);
    return out;
}

} // namespace detail

/// Log partial likelihood (Breslow form without ties) restricted to `subset`.
inline double log_partial_likelihood(const SurvivalDataset& data, const Vector& beta, const IndexList& subset)
{
    return detail::evaluate(data, beta, subset, detail::Want::loglik).loglik;
}

inline double log_partial_likelihood(const SurvivalDataset& data, const Vector& beta)
{
    return log_partial_likelihood(data, beta, all_indices(data.p()));
}

inline Vector score(const SurvivalDataset& data, const Vector& beta, const IndexList& subset)
{
    return detail::evaluate(data, beta, subset, detail::Want::score).score;
}

inline Vector score(const SurvivalDataset& data, const Vector& beta)
{
    return score(data, beta, all_indices(data.p()));
}

/// Negative Hessian of the log partial likelihood.
inline Matrix information(const SurvivalDataset& data, const Vector& beta, const IndexList& subset)
{
    return detail::evaluate(data, beta, subset, detail::Want::information).information;
}

inline Matrix information(const SurvivalDataset& data, const Vector& beta)
{
    return information(data, beta, all_indices(data.p()));
}

/// Unpenalized maximum partial likelihood by Newton-Raphson with step halving,
/// started at zero.
///
/// Columns without variation are pinned at zero and mark the fit
/// `rank_deficient`; other singular directions are handled through the
/// pseudo-inverse. Monotone likelihood (a coefficient escaping to infinity) is
/// reported through `separation` with `converged` false: either a coefficient
/// leaves [-divergence_bound, divergence_bound], or the likelihood has gone
/// flat while the Newton step is still large relative to the coefficient.
inline CoxFit fit_cox_mle(const SurvivalDataset& data, const IndexList& subset, const CoxOptions& opt = {})
{
    if (subset.empty()) throw Error("fit_cox_mle: empty subset");
    const auto q = static_cast<Eigen::Index>(subset.size());

    CoxFit fit;
    fit.subset = subset;
    fit.beta = Vector::Zero(q);

    std::vector<bool> frozen(static_cast<size_t>(q), false);
    for (Eigen::Index k = 0; k < q; ++k) {
        const auto col = data.x().col(subset[static_cast<size_t>(k)]);
        const double mean = col.mean();
        const double spread = (col.array() - mean).abs().maxCoeff();
        if (spread <= 1e-12 * std::max(1.0, std::abs(mean))) {
            frozen[static_cast<size_t>(k)] = true;
            fit.rank_deficient = true;
        }
    }
    const auto newton_step = [&](const detail::CoxEval& e, bool& deficient) {
        Matrix info = e.information;
        Vector u = e.score;
        for (Eigen::Index k = 0; k < q; ++k) {
            if (!frozen[static_cast<size_t>(k)]) continue;
            info.row(k).setZero();
            info.col(k).setZero();
            u[k] = 0.0;
        }
        const auto pinv = detail::sym_pinv(info);
        deficient = pinv.rank_deficient;
        return Vector(pinv.inverse * u);
    };
    const auto free_score = [&](const detail::CoxEval& e) {
        double m = 0.0;
        for (Eigen::Index k = 0; k < q; ++k)
            if (!frozen[static_cast<size_t>(k)]) m = std::max(m, std::abs(e.score[k]));
        return m;
    };

    auto ev = detail::evaluate(data, fit.beta, subset, detail::Want::information);
    int flat = 0;
    bool deficient = false;
    for (int it = 1; it <= opt.max_iter; ++it) {
        fit.iterations = it;
        const Vector step = newton_step(ev, deficient);
        if (free_score(ev) < opt.score_tol ||
            step.cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + fit.beta.cwiseAbs().maxCoeff())) {
            fit.converged = true;
            break;
        }

        double t = 1.0;
        Vector trial = fit.beta + step;
        double trial_ll = log_partial_likelihood(data, trial, subset);
        for (int h = 0; h < opt.max_halving && !(trial_ll >= ev.loglik); ++h) {
            t *= 0.5;
            trial = fit.beta + t * step;
            trial_ll = log_partial_likelihood(data, trial, subset);
        }
        if (!(trial_ll >= ev.loglik)) break; // no ascent left along the Newton direction
        const double change = std::abs(trial_ll - ev.loglik) / std::max(1.0, std::abs(trial_ll));
        fit.beta = trial;
        ev = detail::evaluate(data, fit.beta, subset, detail::Want::information);

        if (fit.beta.cwiseAbs().maxCoeff() > opt.divergence_bound) {
            fit.separation = true;
            break;
        }
        flat = change < opt.rel_tol ? flat + 1 : 0;
        if (flat >= 3) break;
    }
    fit.loglik = ev.loglik;
    fit.score_at_solution = ev.score;
    fit.information = ev.information;

    const Vector next = newton_step(ev, deficient);
    fit.rank_deficient = fit.rank_deficient || deficient;
    if (!fit.separation) {
        for (Eigen::Index k = 0; k < q; ++k) {
            const double d = std::abs(next[k]);
            if (d > 1e-6 && d > 3e-5 * std::abs(fit.beta[k]) && std::abs(fit.beta[k]) > 1.0) {
                fit.separation = true;
                break;
            }
        }
    }
    if (fit.separation) {
        fit.converged = false;
    } else if (!fit.converged) {
        fit.converged = free_score(ev) <= 1e-6 * std::max(1.0, std::abs(ev.loglik));
    }
    return fit;
}

inline CoxFit fit_cox_mle(const SurvivalDataset& data, const CoxOptions& opt = {})
{
    return fit_cox_mle(data, all_indices(data.p()), opt);
}

/// One Newton step beta + I(beta)^{-1} U(beta) on `subset`.
inline Vector one_step_update(const SurvivalDataset& data, const Vector& beta_init, const IndexList& subset)
{
    const auto ev = detail::evaluate(data, beta_init, subset, detail::Want::information);
    Eigen::LDLT<Matrix> ldlt(ev.information);
    const double top = ev.information.cwiseAbs().maxCoeff();
    const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() || top == 0.0 ||
                          ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, top);
    if (singular) throw Error("one_step_update: singular information on subset " + to_string(subset));
    Vector out = beta_init + ldlt.solve(ev.score);
    if (!out.allFinite()) throw Error("one_step_update: non-finite update on subset " + to_string(subset));
    return out;
}

struct WaldInterval
{
    double estimate = 0.0;
    double se = 0.0;
    double lower = -kInf;
    double upper = kInf;
    bool degenerate = false;
};

/// Wald intervals beta_j +- z_{1-alpha/2} sqrt((I^{-1})_jj) from an estimate and
/// the information matrix at that estimate.
inline std::vector<WaldInterval> wald_ci(const Vector& beta, const Matrix& info, double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("wald_ci: alpha must lie in (0,1)");
    const double z = norm_quantile(1.0 - alpha / 2.0);
    const auto pinv = detail::sym_pinv(info);
    std::vector<WaldInterval> out(static_cast<size_t>(beta.size()));
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        auto& w = out[static_cast<size_t>(j)];
        w.estimate = beta[j];
        const double var = pinv.inverse(j, j);
        if (pinv.in_null_space[static_cast<size_t>(j)] || !(var > 0.0) || !std::isfinite(var)) {
            w.se = kInf;
            w.degenerate = true;
            continue;
        }
        w.se = std::sqrt(var);
        w.lower = beta[j] - z * w.se;
        w.upper = beta[j] + z * w.se;
    }
    return out;
}

inline std::vector<WaldInterval> wald_ci(const CoxFit& fit, double alpha)
{
    return wald_ci(fit.beta, fit.information, alpha);
}

/// Cumulative baseline hazard at the event times.
struct BreslowBaseline
{
    std::vector<double> event_times;
    std::vector<double> cumulative_hazard;

    double at(double t) const
    {
        if (t < 0.0) throw Error("BreslowBaseline: negative time");
        const auto it = std::upper_bound(event_times.begin(), event_times.end(), t);
        if (it == event_times.begin()) return 0.0;
        return cumulative_hazard[static_cast<size_t>(it - event_times.begin() - 1)];
    }
};

inline BreslowBaseline breslow_baseline(const SurvivalDataset& data, const Vector& beta, const IndexList& subset)
{
    detail::check_subset(data, beta, subset);
    const int n = data.n();
    Vector eta = Vector::Zero(n);
    for (size_t k = 0; k < subset.size(); ++k)
        eta.noalias() += beta[static_cast<Eigen::Index>(k)] * data.x().col(subset[k]);

    // Risk sums in the original scale; eta is bounded here by construction of
    // converged fits, and the hazard increments need absolute magnitudes.
    std::vector<double> risk(static_cast<size_t>(n));
    double s0 = 0.0;
    const auto& order = data.order();
    for (int r = n - 1; r >= 0; --r) {
        s0 += std::exp(eta[order[static_cast<size_t>(r)]]);
        risk[static_cast<size_t>(r)] = s0;
    }
    BreslowBaseline out;
    double cum = 0.0;
    for (int r = 0; r < n; ++r) {
        const int i = order[static_cast<size_t>(r)];
        if (data.status()[i] != 1) continue;
        cum += 1.0 / risk[static_cast<size_t>(r)];
        out.event_times.push_back(data.time()[i]);
        out.cumulative_hazard.push_back(cum);
    }
    return out;
}

inline BreslowBaseline breslow_baseline(const SurvivalDataset& data, const CoxFit& fit)
{
    return breslow_baseline(data, fit.beta, fit.subset);
}

/// S(t | x) = exp(-H0(t) exp(x^T beta)); `x` is a full-length covariate row.
inline double survival_probability(const BreslowBaseline& baseline, const Vector& beta, const IndexList& subset,
                                   const Vector& x, double t)
{
    if (t < 0.0) throw Error("survival_probability: negative time");
    double lp = 0.0;
    for (size_t k = 0; k < subset.size(); ++k) lp += beta[static_cast<Eigen::Index>(k)] * x[subset[k]];
    return std::exp(-baseline.at(t) * std::exp(lp));
}

inline double survival_probability(const BreslowBaseline& baseline, const CoxFit& fit, const Vector& x, double t)
{
    return survival_probability(baseline, fit.beta, fit.subset, x, t);
}

} // namespace coxsel
