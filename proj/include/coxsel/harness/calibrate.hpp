#pragma once

#include "coxsel/datagen.hpp"
#include "coxsel/penalized_cox.hpp"

namespace coxsel::harness {

struct FixedLambdaCalibration
{
    double lambda = kNaN;
    std::vector<double> draws; // cv_min lambda of every repetition
};

/// Median cv_min lambda over `n_rep` subsamples of size scenario.n drawn
/// without replacement from one large dataset of size n_pop. Lambdas refer
/// to standardized covariates and the summed log partial likelihood.
inline FixedLambdaCalibration calibrate_fixed_lambda(const Scenario& scenario, LassoFlavor flavor, int n_pop,
                                                     int n_rep, std::uint64_t seed, const SelectionOptions& opt = {})
{
    if (n_pop < scenario.n) throw Error("calibrate_fixed_lambda: population smaller than n");
    if (n_rep < 1) throw Error("calibrate_fixed_lambda: need at least one repetition");
    Rng pop_rng(derive_seed(seed, scenario.id + "|fixpop", 0));
    const auto pop = generate(scenario, n_pop, pop_rng).data;
    const TuningRule rule = TuningRule::parse("cv_min");

    FixedLambdaCalibration out;
    for (int r = 0; r < n_rep; ++r) {
        Rng rng(derive_seed(seed, scenario.id + "|fix|" + flavor_name(flavor), static_cast<std::uint64_t>(r)));
        auto perm = random_permutation(n_pop, rng);
        perm.resize(static_cast<size_t>(scenario.n));
        std::sort(perm.begin(), perm.end());
        const auto sub = pop.rows(perm).standardized();
        try {
            out.draws.push_back(select_model(sub, flavor, rule, rng, opt).lambda);
        } catch (const Error&) {
            // a subsample without enough events for CV contributes nothing
        }
    }
    if (out.draws.empty()) throw Error("calibrate_fixed_lambda: no repetition succeeded for " + scenario.id);
    out.lambda = quantile_type7(out.draws, 0.5);
    return out;
}

} // namespace coxsel::harness
