#include "coxsel/harness/calibrate.hpp"
#include "coxsel/harness/config.hpp"
#include "coxsel/harness/plots.hpp"
#include "coxsel/harness/real_data.hpp"
#include "coxsel/harness/simulation.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace coxsel;
using namespace coxsel::harness;

namespace {

void warn(const std::string& msg)
{
    std::cerr << "warning: " << msg << '\n';
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Post-selection inference for penalized Cox models: simulation and real-data analysis"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    // simulate
    auto* sim = app.add_subcommand("simulate", "run (or resume) a simulation grid");
    std::string sim_config, sim_out;
    std::optional<std::uint64_t> sim_seed;
    int sim_threads = 1;
    std::optional<int> sim_nsim;
    bool inline_timings = false;
    sim->add_option("--config", sim_config, "JSON configuration")->required()->check(CLI::ExistingFile);
    sim->add_option("--out", sim_out, "output directory")->required();
    sim->add_option("--seed", sim_seed, "base seed (overrides the config)");
    sim->add_option("--threads", sim_threads, "worker threads")->check(CLI::PositiveNumber);
    sim->add_option("--nsim", sim_nsim, "replicates per scenario (overrides the config)")->check(CLI::PositiveNumber);
    sim->add_flag("--inline-timings", inline_timings, "write runtimes into the long table instead of NA");

    // analyze-real
    auto* real = app.add_subcommand("analyze-real", "subsampling analysis of a real dataset");
    std::string data_path, time_col, event_col, cov_spec = "all", methods_s = "refit,split,debiased,exact_psi",
                                                tuning = "cv_min", flavor = "standard", real_out, export_cal;
    int subsamples = 100;
    double fraction = 0.8, alpha = 0.1;
    std::optional<double> fixed_lambda;
    std::uint64_t real_seed = 1;
    real->add_option("--data", data_path, "CSV file")->required()->check(CLI::ExistingFile);
    real->add_option("--time-col", time_col, "observed time column")->required();
    real->add_option("--event-col", event_col, "event indicator column (1 = event)")->required();
    real->add_option("--covariates", cov_spec,
                     "comma-separated name[:num|:cat[:levels]] list, or 'all' for every other column");
    real->add_option("--subsamples", subsamples, "number of subsamples")->check(CLI::PositiveNumber);
    real->add_option("--fraction", fraction, "subsample fraction, drawn without replacement");
    real->add_option("--methods", methods_s, "comma-separated inference methods");
    real->add_option("--tuning", tuning, "tuning rule: cv_min, cv_1se, aic, bic or fix");
    real->add_option("--lambda", fixed_lambda, "lambda for the fix rule (standardized covariates)");
    real->add_option("--flavor", flavor, "standard or adaptive");
    real->add_option("--alpha", alpha, "one minus the confidence level");
    real->add_option("--seed", real_seed, "seed");
    real->add_option("--out", real_out, "output directory")->required();
    real->add_option("--export-calibration", export_cal, "write the calibrated Weibull scenario to this JSON file");

    // plot
    auto* plot = app.add_subcommand("plot", "render SVG figures from a summary table");
    std::string summary_path, plot_out;
    double nominal = 0.9;
    plot->add_option("--summary", summary_path, "summary.csv")->required()->check(CLI::ExistingFile);
    plot->add_option("--out", plot_out, "output directory")->required();
    plot->add_option("--nominal", nominal, "nominal coverage reference line");

    // calibrate-lambda
    auto* cal = app.add_subcommand("calibrate-lambda", "median cv_min lambda per scenario for the fix rule");
    std::string cal_config;
    std::optional<std::uint64_t> cal_seed;
    cal->add_option("--config", cal_config, "JSON configuration")->required()->check(CLI::ExistingFile);
    cal->add_option("--seed", cal_seed, "seed (overrides the config)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            auto cfg = load_config(sim_config, warn);
            if (sim_seed) override_seed(cfg, *sim_seed);
            if (sim_nsim) override_n_sim(cfg, *sim_nsim);
            std::cerr << cfg.scenarios.size() << " scenarios x " << cfg.n_sim << " replicates, config "
                      << config_hash(cfg) << '\n';
            run_simulation(cfg, sim_out, {sim_threads, inline_timings, &std::cerr});
            std::cerr << "wrote " << sim_out << "/long.csv and " << sim_out << "/summary.csv\n";
        } else if (*real) {
            const auto table = read_csv_file(data_path);
            const auto design = read_real_design(table, time_col, event_col, cov_spec);
            RealAnalysisOptions opt;
            opt.subsamples = subsamples;
            opt.fraction = fraction;
            opt.methods.clear();
            for (const auto& m : split_list(methods_s)) opt.methods.push_back(parse_method(m));
            opt.rule = TuningRule::parse(tuning);
            if (opt.rule.kind == TuningRule::Kind::fixed) {
                if (!fixed_lambda) throw Error("--tuning fix needs --lambda");
                opt.rule.fixed_lambda = *fixed_lambda;
            }
            opt.flavor = parse_flavor(flavor);
            opt.alpha = alpha;
            opt.seed = real_seed;
            const auto res = analyze_real(design, opt);
            write_real_outputs(res, real_out);
            std::cerr << "wrote " << real_out << "/frequencies.csv and " << real_out << "/intervals.csv\n";
            if (!export_cal.empty()) {
                const auto c = calibrate_from_dataset(res.data, res.names);
                std::ofstream f(export_cal);
                if (!f) throw Error("cannot write '" + export_cal + "'");
                f << calibrated_to_json(c).dump(1) << '\n';
            }
        } else if (*plot) {
            const auto table = read_csv_file(summary_path);
            const auto res = emit_plots(table, plot_out, nominal);
            for (const auto& w : res.warnings) warn(w);
            for (const auto& p : res.written) std::cerr << "wrote " << p.string() << '\n';
        } else if (*cal) {
            auto cfg = load_config(cal_config, warn);
            if (cal_seed) override_seed(cfg, *cal_seed);
            json out = json::array();
            for (const auto& e : cfg.scenarios)
                for (LassoFlavor f : cfg.flavors) {
                    const auto r = calibrate_fixed_lambda(e.scenario, f, std::max(cfg.options.fix_n_pop, e.scenario.n),
                                                          cfg.options.fix_n_rep, cfg.seed, cfg.selection_options());
                    out.push_back({{"scenario_id", e.scenario.id},
                                   {"lasso_flavor", flavor_name(f)},
                                   {"lambda", r.lambda},
                                   {"repetitions", r.draws.size()}});
                }
            std::cout << out.dump(2) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
