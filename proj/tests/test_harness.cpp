#include "coxsel/harness/calibrate.hpp"
#include "coxsel/harness/config.hpp"
#include "coxsel/harness/plots.hpp"
#include "coxsel/harness/real_data.hpp"
#include "coxsel/harness/simulation.hpp"

#include <gtest/gtest.h>

#include <regex>

using namespace coxsel;
using namespace coxsel::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("coxsel_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json small_config()
{
    return json::parse(R"({
      "scenarios": {"n": [60], "p": [5], "rho": [0.3], "censor_target": [0, 0.3],
                    "baseline": ["weibull"], "pattern": ["sparse"]},
      "methods": ["full", "oracle", "refit", "refit0", "split", "debiased", "exact_psi"],
      "tuning_rules": ["cv_min", "bic", "fix"],
      "lasso": {"flavors": ["standard", "adaptive"]},
      "n_sim": 4, "seed": 3,
      "options": {"n_pop_truth": 5000, "n_lambda": 30, "cv_folds": 5, "fixed_lambda": 4.0}
    })");
}

/// Tag balance and attribute quoting: enough to catch broken markup.
bool well_formed_xml(const std::string& s)
{
    std::vector<std::string> stack;
    size_t pos = 0;
    while ((pos = s.find('<', pos)) != std::string::npos) {
        const auto end = s.find('>', pos);
        if (end == std::string::npos) return false;
        std::string tag = s.substr(pos + 1, end - pos - 1);
        pos = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '?' || tag[0] == '!') continue;
        if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
        if (tag[0] == '/') {
            if (stack.empty() || stack.back() != tag.substr(1)) return false;
            stack.pop_back();
            continue;
        }
        if (tag.back() == '/') continue;
        stack.push_back(tag.substr(0, tag.find(' ')));
    }
    return stack.empty();
}

} // namespace

// ---------------------------------------------------------------------------
// CSV primitives
// ---------------------------------------------------------------------------

TEST(Csv, NumberFormatting)
{
    EXPECT_EQ(format_number(kNaN), "NA");
    EXPECT_EQ(format_number(kInf), "Inf");
    EXPECT_EQ(format_number(-kInf), "-Inf");
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(1.0 / 3.0), "0.3333333333");
    EXPECT_TRUE(std::isnan(parse_number("NA")));
    EXPECT_EQ(parse_number("-Inf"), -kInf);
    EXPECT_THROW(parse_number("1.5x"), Error);
}

TEST(Csv, QuotingRoundTrip)
{
    const std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
    std::istringstream in(join_row(fields) + "\n");
    std::vector<std::string> back;
    ASSERT_TRUE(read_row(in, back));
    EXPECT_EQ(back, fields);
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

TEST(Config, SingleValueFactorsGiveOneScenario)
{
    const auto grid = expand_grid(json::parse(R"({"n": [100], "p": [10], "rho": [0], "censor_target": [0.1],
        "baseline": ["weibull"], "pattern": ["sparse"]})"));
    ASSERT_EQ(grid.size(), 1u);
    EXPECT_EQ(grid[0].scenario.id, "toy_n100_p10_rho0_pc0.1_weibull_sparse");
    EXPECT_EQ(grid[0].scenario.n, 100);
    EXPECT_EQ(grid[0].scenario.baseline.k(), 2.0);
}

TEST(Config, BundledDefaultGridSize)
{
    const auto cfg = load_config(std::string(COXSEL_SOURCE_DIR) + "/configs/default.json");
    EXPECT_EQ(cfg.scenarios.size(), 8u * 3u * 2u * 3u * 2u * 4u);
    std::set<int> ns;
    for (const auto& e : cfg.scenarios) ns.insert(e.scenario.n);
    EXPECT_EQ(ns, (std::set<int>{75, 175, 275, 375, 475, 575, 675, 775}));
    EXPECT_EQ(cfg.methods.size(), 7u);
    EXPECT_DOUBLE_EQ(cfg.alpha, 0.1);
    EXPECT_EQ(cfg.n_sim, 1000);
}

TEST(Config, DuplicatesAreDroppedWithWarning)
{
    std::vector<std::string> warnings;
    const auto grid = expand_grid(json::parse(R"({"n": [100, 100, 200], "p": [10], "rho": [0], "censor_target": [0],
        "baseline": ["weibull", "weibull"], "pattern": ["sparse"]})"),
                                  ".", [&](const std::string& w) { warnings.push_back(w); });
    EXPECT_EQ(grid.size(), 2u);
    EXPECT_EQ(warnings.size(), 2u);
}

TEST(Config, SchemaErrorsNameThePath)
{
    auto j = small_config();
    j["scenarios"]["rho"] = json::array({0.0, "high"});
    try {
        parse_config(j);
        FAIL() << "expected a schema error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("scenarios.rho[1]"), std::string::npos) << e.what();
    }
    auto k = small_config();
    k["methods"] = json::array({"refit", "magic"});
    try {
        parse_config(k);
        FAIL() << "expected a schema error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("methods[1]"), std::string::npos) << e.what();
    }
    auto m = small_config();
    m["scenarios"].erase("p");
    EXPECT_THROW(parse_config(m), Error);
    auto o = small_config();
    o["options"]["cv_folds"] = 1;
    EXPECT_THROW(parse_config(o), Error);
}

TEST(Config, DebiasedVarianceOption)
{
    EXPECT_TRUE(parse_config(small_config()).options.debiased_sandwich);
    auto j = small_config();
    j["options"]["debiased_variance"] = "theta";
    EXPECT_FALSE(parse_config(j).options.debiased_sandwich);
    j["options"]["debiased_variance"] = "robust";
    EXPECT_THROW(parse_config(j), Error);
}

TEST(Config, HashTracksOverrides)
{
    auto a = parse_config(small_config());
    auto b = parse_config(small_config());
    EXPECT_EQ(config_hash(a), config_hash(b));
    override_seed(b, 99);
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, CalibratedScenarioRoundTrip)
{
    const auto dir = scratch("calibrated");
    CalibratedScenario cal;
    Rng rng(4);
    cal.covariate_pool = sample_covariates(50, 3, 0.2, rng);
    cal.names = {"a", "b", "c"};
    cal.beta_truth = Vector::Zero(3);
    cal.beta_truth << 0.5, 0.0, -0.25;
    cal.baseline = BaselineSpec::weibull(1.5, 0.7);
    cal.censor_target = 0.2;
    std::ofstream(dir / "cal.json") << calibrated_to_json(cal).dump();
    const auto grid = expand_grid(json::parse(R"({"calibrated": [{"file": "cal.json", "name": "demo", "n": [40, 80]}]})"),
                                  dir.string());
    ASSERT_EQ(grid.size(), 2u);
    EXPECT_EQ(grid[0].scenario.id, "demo_n40_pc0.2");
    EXPECT_EQ(grid[1].scenario.n, 80);
    EXPECT_TRUE(grid[0].scenario.beta.isApprox(cal.beta_truth));
    EXPECT_DOUBLE_EQ(grid[0].scenario.baseline.shape, 1.5);
    ASSERT_TRUE(grid[0].scenario.pool);
    EXPECT_TRUE(grid[0].scenario.pool->isApprox(cal.covariate_pool));
    Rng g(1);
    const auto data = generate(grid[0].scenario, g).data;
    EXPECT_EQ(data.n(), 40);
    EXPECT_EQ(data.p(), 3);
}

// ---------------------------------------------------------------------------
// Simulation runner
// ---------------------------------------------------------------------------

TEST(Simulation, IterationRowsAreComplete)
{
    const auto cfg = parse_config(small_config());
    SubmodelTruthCache truth(cfg.options.n_pop_truth);
    FixedLambdas fixed{{LassoFlavor::standard, 4.0}, {LassoFlavor::adaptive, 4.0}};
    IterationContext ctx{cfg, cfg.scenarios[0], truth, fixed};
    const auto out = run_iteration(ctx, 0);
    // full + oracle + 5 lasso methods x 2 flavors x 3 rules, each with p rows.
    EXPECT_EQ(out.records.size(), (2u + 5u * 2u * 3u) * 5u);
    EXPECT_EQ(out.runtimes.size(), 2u + 5u * 2u * 3u);
    for (const auto& r : out.records) {
        EXPECT_TRUE(std::isnan(r.runtime_seconds));
        if (r.reported && r.method != "debiased" && r.method != "full") {
            EXPECT_TRUE(r.selected) << r.method;
        }
        if (r.method == "full") {
            EXPECT_TRUE(r.reported);
            EXPECT_EQ(r.target_kind, "full_model");
            EXPECT_EQ(r.target_value, r.beta0);
        }
        if (r.method == "oracle") {
            EXPECT_EQ(r.selected, r.beta0 != 0.0);
        }
        if (r.reported && !r.degenerate) {
            EXPECT_LE(r.lower, r.upper);
            EXPECT_GE(r.covered, 0);
        }
        if (!std::isnan(r.ibs)) {
            EXPECT_GE(r.ibs, 0.0);
            EXPECT_LE(r.ibs, 1.0);
        }
    }
}

TEST(Simulation, OracleTargetIsSubmodelTruth)
{
    const auto cfg = parse_config(small_config());
    SubmodelTruthCache truth(cfg.options.n_pop_truth);
    FixedLambdas fixed{{LassoFlavor::standard, 4.0}, {LassoFlavor::adaptive, 4.0}};
    IterationContext ctx{cfg, cfg.scenarios[0], truth, fixed};
    const auto out = run_iteration(ctx, 1);
    const Vector expected = truth.get(cfg.scenarios[0].scenario, {0, 1});
    for (const auto& r : out.records)
        if (r.method == "oracle" && r.reported) {
            EXPECT_DOUBLE_EQ(r.target_value, expected[r.coef_index - 1]);
        }
}

TEST(Simulation, DeterministicAcrossThreadCountsAndRuns)
{
    const auto cfg = parse_config(small_config());
    const auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
    run_simulation(cfg, a, {1});
    run_simulation(cfg, b, {4});
    run_simulation(cfg, c, {1});
    for (const char* f : {"long.csv", "summary.csv"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(c / f)) << f;
    }
    const auto manifest = json::parse(slurp(a / "manifest.json"));
    EXPECT_TRUE(manifest["finished"].get<bool>());
    EXPECT_EQ(manifest["scenarios"].size(), 2u);
    EXPECT_EQ(manifest["config_hash"].get<std::string>(), config_hash(cfg));
}

TEST(Simulation, LongRowsRoundTrip)
{
    const auto cfg = parse_config(small_config());
    const auto dir = scratch("roundtrip");
    run_simulation(cfg, dir, {1});
    const auto text = slurp(dir / "long.csv");
    std::istringstream in(text);
    const auto records = read_long(in);
    std::ostringstream out;
    write_long(out, records);
    EXPECT_EQ(out.str(), text);
    EXPECT_EQ(records.size(), 2u * 4u * (2u + 5u * 2u * 3u) * 5u);
    EXPECT_TRUE(std::is_sorted(records.begin(), records.end(), record_less));
}

TEST(Simulation, ResumeRecomputesOnlyIncompleteScenarios)
{
    const auto cfg = parse_config(small_config());
    const auto dir = scratch("resume");
    run_simulation(cfg, dir, {1});
    const auto long_before = slurp(dir / "long.csv");
    const auto summary_before = slurp(dir / "summary.csv");

    // Complete rerun changes nothing.
    const auto stamp = fs::last_write_time(part_path(dir, cfg.scenarios[0].scenario.id));
    run_simulation(cfg, dir, {1});
    EXPECT_EQ(slurp(dir / "long.csv"), long_before);
    EXPECT_EQ(fs::last_write_time(part_path(dir, cfg.scenarios[0].scenario.id)), stamp);

    // Simulate an interruption after the first scenario.
    auto manifest = Manifest::from_json(json::parse(slurp(dir / "manifest.json")));
    const std::string second = cfg.scenarios[1].scenario.id;
    manifest.find(second)->status = "pending";
    manifest.finished = false;
    manifest.save(dir / "manifest.json");
    fs::remove(part_path(dir, second));
    fs::remove(dir / "long.csv");
    run_simulation(cfg, dir, {2});
    EXPECT_EQ(fs::last_write_time(part_path(dir, cfg.scenarios[0].scenario.id)), stamp);
    EXPECT_EQ(slurp(dir / "long.csv"), long_before);
    EXPECT_EQ(slurp(dir / "summary.csv"), summary_before);
}

TEST(Simulation, RefusesForeignOutputDirectory)
{
    auto cfg = parse_config(small_config());
    cfg.n_sim = 1;
    const auto dir = scratch("foreign");
    run_simulation(cfg, dir, {1});
    override_seed(cfg, 1234);
    EXPECT_THROW(run_simulation(cfg, dir, {1}), Error);
}

TEST(Simulation, InlineTimingsAndSidecar)
{
    auto cfg = parse_config(small_config());
    cfg.n_sim = 1;
    const auto dir = scratch("timings");
    run_simulation(cfg, dir, {1, true});
    std::istringstream in(slurp(dir / "long.csv"));
    for (const auto& r : read_long(in)) EXPECT_GE(r.runtime_seconds, 0.0);
    const auto rt = read_csv_file((dir / "runtimes.csv").string());
    EXPECT_EQ(rt.rows.size(), 2u * (2u + 5u * 2u * 3u));
}

TEST(Simulation, FailingCellsAreFlaggedInSummary)
{
    // Tiny samples with heavy censoring make half-sample selection fail often.
    auto j = small_config();
    j["scenarios"]["n"] = json::array({12});
    j["scenarios"]["censor_target"] = json::array({0.6});
    j["methods"] = json::array({"split"});
    j["tuning_rules"] = json::array({"cv_min"});
    j["lasso"]["flavors"] = json::array({"standard"});
    j["n_sim"] = 10;
    const auto cfg = parse_config(j);
    const auto dir = scratch("flagged");
    run_simulation(cfg, dir, {1});
    const auto summary = read_csv_file((dir / "summary.csv").string());
    const int block = summary.require_column("block"), rate = summary.require_column("failure_rate"),
              flagged = summary.require_column("flagged");
    bool saw_cell = false;
    for (const auto& row : summary.rows) {
        if (row[static_cast<size_t>(block)] != "cell") continue;
        saw_cell = true;
        const double fr = parse_number(row[static_cast<size_t>(rate)]);
        EXPECT_EQ(row[static_cast<size_t>(flagged)], fr > 0.2 ? "1" : "0");
        EXPECT_GT(fr, 0.2);
    }
    EXPECT_TRUE(saw_cell);
}

TEST(CalibrateLambda, DeterministicAndInsidePath)
{
    ToyScenario toy;
    toy.n = 80;
    toy.p = 5;
    toy.pattern = CoefficientPattern::parse("sparse");
    const auto sc = make_scenario(toy);
    SelectionOptions opt;
    opt.n_lambda = 30;
    opt.folds = 5;
    const auto a = calibrate_fixed_lambda(sc, LassoFlavor::standard, 2000, 5, 9, opt);
    const auto b = calibrate_fixed_lambda(sc, LassoFlavor::standard, 2000, 5, 9, opt);
    EXPECT_EQ(a.lambda, b.lambda);
    EXPECT_EQ(a.draws.size(), 5u);
    EXPECT_GT(a.lambda, 0.0);
    EXPECT_LE(a.lambda, *std::max_element(a.draws.begin(), a.draws.end()));
    EXPECT_GE(a.lambda, *std::min_element(a.draws.begin(), a.draws.end()));
}

// ---------------------------------------------------------------------------
// Real-data analysis
// ---------------------------------------------------------------------------

namespace {

CsvTable synthetic_table(int n, std::uint64_t seed, bool with_category)
{
    ToyScenario toy;
    toy.n = n;
    toy.p = 6;
    toy.rho = 0.2;
    toy.censor_target = 0.2;
    toy.pattern = CoefficientPattern::parse("sparse");
    Rng rng(seed);
    const auto data = generate(make_scenario(toy), rng).data;
    CsvTable t;
    t.header = {"time", "status", "x1", "x2", "x3", "x4", "x5", "x6"};
    if (with_category) t.header.push_back("grp");
    for (int i = 0; i < n; ++i) {
        std::vector<std::string> row{format_number(data.time()[i]), std::to_string(data.status()[i])};
        for (int j = 0; j < 6; ++j) row.push_back(format_number(data.x()(i, j)));
        if (with_category) row.push_back(i % 3 == 0 ? "low" : (i % 3 == 1 ? "mid" : "high"));
        t.rows.push_back(row);
    }
    return t;
}

} // namespace

TEST(RealData, CategoricalDummyCoding)
{
    const auto t = synthetic_table(60, 1, true);
    const auto d = read_real_design(t, "time", "status", "x1,grp:cat[low|mid|high]");
    ASSERT_EQ(d.names, (std::vector<std::string>{"x1", "grp=mid", "grp=high"}));
    for (int i = 0; i < 60; ++i) {
        EXPECT_EQ(d.x(i, 1), i % 3 == 1 ? 1.0 : 0.0);
        EXPECT_EQ(d.x(i, 2), i % 3 == 2 ? 1.0 : 0.0);
    }
    const auto automatic = read_real_design(t, "time", "status", "all");
    EXPECT_EQ(automatic.names.size(), 6u + 2u);
    EXPECT_EQ(automatic.names[6], "grp=low"); // "high" is the alphabetical reference
}

TEST(RealData, SchemaErrorsNameRowAndColumn)
{
    auto t = synthetic_table(20, 2, true);
    const auto expect_error = [&](const CsvTable& tab, const std::string& spec, const std::string& needle) {
        try {
            read_real_design(tab, "time", "status", spec);
            FAIL() << "expected error containing " << needle;
        } catch (const Error& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    expect_error(t, "x1,nope", "nope");
    expect_error(t, "grp:cat[low|mid]", "row 4, column 'grp'");
    auto neg = t;
    neg.rows[3][0] = "-1";
    expect_error(neg, "x1", "row 5, column 'time'");
    auto miss = t;
    miss.rows[7][2] = "NA";
    expect_error(miss, "x1", "row 9, column 'x1'");
    auto ev = t;
    ev.rows[0][1] = "2";
    expect_error(ev, "x1", "row 2, column 'status'");
}

TEST(RealData, SingleFullSubsampleEqualsDirectRun)
{
    const auto t = synthetic_table(150, 3, false);
    const auto d = read_real_design(t, "time", "status", "all");
    RealAnalysisOptions opt;
    opt.subsamples = 1;
    opt.fraction = 1.0;
    opt.methods = {Method::refit, Method::exact_psi};
    opt.seed = 5;
    opt.selection.n_lambda = 40;
    const auto res = analyze_real(d, opt);
    for (int j = 0; j < res.data.p(); ++j) {
        const double f = res.frequency(j);
        EXPECT_TRUE(f == 0.0 || f == 1.0);
    }

    const auto z = res.data.standardized();
    Rng srng(derive_seed(opt.seed, "select", 0));
    const auto sel = select_model(z, opt.flavor, opt.rule, srng, opt.selection);
    auto refit = infer_refit(z, SelectionEvent::from(sel.fit, sel.weights), opt.alpha);
    to_original_scale(refit, z.standardization());
    for (int j = 0; j < res.data.p(); ++j)
        EXPECT_EQ(res.selected_count[static_cast<size_t>(j)],
                  std::count(sel.fit.active.begin(), sel.fit.active.end(), j));
    int matched = 0;
    for (const auto& iv : res.intervals) {
        if (iv.method != "refit") continue;
        const auto* direct = refit.find(iv.coef_index);
        ASSERT_NE(direct, nullptr);
        EXPECT_DOUBLE_EQ(iv.lower, direct->lower);
        EXPECT_DOUBLE_EQ(iv.upper, direct->upper);
        ++matched;
    }
    EXPECT_EQ(matched, static_cast<int>(sel.fit.active.size()));
}

TEST(RealData, ActiveVariablesSelectedMoreOften)
{
    const auto t = synthetic_table(800, 4, false);
    const auto d = read_real_design(t, "time", "status", "all");
    RealAnalysisOptions opt;
    opt.subsamples = 8;
    opt.methods = {Method::refit};
    opt.seed = 6;
    opt.selection.n_lambda = 50;
    const auto res = analyze_real(d, opt);
    double active = 0, inactive = 0;
    for (int j = 0; j < 6; ++j) {
        const double f = res.frequency(j);
        EXPECT_GE(f, 0.0);
        EXPECT_LE(f, 1.0);
        (j < 2 ? active : inactive) += f / (j < 2 ? 2.0 : 4.0);
    }
    EXPECT_GT(active, inactive);

    const auto dir = scratch("real_out");
    write_real_outputs(res, dir);
    const auto freq = read_csv_file((dir / "frequencies.csv").string());
    const int pc = freq.require_column("frequency_percent"), ec = freq.require_column("standardized_effect");
    double prev = -1;
    for (const auto& row : freq.rows) {
        const double pct = parse_number(row[static_cast<size_t>(pc)]);
        EXPECT_GE(pct, 0.0);
        EXPECT_LE(pct, 100.0);
        const double eff = std::abs(parse_number(row[static_cast<size_t>(ec)]));
        EXPECT_GE(eff, prev);
        prev = eff;
    }
}

TEST(RealData, RejectsOracleAndBadFraction)
{
    const auto d = read_real_design(synthetic_table(40, 5, false), "time", "status", "all");
    RealAnalysisOptions opt;
    opt.methods = {Method::oracle};
    EXPECT_THROW(analyze_real(d, opt), Error);
    opt.methods = {Method::refit};
    opt.fraction = 1.5;
    EXPECT_THROW(analyze_real(d, opt), Error);
}

// ---------------------------------------------------------------------------
// Plots
// ---------------------------------------------------------------------------

TEST(Plots, SingleCellSummaryGivesValidDeterministicSvg)
{
    auto cfg = parse_config(small_config());
    cfg.scenarios.resize(1);
    cfg.methods = {Method::refit};
    cfg.flavors = {LassoFlavor::standard};
    cfg.tuning_rules = {TuningRule::parse("cv_min")};
    cfg.n_sim = 3;
    const auto dir = scratch("plots");
    run_simulation(cfg, dir / "sim", {1});
    const auto summary = read_csv_file((dir / "sim" / "summary.csv").string());
    const auto a = emit_plots(summary, dir / "a");
    const auto b = emit_plots(summary, dir / "b");
    ASSERT_EQ(a.written.size(), 3u);
    for (const char* f : {"coverage.svg", "widths.svg", "power_type1.svg"}) {
        const auto text = slurp(dir / "a" / f);
        EXPECT_TRUE(well_formed_xml(text)) << f;
        EXPECT_EQ(text, slurp(dir / "b" / f)) << f;
    }
    EXPECT_NE(slurp(dir / "a" / "widths.svg").find("log scale"), std::string::npos);
}

TEST(Plots, LogAxisTicksArePowersOfTen)
{
    svg::Axis y{0.01, 10, 300, 0, true};
    const auto ticks = y.ticks();
    EXPECT_NEAR(y(0.1) - y(1.0), y(1.0) - y(10.0), 1e-9);
    EXPECT_NE(std::find(ticks.begin(), ticks.end(), 1.0), ticks.end());
    EXPECT_NE(std::find(ticks.begin(), ticks.end(), 0.01), ticks.end());
}

TEST(Plots, EmptySummaryWritesNothing)
{
    CsvTable t;
    t.header = summary_header();
    const auto dir = scratch("plots_empty");
    const auto res = emit_plots(t, dir / "out");
    EXPECT_TRUE(res.written.empty());
    EXPECT_EQ(res.warnings.size(), 1u);
    EXPECT_FALSE(fs::exists(dir / "out"));
}
