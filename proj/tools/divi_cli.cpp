#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "divi/baselines.hpp"
#include "divi/datagen.hpp"
#include "divi/experiment.hpp"
#include "divi/io.hpp"
#include "divi/metrics.hpp"
#include "divi/prior.hpp"
#include "divi/rng.hpp"
#include "divi/trainer.hpp"

namespace fs = std::filesystem;
using namespace divi;

namespace {

struct TrainFlags {
    TrainConfig config;

    void add(CLI::App* app)
    {
        app->add_option("--epochs", config.epochs, "training epochs");
        app->add_option("--t-split", config.t_split, "epochs between split checks");
        app->add_option("--tau-mult", config.tau_mult, "split threshold multiplier");
        app->add_option("--beta-mult", config.beta_mult, "KL weight per sample");
        app->add_option("--lr", config.lr, "Adam learning rate");
        app->add_option("--t0", config.t0, "initial gate temperature");
        app->add_option("--t-min", config.t_min, "temperature floor");
        app->add_option("--gamma", config.gamma, "temperature decay per epoch");
        app->add_option("--sigma-split", config.sigma_split, "split perturbation scale");
        app->add_option("--k-max", config.k_max, "component cap");
        app->add_option("--bg-logvar", config.bg_logvar, "background log-variance");
    }

    // Copies only the flags the user actually passed.
    void overlay(const CLI::App* app, TrainConfig& target) const
    {
        auto given = [&](const char* name) { return app->count(name) > 0; };
        if (given("--epochs"))
            target.epochs = config.epochs;
        if (given("--t-split"))
            target.t_split = config.t_split;
        if (given("--tau-mult"))
            target.tau_mult = config.tau_mult;
        if (given("--beta-mult"))
            target.beta_mult = config.beta_mult;
        if (given("--lr"))
            target.lr = config.lr;
        if (given("--t0"))
            target.t0 = config.t0;
        if (given("--t-min"))
            target.t_min = config.t_min;
        if (given("--gamma"))
            target.gamma = config.gamma;
        if (given("--sigma-split"))
            target.sigma_split = config.sigma_split;
        if (given("--k-max"))
            target.k_max = config.k_max;
        if (given("--bg-logvar"))
            target.bg_logvar = config.bg_logvar;
    }
};

struct BenchFlags {
    std::string config_path;
    std::string scenario = "matched";
    std::vector<std::size_t> sizes{1000};
    std::size_t d = 100;
    std::size_t seeds = 20;
    std::uint64_t seed = 0;
    std::vector<std::string> methods{"divi-info", "divi-noninfo", "divi-random", "kmeans", "gmm"};
    std::size_t k = 3;
    std::size_t k0 = kDefaultRoughClusters;
    double rho = 0.6;
    std::size_t block = 10;
    std::string data;
    std::size_t jobs = 1;
    std::string out = "results";
    std::string axis;
    std::vector<double> values;
    TrainFlags train;

    void add(CLI::App* app, bool sweep)
    {
        app->add_option("--config", config_path, "JSON experiment config; flags override its values")
            ->check(CLI::ExistingFile);
        app->add_option("--scenario", scenario, "matched | heavy_tailed | correlated | external-csv");
        app->add_option("--n", sizes, "sample sizes")->expected(1, -1);
        app->add_option("--d", d, "dimension");
        app->add_option("--seeds", seeds, "number of seeds");
        app->add_option("--seed", seed, "first seed");
        app->add_option("--methods", methods, "methods to run")->expected(1, -1);
        app->add_option("--k", k, "oracle K for the baselines");
        app->add_option("--k0", k0, "rough clusters used to score features");
        app->add_option("--rho", rho, "within-block correlation (correlated)");
        app->add_option("--block", block, "nuisance block size (correlated)");
        app->add_option("--data", data, "dataset CSV (external-csv)");
        app->add_option("--jobs", jobs, "concurrent runs");
        app->add_option("--out", out, "output directory");
        if (sweep) {
            app->add_option("--axis", axis, "t_split | beta_mult | tau_mult | lr | t_min");
            app->add_option("--values", values, "axis values")->expected(1, -1);
        }
        train.add(app);
    }

    ExperimentConfig build(const CLI::App* app) const
    {
        ExperimentConfig c;
        c.methods.clear();
        for (const auto& m : methods)
            c.methods.push_back(method_from_string(m));
        if (!config_path.empty())
            c = load_config(config_path, c);
        auto given = [&](const char* name) { return app->count(name) > 0; };
        if (given("--scenario"))
            c.scenario = scenario_from_string(scenario);
        if (given("--n"))
            c.sizes = sizes;
        if (given("--d"))
            c.d = d;
        if (given("--seeds") || given("--seed") || c.seeds.empty()) {
            const std::size_t count = given("--seeds") || c.seeds.empty() ? seeds : c.seeds.size();
            c.seeds.clear();
            for (std::size_t i = 0; i < count; ++i)
                c.seeds.push_back(seed + i);
        }
        if (given("--methods")) {
            c.methods.clear();
            for (const auto& m : methods)
                c.methods.push_back(method_from_string(m));
        }
        if (given("--k"))
            c.k = k;
        if (given("--k0"))
            c.k0 = k0;
        if (given("--rho"))
            c.rho = rho;
        if (given("--block"))
            c.block = block;
        if (given("--data"))
            c.data_path = data;
        if (given("--jobs"))
            c.jobs = jobs;
        if (app->get_option_no_throw("--axis") && given("--axis"))
            c.sweep_axis = axis;
        if (app->get_option_no_throw("--values") && given("--values"))
            c.sweep_values = values;
        train.overlay(app, c.train);
        c.validate();
        return c;
    }
};

void print_summary(const std::vector<SummaryRow>& rows, const std::string& axis)
{
    std::printf("%-14s %-13s %6s %8s %16s %16s %12s %12s\n", "scenario", "method", "n",
                axis.empty() ? "" : axis.c_str(), "ARI", "F1", "final K", "active");
    for (const auto& r : rows) {
        char f1[32] = "-", active[32] = "-", sweep[32] = "";
        if (r.feature_f1)
            std::snprintf(f1, sizeof(f1), "%.3f (%.3f)", r.feature_f1->mean, r.feature_f1->sd);
        if (r.active_dims)
            std::snprintf(active, sizeof(active), "%.1f", r.active_dims->mean);
        if (r.sweep_value)
            std::snprintf(sweep, sizeof(sweep), "%g", *r.sweep_value);
        std::printf("%-14s %-13s %6zu %8s %7.3f (%.3f) %16s %12.2f %12s%s\n", r.scenario.c_str(), r.method.c_str(),
                    r.n, sweep, r.ari.mean, r.ari.sd, f1, r.final_k.mean, active,
                    r.failures ? "  [failures]" : "");
    }
}

int write_table(const ExperimentConfig& config, const BenchmarkTable& table, const fs::path& out,
                const std::string& command)
{
    fs::create_directories(out);
    write_results_csv(out / "results.csv", table.rows, config.sweep_axis);
    write_summary_csv(out / "summary.csv", table.summary, config.sweep_axis);
    write_manifest(out / "manifest.json", config, table, command);
    {
        std::ofstream cfg(out / "config.json");
        cfg << config_to_json(config) << '\n';
    }
    print_summary(table.summary, config.sweep_axis);
    for (const auto& r : table.rows)
        if (!r.ok())
            std::cerr << "failed: " << r.method << " seed " << r.seed << ": " << r.error << '\n';
    std::cout << "wrote " << (out / "results.csv").string() << '\n';
    return table.failures() == 0 ? 0 : 1;
}

Dataset load_standardized(const std::string& path) { return standardize(read_dataset_csv(path)); }

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Feature-gated variational Gaussian mixture clustering"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kLibraryVersion);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset CSV");
    std::string gen_scenario = "matched", gen_out;
    std::size_t gen_n = 1000, gen_d = 100, gen_block = 10;
    double gen_rho = 0.6;
    std::uint64_t gen_seed = 0;
    gen->add_option("--scenario", gen_scenario, "matched | heavy_tailed | correlated");
    gen->add_option("--n", gen_n, "samples");
    gen->add_option("--d", gen_d, "dimension");
    gen->add_option("--rho", gen_rho, "within-block correlation (correlated)");
    gen->add_option("--block", gen_block, "nuisance block size (correlated)");
    gen->add_option("--seed", gen_seed, "seed");
    gen->add_option("--out", gen_out, "output CSV")->required();

    // fit
    auto* fitc = app.add_subcommand("fit", "fit the gated mixture to a dataset CSV");
    std::string fit_data, fit_out, fit_prior = "info", fit_labels;
    std::size_t fit_k0 = kDefaultRoughClusters;
    std::uint64_t fit_seed = 0;
    TrainFlags fit_train;
    fitc->add_option("--data", fit_data, "dataset CSV")->required()->check(CLI::ExistingFile);
    fitc->add_option("--prior", fit_prior, "info | noninfo | random");
    fitc->add_option("--k0", fit_k0, "rough clusters used to score features");
    fitc->add_option("--seed", fit_seed, "seed");
    fitc->add_option("--out", fit_out, "model JSON")->required();
    fitc->add_option("--labels-out", fit_labels, "write hard assignments to this CSV");
    fit_train.add(fitc);

    // baseline
    auto* base = app.add_subcommand("baseline", "run k-means or a diagonal GMM with a given K");
    std::string base_data, base_out, base_method = "kmeans";
    std::size_t base_k = 3, base_restarts = 0;
    std::uint64_t base_seed = 0;
    base->add_option("--data", base_data, "dataset CSV")->required()->check(CLI::ExistingFile);
    base->add_option("--method", base_method, "kmeans | gmm");
    base->add_option("--k", base_k, "number of clusters");
    base->add_option("--restarts", base_restarts, "restarts (default 10 for kmeans, 5 for gmm)");
    base->add_option("--seed", base_seed, "seed");
    base->add_option("--out", base_out, "labels CSV")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "score predicted labels or a saved model against ground truth");
    std::string eval_data, eval_labels, eval_model, eval_out;
    std::uint64_t eval_seed = 0;
    eval->add_option("--data", eval_data, "dataset CSV with a label column")->required()->check(CLI::ExistingFile);
    auto* eval_labels_opt = eval->add_option("--labels", eval_labels, "predicted labels CSV");
    eval->add_option("--model", eval_model, "model JSON")->excludes(eval_labels_opt);
    eval->add_option("--seed", eval_seed, "unused; accepted for uniformity");
    eval->add_option("--out", eval_out, "metrics CSV (stdout if omitted)");

    // bench / sweep
    auto* bench = app.add_subcommand("bench", "run every method over a set of seeds");
    BenchFlags bench_flags;
    bench_flags.add(bench, false);
    auto* sweep = app.add_subcommand("sweep", "sensitivity sweep over one training setting");
    BenchFlags sweep_flags;
    sweep_flags.seeds = 5;
    sweep_flags.methods = {"divi-info"};
    sweep_flags.add(sweep, true);

    // scaling
    auto* scaling = app.add_subcommand("scaling", "time one training epoch across sizes (CSV)");
    std::vector<std::size_t> sc_n{1000}, sc_d{250, 500, 1000, 2000};
    std::size_t sc_k = 3, sc_repeats = 5;
    std::uint64_t sc_seed = 0;
    std::string sc_out;
    scaling->add_option("--n", sc_n, "sample sizes")->expected(1, -1);
    scaling->add_option("--d", sc_d, "dimensions")->expected(1, -1);
    scaling->add_option("--k", sc_k, "components");
    scaling->add_option("--repeats", sc_repeats, "timed epochs per point (median reported)");
    scaling->add_option("--seed", sc_seed, "seed");
    scaling->add_option("--out", sc_out, "output CSV (stdout if omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const std::uint64_t s = derive_seed(gen_seed, "datagen");
            Dataset data;
            switch (scenario_from_string(gen_scenario)) {
            case Scenario::Matched:
                data = gen_matched(gen_n, gen_d, s);
                break;
            case Scenario::HeavyTailed:
                data = gen_heavy_tailed(gen_n, gen_d, s);
                break;
            case Scenario::Correlated:
                data = gen_correlated(gen_n, gen_d, gen_rho, gen_block, s);
                break;
            case Scenario::ExternalCsv:
                throw std::invalid_argument("gen cannot produce an external dataset");
            }
            write_dataset_csv(gen_out, data);
            std::cout << "wrote " << gen_out << " (" << data.n() << " x " << data.d() << ")\n";
            return 0;
        }

        if (*fitc) {
            TrainConfig config;
            fit_train.overlay(fitc, config);
            config.seed = derive_seed(fit_seed, "train");
            config.validate();
            const Dataset data = load_standardized(fit_data);
            const PriorSpec prior =
                build_prior(data.x, prior_mode_from_string(fit_prior), fit_k0, derive_seed(fit_seed, "prior"));
            const FitResult result = fit(data.x, prior, config);
            save_model(make_snapshot(result, config, data.stats), fit_out);
            if (!fit_labels.empty())
                write_labels_csv(fit_labels, result.labels);
            const auto active = active_dimensions(result.gate_probs);
            std::cout << "final K " << result.final_k << ", active dims " << active.count << ", splits "
                      << result.split_events.size() << '\n';
            if (data.labels.size() == data.n())
                std::cout << "ARI " << adjusted_rand_index(result.labels, data.labels) << '\n';
            if (data.informative_mask.size() == data.d())
                std::cout << "feature F1 " << feature_f1(active.mask, data.informative_mask) << '\n';
            return 0;
        }

        if (*base) {
            const Dataset data = load_standardized(base_data);
            const std::uint64_t s = derive_seed(base_seed, "baseline");
            const Method m = method_from_string(base_method);
            Labels labels;
            if (m == Method::KMeans)
                labels = kmeans_fit(data.x, base_k, base_restarts ? base_restarts : kDefaultKMeansRestarts, s).labels;
            else if (m == Method::Gmm)
                labels = diag_gmm_fit(data.x, base_k, base_restarts ? base_restarts : kDefaultGmmRestarts, s).labels;
            else
                throw std::invalid_argument("baseline method must be kmeans or gmm");
            write_labels_csv(base_out, labels);
            if (data.labels.size() == data.n())
                std::cout << "ARI " << adjusted_rand_index(labels, data.labels) << '\n';
            return 0;
        }

        if (*eval) {
            const Dataset raw = read_dataset_csv(eval_data);
            if (raw.labels.size() != raw.n())
                throw std::invalid_argument(eval_data + " has no label column");
            Labels predicted;
            std::optional<ActiveDimensions> active;
            if (!eval_model.empty()) {
                const ModelSnapshot snap = load_model(eval_model);
                if (snap.params.d() != raw.d())
                    throw std::invalid_argument("model dimension does not match the dataset");
                const Matrix x = snap.stats ? apply_standardization(raw.x, *snap.stats) : raw.x;
                predicted = hard_assignments(x, snap.params);
                active = active_dimensions(snap.gate_probs);
            } else if (!eval_labels.empty()) {
                predicted = read_labels_csv(eval_labels);
            } else {
                throw std::invalid_argument("eval needs --labels or --model");
            }
            std::string f1 = "", count = "";
            if (active) {
                count = std::to_string(active->count);
                if (raw.informative_mask.size() == raw.d())
                    f1 = format_double(feature_f1(active->mask, raw.informative_mask));
            }
            std::ostringstream text;
            text << "ari,nmi,feature_f1,active_dims\n"
                 << format_double(adjusted_rand_index(predicted, raw.labels)) << ','
                 << format_double(normalized_mutual_info(predicted, raw.labels)) << ',' << f1 << ',' << count
                 << '\n';
            if (eval_out.empty()) {
                std::cout << text.str();
            } else {
                std::ofstream out(eval_out);
                out << text.str();
            }
            return 0;
        }

        if (*bench) {
            const ExperimentConfig config = bench_flags.build(bench);
            const BenchmarkTable table = run_benchmark(config);
            return write_table(config, table, bench_flags.out, "bench");
        }

        if (*sweep) {
            const ExperimentConfig config = sweep_flags.build(sweep);
            const BenchmarkTable table = run_sweep(config);
            return write_table(config, table, sweep_flags.out, "sweep");
        }

        if (*scaling) {
            std::ostringstream text;
            text << "n,d,k,seconds_per_epoch\n";
            for (auto n : sc_n)
                for (auto d : sc_d)
                    text << n << ',' << d << ',' << sc_k << ','
                         << format_double(time_epoch(n, d, sc_k, sc_repeats, sc_seed)) << '\n';
            if (sc_out.empty()) {
                std::cout << text.str();
            } else {
                std::ofstream out(sc_out);
                out << text.str();
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
