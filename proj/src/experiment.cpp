#include "divi/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "json.hpp"

#include "divi/baselines.hpp"
#include "divi/io.hpp"
#include "divi/metrics.hpp"
#include "divi/rng.hpp"

namespace divi {

namespace {

using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

const std::vector<std::pair<Method, std::string>> kMethodNames = {
    {Method::DiviInfo, "divi-info"},     {Method::DiviNonInfo, "divi-noninfo"}, {Method::DiviRandom, "divi-random"},
    {Method::KMeans, "kmeans"},          {Method::Gmm, "gmm"},
};

const std::vector<std::pair<Scenario, std::string>> kScenarioNames = {
    {Scenario::Matched, "matched"},
    {Scenario::HeavyTailed, "heavy_tailed"},
    {Scenario::Correlated, "correlated"},
    {Scenario::ExternalCsv, "external-csv"},
};

std::size_t method_rank(const std::string& name)
{
    for (std::size_t i = 0; i < kMethodNames.size(); ++i)
        if (kMethodNames[i].second == name)
            return i;
    return kMethodNames.size();
}

double seconds_since(Clock::time_point start)
{
    const double s = std::chrono::duration<double>(Clock::now() - start).count();
    return std::max(s, 1e-9);
}

ordered_json train_to_json(const TrainConfig& c)
{
    ordered_json j;
    j["epochs"] = c.epochs;
    j["t_split"] = c.t_split;
    j["tau_mult"] = c.tau_mult;
    j["beta_mult"] = c.beta_mult;
    j["lr"] = c.lr;
    j["t0"] = c.t0;
    j["t_min"] = c.t_min;
    j["gamma"] = c.gamma;
    j["sigma_split"] = c.sigma_split;
    j["k_max"] = c.k_max;
    j["logvar_floor"] = c.logvar_floor;
    j["bg_logvar"] = c.bg_logvar;
    return j;
}

template <class T>
void read_opt(const ordered_json& j, const char* key, T& out)
{
    if (j.contains(key))
        out = j.at(key).get<T>();
}

void train_from_json(const ordered_json& j, TrainConfig& c)
{
    read_opt(j, "epochs", c.epochs);
    read_opt(j, "t_split", c.t_split);
    read_opt(j, "tau_mult", c.tau_mult);
    read_opt(j, "beta_mult", c.beta_mult);
    read_opt(j, "lr", c.lr);
    read_opt(j, "t0", c.t0);
    read_opt(j, "t_min", c.t_min);
    read_opt(j, "gamma", c.gamma);
    read_opt(j, "sigma_split", c.sigma_split);
    read_opt(j, "k_max", c.k_max);
    read_opt(j, "logvar_floor", c.logvar_floor);
    read_opt(j, "bg_logvar", c.bg_logvar);
}

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

ResultRow error_row(const Dataset& data, Method method, const ExperimentConfig& config, std::uint64_t seed,
                    const std::string& message)
{
    ResultRow row;
    row.scenario = to_string(config.scenario);
    row.method = to_string(method);
    row.n = data.n();
    row.d = data.d();
    row.seed = seed;
    row.ari = std::nan("");
    row.nmi = std::nan("");
    row.error = message.empty() ? "unknown error" : message;
    return row;
}

} // namespace

std::string to_string(Scenario s)
{
    for (const auto& [v, name] : kScenarioNames)
        if (v == s)
            return name;
    return "unknown";
}

std::string to_string(Method m)
{
    for (const auto& [v, name] : kMethodNames)
        if (v == m)
            return name;
    return "unknown";
}

Scenario scenario_from_string(const std::string& name)
{
    for (const auto& [v, n] : kScenarioNames)
        if (n == name)
            return v;
    if (name == "heavy-tailed" || name == "heavy")
        return Scenario::HeavyTailed;
    if (name == "external" || name == "csv")
        return Scenario::ExternalCsv;
    throw std::invalid_argument("unknown scenario '" + name + "'");
}

Method method_from_string(const std::string& name)
{
    for (const auto& [v, n] : kMethodNames)
        if (n == name)
            return v;
    throw std::invalid_argument("unknown method '" + name + "'");
}

bool is_divi(Method m) noexcept { return m == Method::DiviInfo || m == Method::DiviNonInfo || m == Method::DiviRandom; }

PriorMode prior_mode_for(Method m)
{
    switch (m) {
    case Method::DiviInfo:
        return PriorMode::Informative;
    case Method::DiviNonInfo:
        return PriorMode::NonInformative;
    case Method::DiviRandom:
        return PriorMode::Random;
    default:
        throw std::invalid_argument(to_string(m) + " does not use a gate prior");
    }
}

void ExperimentConfig::validate() const
{
    if (seeds.empty())
        throw std::invalid_argument("seeds must be non-empty");
    if (methods.empty())
        throw std::invalid_argument("methods must be non-empty");
    if (scenario != Scenario::ExternalCsv) {
        if (sizes.empty())
            throw std::invalid_argument("sizes must be non-empty");
        for (auto n : sizes)
            if (n < 3)
                throw std::invalid_argument("every n must be at least 3");
        if (d < kInformativeDims)
            throw std::invalid_argument("d must be at least " + std::to_string(kInformativeDims));
    } else if (data_path.empty()) {
        throw std::invalid_argument("external-csv scenario needs a data path");
    }
    if (scenario == Scenario::Correlated) {
        if (!(rho >= 0.0 && rho <= 1.0))
            throw std::invalid_argument("rho must lie in [0, 1]");
        if (block == 0 || (d - kInformativeDims) % block != 0)
            throw std::invalid_argument("d - 10 must be divisible by block");
    }
    if (k < 1)
        throw std::invalid_argument("k must be at least 1");
    if (k0 < 1)
        throw std::invalid_argument("k0 must be at least 1");
    if (jobs < 1)
        throw std::invalid_argument("jobs must be at least 1");
    train.validate();
    if (!sweep_axis.empty()) {
        if (std::find(kSweepAxes.begin(), kSweepAxes.end(), sweep_axis) == kSweepAxes.end())
            throw std::invalid_argument("unknown sweep axis '" + sweep_axis + "'");
        if (sweep_values.empty())
            throw std::invalid_argument("sweep needs at least one value");
        for (double v : sweep_values) {
            TrainConfig t = train;
            set_train_field(t, sweep_axis, v);
            t.validate();
        }
    }
}

std::vector<std::uint64_t> seed_range(std::size_t count)
{
    std::vector<std::uint64_t> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = i;
    return out;
}

std::string config_to_json(const ExperimentConfig& c)
{
    ordered_json j;
    j["scenario"] = to_string(c.scenario);
    j["sizes"] = c.sizes;
    j["d"] = c.d;
    j["seeds"] = c.seeds;
    std::vector<std::string> methods;
    for (auto m : c.methods)
        methods.push_back(to_string(m));
    j["methods"] = methods;
    j["k"] = c.k;
    j["k0"] = c.k0;
    j["rho"] = c.rho;
    j["block"] = c.block;
    j["data_path"] = c.data_path.string();
    j["train"] = train_to_json(c.train);
    j["sweep_axis"] = c.sweep_axis;
    j["sweep_values"] = c.sweep_values;
    j["jobs"] = c.jobs;
    return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text, ExperimentConfig c)
{
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const ordered_json::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw std::invalid_argument("config must be a JSON object");
    static const std::vector<std::string> known = {"scenario", "sizes", "n",     "d",         "seeds",
                                                   "methods",  "k",     "k0",    "rho",       "block",
                                                   "data_path", "train", "sweep_axis", "sweep_values", "jobs"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::invalid_argument("unknown config key '" + key + "'");
    try {
        if (j.contains("scenario"))
            c.scenario = scenario_from_string(j["scenario"].get<std::string>());
        if (j.contains("n"))
            c.sizes = {j["n"].get<std::size_t>()};
        read_opt(j, "sizes", c.sizes);
        read_opt(j, "d", c.d);
        if (j.contains("seeds")) {
            const auto& s = j["seeds"];
            c.seeds = s.is_number() ? seed_range(s.get<std::size_t>()) : s.get<std::vector<std::uint64_t>>();
        }
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j["methods"])
                c.methods.push_back(method_from_string(m.get<std::string>()));
        }
        read_opt(j, "k", c.k);
        read_opt(j, "k0", c.k0);
        read_opt(j, "rho", c.rho);
        read_opt(j, "block", c.block);
        if (j.contains("data_path"))
            c.data_path = j["data_path"].get<std::string>();
        if (j.contains("train")) {
            const auto& t = j["train"];
            for (const auto& [key, _] : t.items())
                if (!train_to_json(TrainConfig{}).contains(key))
                    throw std::invalid_argument("unknown train key '" + key + "'");
            train_from_json(t, c.train);
        }
        read_opt(j, "sweep_axis", c.sweep_axis);
        read_opt(j, "sweep_values", c.sweep_values);
        read_opt(j, "jobs", c.jobs);
    } catch (const ordered_json::exception& e) {
        throw std::invalid_argument(std::string("bad config value: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str(), std::move(base));
}

void set_train_field(TrainConfig& c, const std::string& axis, double value)
{
    if (axis == "t_split") {
        if (value < 1 || value != std::floor(value))
            throw std::invalid_argument("t_split must be a positive integer");
        c.t_split = static_cast<std::size_t>(value);
    } else if (axis == "beta_mult") {
        c.beta_mult = value;
    } else if (axis == "tau_mult") {
        c.tau_mult = value;
    } else if (axis == "lr") {
        c.lr = value;
    } else if (axis == "t_min") {
        c.t_min = value;
    } else {
        throw std::invalid_argument("unknown sweep axis '" + axis + "'");
    }
}

std::size_t BenchmarkTable::failures() const
{
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.ok(); }));
}

Stat mean_sd(const std::vector<double>& v)
{
    Stat s;
    if (v.empty())
        return s;
    double sum = 0.0;
    for (double x : v)
        sum += x;
    s.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v)
            ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

Dataset make_dataset(const ExperimentConfig& config, std::size_t n, std::uint64_t seed)
{
    const std::uint64_t data_seed = derive_seed(seed, "datagen");
    switch (config.scenario) {
    case Scenario::Matched:
        return gen_matched(n, config.d, data_seed);
    case Scenario::HeavyTailed:
        return gen_heavy_tailed(n, config.d, data_seed);
    case Scenario::Correlated:
        return gen_correlated(n, config.d, config.rho, config.block, data_seed);
    case Scenario::ExternalCsv:
        return read_dataset_csv(config.data_path);
    }
    throw std::invalid_argument("unknown scenario");
}

ResultRow run_method(const Dataset& data, Method method, const ExperimentConfig& config, std::uint64_t seed)
{
    ResultRow row;
    row.scenario = to_string(config.scenario);
    row.method = to_string(method);
    row.n = data.n();
    row.d = data.d();
    row.seed = seed;
    if (data.labels.size() != data.n())
        throw std::invalid_argument("dataset has no ground-truth labels");

    const auto start = Clock::now();
    Labels labels;
    if (is_divi(method)) {
        const PriorSpec prior = build_prior(data.x, prior_mode_for(method), config.k0, derive_seed(seed, "prior"));
        TrainConfig train = config.train;
        train.seed = derive_seed(seed, "train");
        FitResult fr = fit(data.x, prior, train);
        row.wall_time_seconds = seconds_since(start);
        labels = std::move(fr.labels);
        row.final_k = fr.final_k;
        row.split_count = fr.split_events.size();
        const ActiveDimensions active = active_dimensions(fr.gate_probs);
        row.active_dims = active.count;
        if (data.informative_mask.size() == data.d())
            row.feature_f1 = feature_f1(active.mask, data.informative_mask);
    } else {
        const std::uint64_t s = derive_seed(seed, "baseline");
        if (method == Method::KMeans)
            labels = kmeans_fit(data.x, config.k, kDefaultKMeansRestarts, s).labels;
        else
            labels = diag_gmm_fit(data.x, config.k, kDefaultGmmRestarts, s).labels;
        row.wall_time_seconds = seconds_since(start);
        row.final_k = config.k;
    }
    row.ari = adjusted_rand_index(labels, data.labels);
    row.nmi = normalized_mutual_info(labels, data.labels);
    return row;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows)
{
    using Key = std::tuple<std::string, std::size_t, std::size_t, double, bool, std::size_t, std::string>;
    auto key_of = [](const ResultRow& r) {
        return Key{r.scenario, r.n, r.d, r.sweep_value.value_or(0.0), r.sweep_value.has_value(),
                   method_rank(r.method), r.method};
    };
    std::vector<Key> keys;
    for (const auto& r : rows)
        keys.push_back(key_of(r));
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

    std::vector<SummaryRow> out;
    for (const auto& key : keys) {
        SummaryRow s;
        std::vector<double> ari, nmi, k, wall, splits, f1, active;
        bool first = true;
        for (const auto& r : rows) {
            if (key_of(r) != key)
                continue;
            if (first) {
                s.scenario = r.scenario;
                s.method = r.method;
                s.n = r.n;
                s.d = r.d;
                s.sweep_value = r.sweep_value;
                first = false;
            }
            ++s.runs;
            if (!r.ok()) {
                ++s.failures;
                continue;
            }
            ari.push_back(r.ari);
            nmi.push_back(r.nmi);
            k.push_back(static_cast<double>(r.final_k));
            wall.push_back(r.wall_time_seconds);
            splits.push_back(static_cast<double>(r.split_count));
            if (r.feature_f1)
                f1.push_back(*r.feature_f1);
            if (r.active_dims)
                active.push_back(static_cast<double>(*r.active_dims));
        }
        s.ari = mean_sd(ari);
        s.nmi = mean_sd(nmi);
        s.final_k = mean_sd(k);
        s.wall_time_seconds = mean_sd(wall);
        s.split_count = mean_sd(splits);
        if (!f1.empty())
            s.feature_f1 = mean_sd(f1);
        if (!active.empty())
            s.active_dims = mean_sd(active);
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

struct Task {
    std::size_t size_index;
    std::size_t seed_index;
    Method method;
};

// Runs every (size, seed, method) for one TrainConfig. Datasets are built
// once per (size, seed) and shared by the methods.
std::vector<ResultRow> run_grid(const ExperimentConfig& config, std::optional<double> sweep_value)
{
    const bool external = config.scenario == Scenario::ExternalCsv;
    const std::vector<std::size_t> sizes = external ? std::vector<std::size_t>{0} : config.sizes;

    std::vector<std::vector<std::optional<Dataset>>> data(sizes.size(),
                                                          std::vector<std::optional<Dataset>>(config.seeds.size()));
    std::vector<std::vector<std::string>> data_error(sizes.size(), std::vector<std::string>(config.seeds.size()));
    std::optional<Dataset> shared;
    std::string shared_error;
    if (external) {
        try {
            shared = standardize(read_dataset_csv(config.data_path));
        } catch (const std::exception& e) {
            shared_error = e.what();
        }
    }

    std::vector<Task> tasks;
    for (std::size_t a = 0; a < sizes.size(); ++a)
        for (std::size_t b = 0; b < config.seeds.size(); ++b)
            for (auto m : config.methods)
                tasks.push_back({a, b, m});

    std::vector<ResultRow> rows(tasks.size());
    std::vector<std::once_flag> data_once(sizes.size() * config.seeds.size());
    std::atomic<std::size_t> next{0};

    auto dataset_for = [&](std::size_t a, std::size_t b) -> const Dataset* {
        if (external) {
            if (!shared)
                throw std::runtime_error(shared_error);
            return &*shared;
        }
        std::call_once(data_once[a * config.seeds.size() + b], [&] {
            try {
                data[a][b] = standardize(make_dataset(config, sizes[a], config.seeds[b]));
            } catch (const std::exception& e) {
                data_error[a][b] = e.what();
            }
        });
        if (!data[a][b])
            throw std::runtime_error(data_error[a][b]);
        return &*data[a][b];
    };

    auto worker = [&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) {
            const Task& task = tasks[t];
            const std::uint64_t seed = config.seeds[task.seed_index];
            ResultRow row;
            try {
                row = run_method(*dataset_for(task.size_index, task.seed_index), task.method, config, seed);
            } catch (const std::exception& e) {
                Dataset empty;
                empty.x = Matrix(external ? 0 : sizes[task.size_index], external ? 0 : config.d);
                row = error_row(empty, task.method, config, seed, e.what());
            }
            row.sweep_value = sweep_value;
            rows[t] = std::move(row);
        }
    };

    const std::size_t jobs = std::min(config.jobs, std::max<std::size_t>(tasks.size(), 1));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < jobs; ++i)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    return rows;
}

void sort_rows(std::vector<ResultRow>& rows)
{
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        auto key = [](const ResultRow& r) {
            return std::make_tuple(r.sweep_value.value_or(0.0), r.n, method_rank(r.method), r.seed);
        };
        return key(a) < key(b);
    });
}

} // namespace

BenchmarkTable run_benchmark(const ExperimentConfig& config)
{
    config.validate();
    BenchmarkTable table;
    table.rows = run_grid(config, std::nullopt);
    sort_rows(table.rows);
    table.summary = summarize(table.rows);
    return table;
}

BenchmarkTable run_sweep(const ExperimentConfig& config)
{
    config.validate();
    if (config.sweep_axis.empty())
        throw std::invalid_argument("sweep needs a sweep axis");
    BenchmarkTable table;
    for (double v : config.sweep_values) {
        ExperimentConfig c = config;
        set_train_field(c.train, config.sweep_axis, v);
        auto rows = run_grid(c, v);
        table.rows.insert(table.rows.end(), rows.begin(), rows.end());
    }
    sort_rows(table.rows);
    table.summary = summarize(table.rows);
    return table;
}

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows,
                       const std::string& sweep_axis)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << "scenario,method,n,d,seed,";
    if (!sweep_axis.empty())
        out << sweep_axis << ',';
    out << "ari,nmi,feature_f1,final_k,active_dims,wall_time_seconds,split_count,error\n";
    for (const auto& r : rows) {
        out << r.scenario << ',' << r.method << ',' << r.n << ',' << r.d << ',' << r.seed << ',';
        if (!sweep_axis.empty())
            out << opt_text(r.sweep_value) << ',';
        if (r.ok()) {
            out << format_double(r.ari) << ',' << format_double(r.nmi) << ',' << opt_text(r.feature_f1) << ','
                << r.final_k << ',' << (r.active_dims ? std::to_string(*r.active_dims) : std::string()) << ','
                << format_double(r.wall_time_seconds) << ',' << r.split_count << ",\n";
        } else {
            out << ",,,,,,," << csv_escape(r.error) << '\n';
        }
    }
    if (!out)
        throw IoError("write failed for " + path.string());
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows,
                       const std::string& sweep_axis)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << "scenario,method,n,d,";
    if (!sweep_axis.empty())
        out << sweep_axis << ',';
    out << "runs,failures,ari_mean,ari_sd,nmi_mean,nmi_sd,feature_f1_mean,feature_f1_sd,final_k_mean,final_k_sd,"
           "active_dims_mean,active_dims_sd,wall_time_mean,wall_time_sd,split_count_mean,split_count_sd\n";
    auto stat = [](const Stat& s) { return format_double(s.mean) + "," + format_double(s.sd); };
    auto ostat = [&](const std::optional<Stat>& s) { return s ? stat(*s) : std::string(","); };
    for (const auto& r : rows) {
        out << r.scenario << ',' << r.method << ',' << r.n << ',' << r.d << ',';
        if (!sweep_axis.empty())
            out << opt_text(r.sweep_value) << ',';
        out << r.runs << ',' << r.failures << ',' << stat(r.ari) << ',' << stat(r.nmi) << ',' << ostat(r.feature_f1)
            << ',' << stat(r.final_k) << ',' << ostat(r.active_dims) << ',' << stat(r.wall_time_seconds) << ','
            << stat(r.split_count) << '\n';
    }
    if (!out)
        throw IoError("write failed for " + path.string());
}

void write_manifest(const std::filesystem::path& path, const ExperimentConfig& config, const BenchmarkTable& table,
                    const std::string& command)
{
    const std::string canonical = config_to_json(config);
    char hash[17];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
    ordered_json j;
    j["command"] = command;
    j["library_version"] = kLibraryVersion;
    j["config_hash"] = hash;
    j["config"] = ordered_json::parse(canonical);
    j["runs"] = table.rows.size();
    j["failures"] = table.failures();
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

double time_epoch(std::size_t n, std::size_t d, std::size_t k, std::size_t repeats, std::uint64_t seed)
{
    if (n == 0 || d == 0 || k == 0 || repeats == 0)
        throw std::invalid_argument("time_epoch needs positive sizes");
    Rng rng(derive_seed(seed, "timing"));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> values(n * d);
    for (auto& v : values)
        v = normal(rng);
    const Matrix x(n, d, std::move(values));

    PriorSpec prior{std::vector<double>(d, 0.5), PriorMode::NonInformative};
    ModelParams params = initial_params(x, prior);
    for (std::size_t c = 1; c < k; ++c)
        params = split_component(params, 0, 0.2, rng, k + 1);
    AdamState adam(params);
    const double beta = static_cast<double>(n);

    std::vector<double> times;
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto start = Clock::now();
        const GateSample gates = sample_relaxed_gates(params.eta, 0.5, rng);
        const ObjectiveGradient og = objective_gradients(x, params, gates, prior, beta);
        adam.step(params, og.grad, 0.01, -10.0);
        times.push_back(seconds_since(start));
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

} // namespace divi
