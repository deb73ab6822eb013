#include "divi/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "json.hpp"

namespace divi {

namespace {

using nlohmann::json;

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

std::string trim(std::string s)
{
    while (!s.empty() && (s.back() == '\r' || s.back() == ' '))
        s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && s[b] == ' ')
        ++b;
    return s.substr(b);
}

double parse_double(const std::string& text, std::size_t line_no)
{
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw IoError("line " + std::to_string(line_no) + ": cannot parse number '" + text + "'");
    return v;
}

int parse_int(const std::string& text, std::size_t line_no)
{
    int v = 0;
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw IoError("line " + std::to_string(line_no) + ": cannot parse label '" + text + "'");
    return v;
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    return in;
}

json matrix_to_json(const Matrix& m)
{
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"values", m.values()}};
}

Matrix matrix_from_json(const json& j)
{
    auto rows = j.at("rows").get<std::size_t>();
    auto cols = j.at("cols").get<std::size_t>();
    return Matrix(rows, cols, j.at("values").get<std::vector<double>>());
}

json config_to_json(const TrainConfig& c)
{
    return json{{"epochs", c.epochs},         {"t_split", c.t_split},   {"tau_mult", c.tau_mult},
                {"beta_mult", c.beta_mult},   {"lr", c.lr},             {"t0", c.t0},
                {"t_min", c.t_min},           {"gamma", c.gamma},       {"sigma_split", c.sigma_split},
                {"k_max", c.k_max},           {"logvar_floor", c.logvar_floor},
                {"bg_logvar", c.bg_logvar},   {"seed", c.seed}};
}

TrainConfig config_from_json(const json& j)
{
    TrainConfig c;
    c.epochs = j.at("epochs").get<std::size_t>();
    c.t_split = j.at("t_split").get<std::size_t>();
    c.tau_mult = j.at("tau_mult").get<double>();
    c.beta_mult = j.at("beta_mult").get<double>();
    c.lr = j.at("lr").get<double>();
    c.t0 = j.at("t0").get<double>();
    c.t_min = j.at("t_min").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.sigma_split = j.at("sigma_split").get<double>();
    c.k_max = j.at("k_max").get<std::size_t>();
    c.logvar_floor = j.at("logvar_floor").get<double>();
    c.bg_logvar = j.at("bg_logvar").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

} // namespace

std::string format_double(double value)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc())
        throw IoError("cannot format number");
    return std::string(buf, ptr);
}

std::uint64_t fnv1a64(const std::string& text) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::filesystem::path mask_sidecar_path(const std::filesystem::path& path)
{
    return std::filesystem::path(path.string() + ".mask");
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data)
{
    const bool has_labels = !data.labels.empty();
    if (has_labels && data.labels.size() != data.n())
        throw IoError("label count does not match row count");
    auto out = open_out(path);
    for (std::size_t j = 0; j < data.d(); ++j)
        out << (j ? "," : "") << 'f' << (j + 1);
    if (has_labels)
        out << ",label";
    out << '\n';
    for (std::size_t i = 0; i < data.n(); ++i) {
        for (std::size_t j = 0; j < data.d(); ++j)
            out << (j ? "," : "") << format_double(data.x(i, j));
        if (has_labels)
            out << ',' << data.labels[i];
        out << '\n';
    }
    if (!out)
        throw IoError("write failed for " + path.string());

    const auto sidecar = mask_sidecar_path(path);
    if (!data.informative_mask.empty()) {
        auto m = open_out(sidecar);
        for (std::size_t j = 0; j < data.informative_mask.size(); ++j)
            m << (j ? "," : "") << (data.informative_mask[j] ? 1 : 0);
        m << '\n';
    } else {
        std::error_code ec;
        std::filesystem::remove(sidecar, ec);
    }
}

Dataset read_dataset_csv(const std::filesystem::path& path)
{
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw IoError(path.string() + ": empty file");
    auto header = split_fields(trim(line));
    bool has_labels = !header.empty() && trim(header.back()) == "label";
    const std::size_t d = header.size() - (has_labels ? 1 : 0);
    if (d == 0)
        throw IoError(path.string() + ": no feature columns");

    Dataset data;
    data.x = Matrix(0, d);
    std::vector<double> row(d);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty())
            continue;
        auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw IoError(path.string() + ": line " + std::to_string(line_no) + " has " +
                          std::to_string(fields.size()) + " fields, expected " + std::to_string(header.size()));
        for (std::size_t j = 0; j < d; ++j)
            row[j] = parse_double(trim(fields[j]), line_no);
        data.x.append_row(row);
        if (has_labels)
            data.labels.push_back(parse_int(trim(fields[d]), line_no));
    }

    const auto sidecar = mask_sidecar_path(path);
    if (std::filesystem::exists(sidecar)) {
        auto m = open_in(sidecar);
        std::getline(m, line);
        auto fields = split_fields(trim(line));
        if (fields.size() != d)
            throw IoError(sidecar.string() + ": mask length does not match feature count");
        for (const auto& f : fields) {
            auto t = trim(f);
            if (t != "0" && t != "1")
                throw IoError(sidecar.string() + ": mask entries must be 0 or 1");
            data.informative_mask.push_back(t == "1");
        }
    }
    return data;
}

bool ModelSnapshot::operator==(const ModelSnapshot& other) const
{
    auto same_stats = [](const std::optional<Standardization>& a, const std::optional<Standardization>& b) {
        if (a.has_value() != b.has_value())
            return false;
        return !a || (a->mean == b->mean && a->std == b->std);
    };
    auto same_config = [](const TrainConfig& a, const TrainConfig& b) {
        return config_to_json(a) == config_to_json(b);
    };
    return params == other.params && gate_probs == other.gate_probs && same_stats(stats, other.stats) &&
           same_config(config, other.config) && seed == other.seed;
}

ModelSnapshot make_snapshot(const FitResult& result, const TrainConfig& config,
                            const std::optional<Standardization>& stats)
{
    return ModelSnapshot{result.params, result.gate_probs, stats, config, config.seed};
}

std::string snapshot_to_json(const ModelSnapshot& s)
{
    json j;
    j["schema_version"] = kSnapshotSchemaVersion;
    j["library_version"] = kLibraryVersion;
    j["params"] = json{{"alpha", s.params.alpha},         {"mu", matrix_to_json(s.params.mu)},
                       {"logvar", matrix_to_json(s.params.logvar)}, {"eta", s.params.eta},
                       {"bg_mu", s.params.bg_mu},         {"bg_logvar", s.params.bg_logvar}};
    j["gate_probs"] = s.gate_probs;
    if (s.stats)
        j["standardization"] = json{{"mean", s.stats->mean}, {"std", s.stats->std}};
    else
        j["standardization"] = nullptr;
    j["config"] = config_to_json(s.config);
    j["seed"] = s.seed;
    return j.dump(2);
}

ModelSnapshot snapshot_from_json(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("corrupt model file: ") + e.what());
    }
    try {
        if (!j.contains("schema_version"))
            throw IoError("model file has no schema_version");
        const int version = j.at("schema_version").get<int>();
        if (version != kSnapshotSchemaVersion)
            throw IoError("unsupported model schema version " + std::to_string(version) + " (expected " +
                          std::to_string(kSnapshotSchemaVersion) + ")");
        ModelSnapshot s;
        const auto& p = j.at("params");
        s.params.alpha = p.at("alpha").get<std::vector<double>>();
        s.params.mu = matrix_from_json(p.at("mu"));
        s.params.logvar = matrix_from_json(p.at("logvar"));
        s.params.eta = p.at("eta").get<std::vector<double>>();
        s.params.bg_mu = p.at("bg_mu").get<std::vector<double>>();
        s.params.bg_logvar = p.at("bg_logvar").get<std::vector<double>>();
        s.params.validate();
        s.gate_probs = j.at("gate_probs").get<std::vector<double>>();
        if (s.gate_probs.size() != s.params.d())
            throw IoError("gate_probs length does not match the model dimension");
        const auto& st = j.at("standardization");
        if (!st.is_null()) {
            Standardization stats{st.at("mean").get<std::vector<double>>(), st.at("std").get<std::vector<double>>()};
            if (stats.mean.size() != s.params.d() || stats.std.size() != s.params.d())
                throw IoError("standardization length does not match the model dimension");
            s.stats = std::move(stats);
        }
        s.config = config_from_json(j.at("config"));
        s.seed = j.at("seed").get<std::uint64_t>();
        return s;
    } catch (const json::exception& e) {
        throw IoError(std::string("corrupt model file: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw IoError(std::string("corrupt model file: ") + e.what());
    }
}

void save_model(const ModelSnapshot& snapshot, const std::filesystem::path& path)
{
    const std::string text = snapshot_to_json(snapshot);
    auto out = open_out(path);
    out << text << '\n';
    if (!out)
        throw IoError("write failed for " + path.string());
}

ModelSnapshot load_model(const std::filesystem::path& path)
{
    auto in = open_in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return snapshot_from_json(buf.str());
}

void write_labels_csv(const std::filesystem::path& path, const Labels& labels)
{
    auto out = open_out(path);
    out << "label\n";
    for (int l : labels)
        out << l << '\n';
    if (!out)
        throw IoError("write failed for " + path.string());
}

Labels read_labels_csv(const std::filesystem::path& path)
{
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "label")
        throw IoError(path.string() + ": expected a 'label' header");
    Labels out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (!line.empty())
            out.push_back(parse_int(line, line_no));
    }
    return out;
}

} // namespace divi
