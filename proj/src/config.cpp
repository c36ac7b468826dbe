#include "fedicu/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "fedicu/errors.hpp"

namespace fedicu {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        return s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split_array(const std::string& inner, const std::string& origin,
                                     std::size_t line) {
    std::vector<std::string> out;
    std::string token;
    bool quoted = false;
    for (char c : inner) {
        if (c == '"') quoted = !quoted;
        if (c == ',' && !quoted) {
            const std::string t = trim(token);
            if (!t.empty()) out.push_back(t);
            token.clear();
        } else {
            token += c;
        }
    }
    const std::string t = trim(token);
    if (!t.empty()) out.push_back(t);
    if (quoted)
        throw ConfigError(origin + " line " + std::to_string(line) + ": unterminated string");
    return out;
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_string(text, path);
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
    ConfigFile out;
    out.origin_ = origin;
    std::istringstream stream(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + " line " + std::to_string(line_no) +
                                  ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(origin + " line " + std::to_string(line_no) +
                                  ": empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + " line " + std::to_string(line_no) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(origin + " line " + std::to_string(line_no) +
                              ": empty key or value");

        Entry entry;
        entry.line = line_no;
        if (value.front() == '[') {
            if (value.back() != ']')
                throw ConfigError(origin + " line " + std::to_string(line_no) +
                                  ": unterminated array");
            entry.is_array = true;
            entry.tokens = split_array(value.substr(1, value.size() - 2), origin, line_no);
        } else {
            entry.tokens = {value};
        }
        const std::string full_key = section.empty() ? key : section + "." + key;
        if (out.entries_.count(full_key))
            throw ConfigError(origin + " line " + std::to_string(line_no) + ": duplicate key " +
                              full_key);
        out.entries_[full_key] = std::move(entry);
    }
    return out;
}

const ConfigFile::Entry* ConfigFile::find(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
}

bool ConfigFile::has(const std::string& key) const { return find(key) != nullptr; }

namespace {

double token_to_double(const std::string& token, const std::string& origin, std::size_t line,
                       const std::string& key) {
    double v = 0.0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw ConfigError(origin + " line " + std::to_string(line) + ": key " + key +
                          " expects a number, got '" + token + "'");
    return v;
}

}  // namespace

double ConfigFile::get_double(const std::string& key, double fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    if (e->is_array)
        throw ConfigError(origin_ + " line " + std::to_string(e->line) + ": key " + key +
                          " expects a scalar");
    return token_to_double(e->tokens[0], origin_, e->line, key);
}

std::int64_t ConfigFile::get_int(const std::string& key, std::int64_t fallback) const {
    const double v = get_double(key, static_cast<double>(fallback));
    const auto r = static_cast<std::int64_t>(v);
    if (static_cast<double>(r) != v) {
        const Entry* e = find(key);
        throw ConfigError(origin_ + " line " + std::to_string(e ? e->line : 0) + ": key " + key +
                          " expects an integer");
    }
    return r;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    const std::string& t = e->tokens[0];
    if (t == "true") return true;
    if (t == "false") return false;
    throw ConfigError(origin_ + " line " + std::to_string(e->line) + ": key " + key +
                      " expects true or false");
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    if (e->is_array)
        throw ConfigError(origin_ + " line " + std::to_string(e->line) + ": key " + key +
                          " expects a scalar");
    return unquote(e->tokens[0]);
}

std::vector<double> ConfigFile::get_double_list(const std::string& key,
                                                const std::vector<double>& fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    std::vector<double> out;
    for (const std::string& t : e->tokens) out.push_back(token_to_double(t, origin_, e->line, key));
    return out;
}

std::vector<std::string> ConfigFile::get_string_list(
    const std::string& key, const std::vector<std::string>& fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    std::vector<std::string> out;
    for (const std::string& t : e->tokens) out.push_back(unquote(t));
    return out;
}

std::vector<std::string> ConfigFile::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [key, entry] : entries_)
        if (!entry.used) out.push_back(key);
    return out;
}

// ---------------------------------------------------------------------------
// ExperimentConfig

std::string es_metric_name(EsMetric metric) {
    return metric == EsMetric::loss ? "loss" : "f1";
}

EsMetric es_metric_from_name(const std::string& name) {
    if (name == "loss") return EsMetric::loss;
    if (name == "f1") return EsMetric::f1;
    throw ConfigError("unknown early-stopping metric '" + name + "', expected loss or f1");
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_config(ConfigFile::parse_file(path));
}

ExperimentConfig ExperimentConfig::from_config(const ConfigFile& file) {
    ExperimentConfig cfg;

    cfg.seed = static_cast<std::uint64_t>(file.get_int("seed", static_cast<std::int64_t>(cfg.seed)));
    cfg.output_dir = file.get_string("output_dir", cfg.output_dir);

    const std::string source = file.get_string("data.source", "synthetic");
    if (source == "synthetic") cfg.source = DataSource::synthetic;
    else if (source == "csv") cfg.source = DataSource::csv;
    else throw ConfigError("data.source must be synthetic or csv, got '" + source + "'");
    cfg.events_path = file.get_string("data.events", "");
    cfg.outcomes_path = file.get_string("data.outcomes", "");
    cfg.n_patients = static_cast<std::size_t>(
        file.get_int("data.n_patients", static_cast<std::int64_t>(cfg.n_patients)));
    cfg.death_rate = file.get_double("data.death_rate", cfg.death_rate);
    cfg.drift_strength = file.get_double("data.drift_strength", cfg.drift_strength);

    cfg.cohort.dt_min_hours = file.get_double("cohort.dt_min_hours", cfg.cohort.dt_min_hours);
    cfg.cohort.dt_max_hours = file.get_double("cohort.dt_max_hours", cfg.cohort.dt_max_hours);
    cfg.cohort.vitals_interval_hours =
        file.get_double("cohort.vitals_interval_hours", cfg.cohort.vitals_interval_hours);
    cfg.cohort.labs_interval_hours =
        file.get_double("cohort.labs_interval_hours", cfg.cohort.labs_interval_hours);

    cfg.folds = static_cast<std::size_t>(
        file.get_int("experiment.folds", static_cast<std::int64_t>(cfg.folds)));
    cfg.val_fraction = file.get_double("experiment.val_fraction", cfg.val_fraction);
    cfg.dt_data_hours = file.get_double_list("experiment.dt_data_hours", cfg.dt_data_hours);
    cfg.paradigms = file.get_string_list("experiment.paradigms", cfg.paradigms);
    {
        std::vector<double> ks;
        for (std::size_t k : cfg.client_counts) ks.push_back(static_cast<double>(k));
        ks = file.get_double_list("experiment.clients", ks);
        cfg.client_counts.clear();
        for (double k : ks) {
            if (k < 1.0 || k != std::floor(k))
                throw ConfigError("experiment.clients entries must be positive integers");
            cfg.client_counts.push_back(static_cast<std::size_t>(k));
        }
    }
    {
        std::vector<std::string> metrics = {"loss"};
        metrics = file.get_string_list("experiment.es_metrics", metrics);
        cfg.es_metrics.clear();
        for (const std::string& m : metrics) cfg.es_metrics.push_back(es_metric_from_name(m));
    }
    cfg.jobs = static_cast<std::size_t>(
        file.get_int("experiment.jobs", static_cast<std::int64_t>(cfg.jobs)));

    cfg.train.lr0 = file.get_double("train.lr0", cfg.train.lr0);
    cfg.train.lr_halving_every = static_cast<int>(
        file.get_int("train.lr_halving_every", cfg.train.lr_halving_every));
    cfg.train.max_epochs = static_cast<int>(file.get_int("train.max_epochs", cfg.train.max_epochs));
    cfg.train.patience = static_cast<int>(file.get_int("train.patience", cfg.train.patience));
    cfg.train.batch_base = static_cast<int>(file.get_int("train.batch_base", cfg.train.batch_base));
    const std::string opt = file.get_string("train.optimizer", "adam");
    if (opt == "adam") cfg.train.optimizer = TrainConfig::Optimizer::adam;
    else if (opt == "sgd") cfg.train.optimizer = TrainConfig::Optimizer::sgd;
    else throw ConfigError("train.optimizer must be adam or sgd, got '" + opt + "'");
    cfg.train.threshold = file.get_double("train.threshold", cfg.train.threshold);

    cfg.fl.local_epochs = static_cast<int>(file.get_int("fl.local_epochs", cfg.fl.local_epochs));
    cfg.fl.participation = file.get_double("fl.participation", cfg.fl.participation);
    cfg.fl.rounds_max = static_cast<int>(file.get_int("fl.rounds_max", cfg.train.max_epochs));

    const std::vector<std::string> unused = file.unused_keys();
    if (!unused.empty()) {
        std::string joined;
        for (const std::string& k : unused) joined += (joined.empty() ? "" : ", ") + k;
        throw ConfigError("unknown config keys: " + joined);
    }

    cfg.validate();
    return cfg;
}

void ExperimentConfig::validate() const {
    cohort.validate();
    train.validate();
    if (folds < 2) throw ConfigError("experiment.folds must be at least 2");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ConfigError("experiment.val_fraction outside (0,1)");
    if (dt_data_hours.empty()) throw ConfigError("experiment.dt_data_hours must not be empty");
    for (double dt : dt_data_hours)
        if (dt > cohort.dt_min_hours)
            throw ConfigError("dt_data " + std::to_string(dt) + " exceeds cohort dt_min " +
                              std::to_string(cohort.dt_min_hours));
    if (paradigms.empty()) throw ConfigError("experiment.paradigms must not be empty");
    bool needs_clients = false;
    for (const std::string& p : paradigms) {
        if (p != "cml" && p != "fl" && p != "lml")
            throw ConfigError("unknown paradigm '" + p + "', expected cml, fl or lml");
        needs_clients = needs_clients || p == "fl" || p == "lml";
    }
    if (needs_clients && client_counts.empty())
        throw ConfigError("experiment.clients must be non-empty when fl or lml is requested");
    if (es_metrics.empty()) throw ConfigError("experiment.es_metrics must not be empty");
    if (jobs < 1) throw ConfigError("experiment.jobs must be >= 1");
    if (source == DataSource::csv && (events_path.empty() || outcomes_path.empty()))
        throw ConfigError("data.events and data.outcomes are required when data.source = csv");
    if (source == DataSource::synthetic) {
        if (n_patients == 0) throw ConfigError("data.n_patients must be positive");
        if (!(death_rate > 0.0 && death_rate < 1.0))
            throw ConfigError("data.death_rate outside (0,1)");
    }
}

}  // namespace fedicu
