#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedicu/datapipe.hpp"
#include "fedicu/trainers.hpp"

namespace fedicu {

// Minimal TOML-style key/value file: [section] headers, key = value pairs,
// # comments, quoted strings, booleans, numbers and flat arrays. Keys are
// exposed flattened as "section.key".
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text, const std::string& origin = "config");

    bool has(const std::string& key) const;

    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& key,
                                             const std::vector<std::string>& fallback) const;

    // Keys present in the file but never read; used to reject typos.
    std::vector<std::string> unused_keys() const;

private:
    struct Entry {
        std::vector<std::string> tokens;  // raw scalar or array elements
        bool is_array = false;
        std::size_t line = 0;
        mutable bool used = false;
    };

    const Entry* find(const std::string& key) const;
    std::string origin_;
    std::map<std::string, Entry> entries_;
};

// Fully resolved experiment description; every field has the workbench
// default so an empty config file runs the standard grid on synthetic data.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    enum class DataSource { synthetic, csv };
    DataSource source = DataSource::synthetic;
    std::string events_path;
    std::string outcomes_path;
    std::size_t n_patients = 2000;
    double death_rate = 0.044;
    double drift_strength = 2.0;
    CohortSpec cohort;

    std::size_t folds = 5;
    double val_fraction = 0.2;
    std::vector<double> dt_data_hours = {8.0, 16.0, 24.0};
    std::vector<std::string> paradigms = {"cml", "fl", "lml"};
    std::vector<std::size_t> client_counts = {2, 4, 8};
    std::vector<EsMetric> es_metrics = {EsMetric::loss};
    std::size_t jobs = 1;

    TrainConfig train;
    FlConfig fl;  // clients is filled per grid point

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_config(const ConfigFile& file);

    void validate() const;
};

std::string es_metric_name(EsMetric metric);
EsMetric es_metric_from_name(const std::string& name);

}  // namespace fedicu
