#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fedicu/config.hpp"

namespace fedicu {

struct ResultRow {
    std::string paradigm;
    std::size_t clients = 1;
    double dt_data_hours = 0.0;
    std::string es_metric;
    std::size_t fold = 0;
    double auroc = 0.0, auprc = 0.0, precision = 0.0, recall = 0.0, f1 = -1.0;
    double dt_pred_mean_hours = 0.0;
};

struct AggregateRow {
    std::string paradigm;
    std::size_t clients = 1;
    double dt_data_hours = 0.0;
    std::string es_metric;
    std::size_t fold_count = 0;
    double auroc_mean = 0, auroc_std = 0;
    double auprc_mean = 0, auprc_std = 0;
    double precision_mean = 0, precision_std = 0;
    double recall_mean = 0, recall_std = 0;
    double f1_mean = 0, f1_std = 0;
    double dt_pred_mean_hours = 0;
};

struct ExperimentOutput {
    std::vector<ResultRow> rows;
    std::vector<AggregateRow> aggregates;
};

struct RunOptions {
    bool dry_run = false;
    bool resume = false;
    std::size_t jobs_override = 0;  // 0 keeps the config value
    bool quiet = false;
};

// Runs the full grid (fold × paradigm × K × dt_data × es_metric), writing
// results.csv, results.json, split plans, per-run logs and checkpoints under
// the config's output directory. Re-running with the same config and seed
// reproduces results.csv byte for byte.
ExperimentOutput run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Aggregates mean ± std over folds per configuration from a results
// directory; prints the table and writes summary.md next to results.csv.
void summarize_results(const std::string& results_dir, std::ostream& out);

struct GenDataCounts {
    std::size_t patients = 0;
    std::size_t events = 0;
    std::size_t deaths = 0;
};

struct GridPoint {
    std::string paradigm;
    std::size_t clients = 1;
    double dt_data_hours = 0.0;
    EsMetric es = EsMetric::loss;
    std::size_t fold = 0;

    std::string key() const;
};

// The exact run list for a config, in canonical output order.
std::vector<GridPoint> resolve_grid(const ExperimentConfig& config);

// Writes events.csv and outcomes.csv for the config's synthetic cohort.
GenDataCounts gen_data(const ExperimentConfig& config, const std::string& out_dir);

// Aggregation helper shared with summarize; rows must be fold rows of one
// experiment.
std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow>& rows);

}  // namespace fedicu
