#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fedicu/datapipe.hpp"
#include "fedicu/metrics.hpp"
#include "fedicu/model.hpp"
#include "fedicu/partition.hpp"

namespace fedicu {

// ---------------------------------------------------------------------------
// Configuration

struct TrainConfig {
    double lr0 = 0.01;
    int lr_halving_every = 5;  // epochs between 50% learning-rate cuts
    int max_epochs = 100;
    int patience = 30;
    EsMetric es_metric = EsMetric::loss;
    int batch_base = 512;  // local minibatch size is batch_base / K
    enum class Optimizer { adam, sgd };
    Optimizer optimizer = Optimizer::adam;
    std::uint64_t seed = 0;
    double threshold = 0.5;
    // Computes class weights over the pooled training data instead of per
    // client. Only the aggregation-equivalence checks use this.
    bool global_class_weights = false;

    void validate() const;
};

struct FlConfig {
    std::size_t clients = 2;
    int local_epochs = 1;       // E
    double participation = 1.0; // C
    int rounds_max = 100;

    void validate() const;
};

struct ClassWeights {
    double w_pos = 0.0;
    double w_neg = 0.0;
};

// w_c = n_total / n_c, computed on training labels only; an absent class
// gets weight 0 with a warning.
ClassWeights class_weights(const std::vector<int>& labels);

// lr0 · 0.5^floor(epoch / halving), epoch counted from 0.
double lr_at(int epoch, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Tensor-shaped dataset

// Normalized per-patient windows keyed by id; the form trainers consume.
struct TensorDataset {
    double dt_data_hours = 0.0;
    std::size_t vitals_steps = 0;
    std::size_t labs_steps = 0;
    std::vector<std::string> ids;  // sorted
    std::vector<Matrix> vitals;    // [vitals_steps × 7] per patient
    std::vector<Matrix> labs;      // [labs_steps × 16] per patient
    std::vector<int> labels;
    std::vector<double> dt_pred_hours;

    std::size_t index_of(const std::string& id) const;
    ModelConfig model_config(const ModelConfig& base) const;
};

TensorDataset to_tensors(const WindowedDataset& windows);

// ---------------------------------------------------------------------------
// Logs and results

struct RoundLogEntry {
    int epoch = 0;
    std::string phase;   // train | val | test
    std::string client;  // client index or "global"
    std::string metric;
    double value = 0.0;
};

struct RoundLog {
    std::vector<RoundLogEntry> entries;

    void add(int epoch, std::string phase, std::string client, std::string metric, double value);
};

void write_round_log_csv(const RoundLog& log, const std::string& path);

struct TrainResult {
    ParamVector best_params;
    std::size_t best_epoch = 0;
    double best_score = 0.0;
    std::size_t epochs_run = 0;
    RoundLog log;
    MetricsReport test_report;
    double dt_pred_mean_hours = 0.0;
};

// Observation hooks for tests and tooling. after_epoch sees the parameters
// after each epoch (CML/LML) or after each aggregation round (FL).
struct TrainHooks {
    std::function<void(int epoch, const ParamVector& params)> after_epoch;
};

// ---------------------------------------------------------------------------
// Paradigms

// Centralized training on the union of all clients' train/val pools.
TrainResult train_cml(const TensorDataset& data, const FoldPlan& fold, const ModelConfig& base,
                      const TrainConfig& config, const TrainHooks* hooks = nullptr);

// One independent run per client on its own data (minibatch batch_base/K),
// each evaluated on the shared fold test set.
std::vector<TrainResult> train_lml(const TensorDataset& data, const FoldPlan& fold,
                                   const ModelConfig& base, const TrainConfig& config,
                                   const TrainHooks* hooks = nullptr);

// Federated averaging: broadcast, E local epochs per selected client,
// size-weighted aggregation, validation on every client, early stopping on
// the weighted global score.
TrainResult train_fl(const TensorDataset& data, const FoldPlan& fold, const ModelConfig& base,
                     const TrainConfig& config, const FlConfig& fl,
                     const TrainHooks* hooks = nullptr);

// Elementwise Σ (n_k/n)·θ_k, summed in ascending client-index order.
ParamVector aggregate(const std::vector<ParamVector>& params,
                      const std::vector<std::size_t>& sizes);

}  // namespace fedicu
