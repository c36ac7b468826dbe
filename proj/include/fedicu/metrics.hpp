#pragma once

#include <cstdint>
#include <vector>

#include "fedicu/params.hpp"

namespace fedicu {

struct ConfusionResult {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = -1.0;  // -1 when precision and recall are both zero
    double threshold = 0.5;
};

// prediction = score >= threshold.
ConfusionResult confusion_at(const std::vector<double>& scores, const std::vector<int>& labels,
                             double threshold = 0.5);

// Mann-Whitney statistic via rank summation with average ranks for ties:
// P(score_pos > score_neg) + ½ P(tie). Single-class labels are undefined.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Area under the precision-recall step curve by average-precision summation
// Σ (R_i − R_{i−1})·P_i over a descending-score sweep; tied scores are
// processed as one group. Undefined without positives.
double auprc(const std::vector<double>& scores, const std::vector<int>& labels);

struct MetricsReport {
    double auroc = 0.0;
    double auprc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = -1.0;
    double threshold = 0.5;
    std::size_t n = 0;
    std::size_t n_pos = 0;
};

MetricsReport evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                              double threshold = 0.5);

// ---------------------------------------------------------------------------
// Early stopping

enum class EsMetric { loss, f1 };

enum class EsAction { continue_training, stop };

// Tracks the best validation score and a snapshot of the parameters that
// produced it. Only strict improvement resets the patience counter; ties
// keep the earliest best.
class EsMonitor {
public:
    EsMonitor(EsMetric metric, std::size_t patience);

    // Returns stop once `patience` consecutive epochs failed to improve.
    EsAction update(double score, const ParamVector& params);

    double best_score() const { return best_score_; }
    std::size_t best_epoch() const { return best_epoch_; }
    const ParamVector& best_params() const;
    std::size_t epochs_seen() const { return epoch_; }

private:
    bool improves(double score) const;

    EsMetric metric_;
    std::size_t patience_;
    double best_score_;
    std::size_t best_epoch_ = 0;
    std::size_t epoch_ = 0;
    std::size_t since_best_ = 0;
    ParamVector best_params_;
    bool has_snapshot_ = false;
};

// Size-weighted mean of per-client validation scores: Σ (n_k/n)·s_k.
double fl_es_score(const std::vector<double>& client_scores,
                   const std::vector<std::size_t>& client_sizes);

}  // namespace fedicu
