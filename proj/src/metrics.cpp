#include "fedicu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedicu/errors.hpp"

namespace fedicu {

namespace {

void check_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                  const char* what) {
    if (scores.empty()) throw ValidationError(std::string(what) + ": empty input");
    if (scores.size() != labels.size())
        throw ValidationError(std::string(what) + ": scores and labels differ in length");
    for (int label : labels)
        if (label != 0 && label != 1)
            throw ValidationError(std::string(what) + ": labels must be 0 or 1");
    for (double s : scores)
        if (!std::isfinite(s)) throw ValidationError(std::string(what) + ": non-finite score");
}

}  // namespace

ConfusionResult confusion_at(const std::vector<double>& scores, const std::vector<int>& labels,
                             double threshold) {
    check_scores(scores, labels, "confusion_at");
    ConfusionResult out;
    out.threshold = threshold;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i] == 1)
            predicted ? ++out.tp : ++out.fn;
        else
            predicted ? ++out.fp : ++out.tn;
    }
    out.precision = (out.tp + out.fp) > 0
                        ? static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fp)
                        : 0.0;
    out.recall = (out.tp + out.fn) > 0
                     ? static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fn)
                     : 0.0;
    if (out.precision == 0.0 && out.recall == 0.0)
        out.f1 = -1.0;
    else
        out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_scores(scores, labels, "auroc");
    const std::size_t n = scores.size();
    const std::size_t n_pos = static_cast<std::size_t>(
        std::count(labels.begin(), labels.end(), 1));
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw MetricError("auroc: undefined for single-class labels");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average ranks over tie groups, 1-based
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
        i = j;
    }
    const double u = pos_rank_sum -
                     static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_scores(scores, labels, "auprc");
    const std::size_t n = scores.size();
    const std::size_t n_pos = static_cast<std::size_t>(
        std::count(labels.begin(), labels.end(), 1));
    if (n_pos == 0) throw MetricError("auprc: undefined without positive labels");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double area = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k)
            labels[order[k]] == 1 ? ++tp : ++fp;
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return area;
}

MetricsReport evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                              double threshold) {
    MetricsReport report;
    report.n = scores.size();
    report.n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    report.threshold = threshold;
    const ConfusionResult conf = confusion_at(scores, labels, threshold);
    report.precision = conf.precision;
    report.recall = conf.recall;
    report.f1 = conf.f1;
    report.auroc = auroc(scores, labels);
    report.auprc = auprc(scores, labels);
    return report;
}

// ---------------------------------------------------------------------------
// Early stopping

EsMonitor::EsMonitor(EsMetric metric, std::size_t patience)
    : metric_(metric), patience_(patience) {
    best_score_ = metric == EsMetric::loss ? std::numeric_limits<double>::infinity()
                                           : -std::numeric_limits<double>::infinity();
}

bool EsMonitor::improves(double score) const {
    return metric_ == EsMetric::loss ? score < best_score_ : score > best_score_;
}

EsAction EsMonitor::update(double score, const ParamVector& params) {
    epoch_ += 1;
    if (improves(score)) {
        best_score_ = score;
        best_epoch_ = epoch_;
        best_params_ = params;
        has_snapshot_ = true;
        since_best_ = 0;
        return EsAction::continue_training;
    }
    since_best_ += 1;
    return since_best_ >= patience_ ? EsAction::stop : EsAction::continue_training;
}

const ParamVector& EsMonitor::best_params() const {
    if (!has_snapshot_) throw ValidationError("EsMonitor: no snapshot recorded yet");
    return best_params_;
}

double fl_es_score(const std::vector<double>& client_scores,
                   const std::vector<std::size_t>& client_sizes) {
    if (client_scores.empty() || client_scores.size() != client_sizes.size())
        throw ValidationError("fl_es_score: scores and sizes must be non-empty and equal length");
    double total_size = 0.0;
    for (std::size_t s : client_sizes) total_size += static_cast<double>(s);
    if (total_size == 0.0) throw ValidationError("fl_es_score: total size is zero");
    double acc = 0.0;
    for (std::size_t k = 0; k < client_scores.size(); ++k)
        acc += static_cast<double>(client_sizes[k]) / total_size * client_scores[k];
    return acc;
}

}  // namespace fedicu
