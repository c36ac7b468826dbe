#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "fedicu/errors.hpp"
#include "fedicu/metrics.hpp"
#include "fedicu/rng.hpp"

using namespace fedicu;

namespace {

// O(n²) pair-counting oracle: P(score_pos > score_neg) + ½ P(tie).
double auroc_pairs(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

// Brute-force step-curve sweep: rescan the whole set at every distinct
// threshold instead of accumulating counts.
double auprc_bruteforce(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::set<double, std::greater<double>> thresholds(scores.begin(), scores.end());
    const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    double area = 0.0, prev_recall = 0.0;
    for (double th : thresholds) {
        double tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= th) (labels[i] == 1 ? tp : fp) += 1;
        }
        const double recall = tp / n_pos;
        const double precision = tp / (tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return area;
}

ParamVector scalar_params(double x) {
    ParamVector pv;
    pv.layout = {ParamShape{"w", 1, 1}};
    pv.values = {x};
    return pv;
}

void random_instance(Rng& rng, std::size_t n, std::vector<double>& scores,
                     std::vector<int>& labels, bool quantized) {
    scores.clear();
    labels.clear();
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = rng.next_double();
        if (quantized) s = std::floor(s * 8.0) / 8.0;  // provoke ties
        scores.push_back(s);
        const int label = rng.next_double() < 0.3 ? 1 : 0;
        labels.push_back(label);
        pos += label;
    }
    if (pos == 0) labels[0] = 1;
    if (pos == n) labels[0] = 0;
}

}  // namespace

TEST_CASE("confusion counts and derived scores match the hand values") {
    const ConfusionResult perfect = confusion_at({0.9, 0.1}, {1, 0});
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    // everything predicted negative while positives exist: undefined F1
    const ConfusionResult blind = confusion_at({0.1, 0.2, 0.3}, {1, 1, 0});
    CHECK(blind.recall == 0.0);
    CHECK(blind.precision == 0.0);
    CHECK(blind.f1 == -1.0);

    const ConfusionResult tied = confusion_at({0.6, 0.6}, {1, 0});
    CHECK(tied.precision == doctest::Approx(0.5));
    CHECK(tied.recall == doctest::Approx(1.0));
    CHECK(tied.f1 == doctest::Approx(2.0 / 3.0));

    CHECK_THROWS_AS(confusion_at({}, {}), ValidationError);
}

TEST_CASE("confusion counts always sum to n") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> scores;
        std::vector<int> labels;
        random_instance(rng, 20 + rng.below(40), scores, labels, trial % 2 == 0);
        const ConfusionResult c = confusion_at(scores, labels, 0.5);
        CHECK(c.tp + c.fp + c.tn + c.fn == scores.size());
    }
}

TEST_CASE("auroc hits the closed-form anchor cases") {
    CHECK(auroc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
    CHECK(auroc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(auroc({0.5, 0.6}, {1, 1}), MetricError);
}

TEST_CASE("auroc matches the brute-force pair oracle on 50 random instances") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> scores;
        std::vector<int> labels;
        random_instance(rng, 10 + rng.below(50), scores, labels, trial % 2 == 0);
        CHECK(std::fabs(auroc(scores, labels) - auroc_pairs(scores, labels)) < 1e-12);
    }
}

TEST_CASE("auroc is invariant under strictly monotone score transforms") {
    Rng rng(100);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> scores;
        std::vector<int> labels;
        random_instance(rng, 30, scores, labels, trial % 2 == 0);
        std::vector<double> warped;
        for (double s : scores) warped.push_back(std::exp(3.0 * s) + 1.0);
        CHECK(auroc(scores, labels) == doctest::Approx(auroc(warped, labels)).epsilon(1e-12));
    }
}

TEST_CASE("auroc of negated tie-free scores complements to one") {
    Rng rng(101);
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < 40; ++i) {
        scores.push_back(rng.next_double() + static_cast<double>(i) * 1e-9);
        labels.push_back(i % 3 == 0 ? 1 : 0);
    }
    std::vector<double> negated;
    for (double s : scores) negated.push_back(-s);
    CHECK(auroc(scores, labels) + auroc(negated, labels) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("auprc matches the brute-force sweep and its anchors") {
    CHECK(auprc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
    // worst-case ranking: positives all at the bottom
    const double worst = auprc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1});
    CHECK(worst == doctest::Approx(auprc_bruteforce({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1})));
    CHECK(worst == doctest::Approx(5.0 / 12.0));  // (1/2)(1/3) + (1/2)(1/2)
    CHECK_THROWS_AS(auprc({0.5, 0.6}, {0, 0}), MetricError);

    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> scores;
        std::vector<int> labels;
        random_instance(rng, 10 + rng.below(50), scores, labels, trial % 2 == 0);
        CHECK(std::fabs(auprc(scores, labels) - auprc_bruteforce(scores, labels)) < 1e-12);
    }
}

TEST_CASE("random-ranking auprc averages near the prevalence baseline") {
    Rng rng(4242);
    const std::size_t n = 2000;
    const std::size_t n_pos = 88;  // 4.4%
    double total = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> scores(n);
        std::vector<int> labels(n, 0);
        for (std::size_t i = 0; i < n_pos; ++i) labels[i] = 1;
        for (std::size_t i = 0; i < n; ++i) scores[i] = rng.next_double();
        total += auprc(scores, labels);
    }
    CHECK(std::fabs(total / 200.0 - 0.044) < 0.01);
}

TEST_CASE("early stopping waits out the patience window and restores the best") {
    EsMonitor monitor(EsMetric::loss, 30);
    std::size_t stopped_at = 0;
    for (std::size_t epoch = 1; epoch <= 100; ++epoch) {
        // improving through epoch 3, flat afterwards
        const double score = epoch <= 3 ? 1.0 / static_cast<double>(epoch) : 0.5;
        if (monitor.update(score, scalar_params(static_cast<double>(epoch))) == EsAction::stop) {
            stopped_at = epoch;
            break;
        }
    }
    CHECK(stopped_at == 33);
    CHECK(monitor.best_epoch() == 3);
    CHECK(monitor.best_params().values[0] == 3.0);
    CHECK(monitor.best_score() == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("monotonically improving scores never trigger early stopping") {
    EsMonitor monitor(EsMetric::f1, 5);
    for (std::size_t epoch = 1; epoch <= 200; ++epoch) {
        const double score = static_cast<double>(epoch) / 200.0;
        CHECK(monitor.update(score, scalar_params(score)) == EsAction::continue_training);
    }
}

TEST_CASE("the f1 sentinel loses against any real score and ties do not improve") {
    EsMonitor monitor(EsMetric::f1, 2);
    monitor.update(-1.0, scalar_params(1.0));  // sentinel round
    monitor.update(0.3, scalar_params(2.0));
    CHECK(monitor.best_score() == 0.3);
    CHECK(monitor.best_params().values[0] == 2.0);
    // a tie keeps the earlier snapshot
    monitor.update(0.3, scalar_params(3.0));
    CHECK(monitor.best_params().values[0] == 2.0);
    CHECK(monitor.best_epoch() == 2);
}

TEST_CASE("early stopping never keeps a score worse than one it has seen") {
    Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        EsMonitor monitor(EsMetric::loss, 4);
        double best_seen = 1e18;
        for (std::size_t epoch = 1; epoch <= 50; ++epoch) {
            const double score = rng.next_double();
            best_seen = std::min(best_seen, score);
            if (monitor.update(score, scalar_params(score)) == EsAction::stop) break;
        }
        CHECK(monitor.best_score() == best_seen);
    }
}

TEST_CASE("federated early-stopping score is the size-weighted client mean") {
    CHECK(fl_es_score({0.4, 0.6}, {10, 10}) == doctest::Approx(0.5));
    CHECK(fl_es_score({0.73}, {5}) == doctest::Approx(0.73));
    CHECK(fl_es_score({0.0, 1.0}, {1, 3}) == doctest::Approx(0.75));
    CHECK_THROWS_AS(fl_es_score({}, {}), ValidationError);
    CHECK_THROWS_AS(fl_es_score({0.5}, {1, 2}), ValidationError);
}

TEST_CASE("evaluate_scores bundles all five metrics with provenance counts") {
    const MetricsReport r = evaluate_scores({0.9, 0.7, 0.3, 0.1}, {1, 0, 1, 0}, 0.5);
    CHECK(r.n == 4);
    CHECK(r.n_pos == 2);
    CHECK(r.threshold == 0.5);
    CHECK(r.auroc == doctest::Approx(0.75));
    CHECK(r.precision == doctest::Approx(0.5));
    CHECK(r.recall == doctest::Approx(0.5));
}
