#pragma once

// Builds small end-to-end datasets through the real pipeline (synthetic
// events → cohort → windows → fold-scoped normalization → tensors) for the
// trainer tests and the acceptance suite.

#include <unordered_set>

#include "fedicu/partition.hpp"
#include "fedicu/synthetic.hpp"
#include "fedicu/trainers.hpp"

namespace fedtest {

struct PipelineData {
    fedicu::TensorDataset tensors;  // normalized for the chosen fold
    fedicu::SplitPlan plan;
    std::size_t fold = 0;

    const fedicu::FoldPlan& fold_plan() const { return plan.folds[fold]; }
};

inline PipelineData make_pipeline_data(std::uint64_t seed, std::size_t n_patients,
                                       double death_rate, double drift, double dt_data,
                                       std::size_t folds, std::size_t clients,
                                       std::size_t fold = 0,
                                       fedicu::CohortSpec spec = fedicu::CohortSpec{}) {
    using namespace fedicu;
    SyntheticParams params;
    params.seed = seed;
    params.n_patients = n_patients;
    params.death_rate = death_rate;
    params.drift_strength = drift;
    params.cohort = spec;
    const SyntheticCohort synth = generate_synthetic_cohort(params);
    const Cohort cohort = build_cohort(synth.events, synth.deaths, spec);

    std::vector<std::string> ids;
    std::vector<int> labels;
    for (const PatientRecord& rec : cohort.records) {
        ids.push_back(rec.patient_id);
        labels.push_back(rec.label);
    }

    PipelineData out;
    out.fold = fold;
    out.plan = make_split_plan(ids, labels, folds, clients, 0.2, seed);

    const WindowedDataset windows = make_windowed_dataset(cohort, dt_data, spec);
    std::unordered_set<std::string> in_test(out.plan.folds[fold].test.begin(),
                                            out.plan.folds[fold].test.end());
    std::vector<const WindowedSample*> fit_pool;
    for (const WindowedSample& s : windows.samples)
        if (!in_test.count(s.patient_id)) fit_pool.push_back(&s);
    const NormalizationStats stats = fit_normalizer(fit_pool);

    WindowedDataset normalized;
    normalized.dt_data_hours = windows.dt_data_hours;
    normalized.vitals_steps = windows.vitals_steps;
    normalized.labs_steps = windows.labs_steps;
    for (const WindowedSample& s : windows.samples)
        normalized.samples.push_back(apply_normalizer(stats, s));
    out.tensors = to_tensors(normalized);
    return out;
}

}  // namespace fedtest
