#include "fedicu/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fedicu/errors.hpp"

namespace fedicu {

namespace {

struct FeatureProfile {
    double mean;
    double sd;
    double drift_dir;     // +1 drifts up toward abnormal, -1 drifts down
    double missing_rate;  // probability that a sampling slot is skipped
};

const FeatureProfile kVitalProfiles[kVitalsCount] = {
    {85.0, 12.0, +1.0, 0.05},   // heart_rate
    {120.0, 15.0, -1.0, 0.08},  // systolic_blood_pressure
    {65.0, 10.0, -1.0, 0.08},   // diastolic_blood_pressure
    {83.0, 11.0, -1.0, 0.10},   // mean_blood_pressure
    {18.0, 4.0, +1.0, 0.07},    // respiratory_rate
    {37.0, 0.6, +1.0, 0.15},    // core_temperature
    {97.0, 2.0, -1.0, 0.06},    // spo2
};

const FeatureProfile kLabProfiles[kLabsCount] = {
    {3.5, 0.5, -1.0, 0.35},    // albumin
    {20.0, 8.0, +1.0, 0.20},   // bun
    {1.0, 0.5, +1.0, 0.35},    // bilirubin
    {1.5, 0.8, +1.0, 0.30},    // lactate
    {24.0, 3.0, -1.0, 0.20},   // bicarbonate
    {5.0, 3.0, +1.0, 0.45},    // bands
    {102.0, 4.0, +1.0, 0.20},  // chloride
    {1.1, 0.5, +1.0, 0.20},    // creatinine
    {130.0, 35.0, +1.0, 0.20}, // glucose
    {11.5, 1.8, -1.0, 0.22},   // hemoglobin
    {34.0, 5.0, -1.0, 0.22},   // hematocrit
    {250.0, 80.0, -1.0, 0.25}, // platelets
    {4.1, 0.5, +1.0, 0.20},    // potassium
    {32.0, 8.0, +1.0, 0.30},   // ptt
    {139.0, 4.0, +1.0, 0.20},  // sodium
    {9.0, 3.0, +1.0, 0.22},    // white_blood_cells
};

constexpr double kVitalAr = 0.8;
constexpr double kLabAr = 0.5;

std::string patient_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "p%06zu", index);
    return buf;
}

}  // namespace

SyntheticCohort generate_synthetic_cohort(const SyntheticParams& params) {
    if (!(params.death_rate > 0.0 && params.death_rate < 1.0))
        throw ValidationError("generate_synthetic_cohort: death_rate outside (0,1)");
    if (params.n_patients == 0)
        throw ValidationError("generate_synthetic_cohort: need at least one patient");
    params.cohort.validate();

    const std::size_t n = params.n_patients;
    const std::size_t death_count = static_cast<std::size_t>(
        std::llround(params.death_rate * static_cast<double>(n)));

    // Stratified death assignment: a seeded shuffle marks exactly
    // round(n·rate) patients as decedents.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng assign_rng(derive_seed(params.seed, {seed_tag::synthetic, 0}));
    assign_rng.shuffle(order);
    std::vector<bool> dies(n, false);
    for (std::size_t i = 0; i < death_count && i < n; ++i) dies[order[i]] = true;

    SyntheticCohort out;
    out.death_count = death_count;

    for (std::size_t i = 0; i < n; ++i) {
        const std::string id = patient_name(i);
        out.patient_order.push_back(id);
        Rng rng(derive_seed(params.seed, {seed_tag::synthetic, 1, i}));

        const double stay =
            rng.uniform(params.cohort.dt_min_hours, params.cohort.dt_max_hours);
        const double severity = dies[i] ? rng.uniform(0.6, 1.4) : 0.0;

        auto emit = [&](EventKind kind, std::size_t feature, double t, double value) {
            RawEvent ev;
            ev.patient_id = id;
            ev.stay_seq = 1;
            ev.kind = kind;
            ev.feature = feature;
            ev.t_rel_hours = t;
            ev.value = std::max(value, 0.0);
            out.events.push_back(std::move(ev));
        };

        auto sample_value = [&](const FeatureProfile& prof, double& ar_state, double ar_coef,
                                double t) {
            ar_state = ar_coef * ar_state + std::sqrt(1.0 - ar_coef * ar_coef) * rng.normal();
            const double drift =
                prof.drift_dir * params.drift_strength * prof.sd * severity * (t / stay);
            return prof.mean + prof.sd * ar_state + drift;
        };

        // Vitals: anchored at admission and at the end of the stay, hourly
        // slots with jitter and missingness in between.
        const std::size_t vital_slots = static_cast<std::size_t>(std::floor(stay));
        for (std::size_t f = 0; f < kVitalsCount; ++f) {
            const FeatureProfile& prof = kVitalProfiles[f];
            double ar_state = rng.normal();
            emit(EventKind::vital, f, 0.0, prof.mean + prof.sd * ar_state);
            for (std::size_t slot = 1; slot <= vital_slots; ++slot) {
                const double t = std::min(static_cast<double>(slot) + 0.9 * rng.next_double(),
                                          stay);
                const double value = sample_value(prof, ar_state, kVitalAr, t);
                if (rng.next_double() < prof.missing_rate) continue;
                emit(EventKind::vital, f, t, value);
            }
            if (f == 0) {
                // heart-rate observation exactly at the end pins t_end = stay
                const double value = sample_value(prof, ar_state, kVitalAr, stay);
                emit(EventKind::vital, f, stay, value);
            }
        }

        // Labs: one slot per 8 hours with heavier missingness.
        const std::size_t lab_slots = static_cast<std::size_t>(
            std::floor(stay / params.cohort.labs_interval_hours)) + 1;
        for (std::size_t f = 0; f < kLabsCount; ++f) {
            const FeatureProfile& prof = kLabProfiles[f];
            double ar_state = rng.normal();
            for (std::size_t slot = 0; slot < lab_slots; ++slot) {
                const double t0 = static_cast<double>(slot) * params.cohort.labs_interval_hours;
                const double t = std::min(
                    t0 + rng.next_double() * (params.cohort.labs_interval_hours - 0.1), stay);
                const double value = sample_value(prof, ar_state, kLabAr, t);
                if (rng.next_double() < prof.missing_rate) continue;
                emit(EventKind::lab, f, t, value);
            }
        }

        if (dies[i])
            out.deaths[id] = stay;
        else
            out.deaths[id] = std::nullopt;
    }
    return out;
}

}  // namespace fedicu
