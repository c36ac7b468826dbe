#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedicu/datapipe.hpp"
#include "fedicu/rng.hpp"

namespace fedicu {

struct SyntheticParams {
    std::uint64_t seed = 0;
    std::size_t n_patients = 1000;
    double death_rate = 0.044;
    CohortSpec cohort;
    double drift_strength = 1.0;
};

struct SyntheticCohort {
    std::vector<RawEvent> events;
    DeathTable deaths;
    std::vector<std::string> patient_order;
    std::size_t death_count = 0;
};

// Survivors follow stationary per-feature AR(1) processes around clinically
// plausible means; decedents add a monotone per-feature drift toward
// abnormal values whose magnitude grows linearly in t/stay, so windows
// closer to the end of the stay carry a stronger signal. Stay lengths are
// uniform in [dt_min, dt_max]; sampling is irregular with per-feature
// missingness; every patient anchors vitals at t=0 and t=stay. Deterministic
// per seed, with exactly round(n·death_rate) deaths.
SyntheticCohort generate_synthetic_cohort(const SyntheticParams& params);

}  // namespace fedicu
