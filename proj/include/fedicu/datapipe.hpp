#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fedicu/matrix.hpp"

namespace fedicu {

// ---------------------------------------------------------------------------
// Feature vocabulary: 7 vital signs sampled hourly, 16 lab values sampled
// every 8 hours.

enum class EventKind { vital, lab };

constexpr std::size_t kVitalsCount = 7;
constexpr std::size_t kLabsCount = 16;

const std::array<std::string_view, kVitalsCount>& vitals_feature_names();
const std::array<std::string_view, kLabsCount>& labs_feature_names();

// Index of `name` within its kind's table; throws FormatError when unknown.
std::size_t feature_index(EventKind kind, std::string_view name);

// ---------------------------------------------------------------------------
// Raw inputs

struct RawEvent {
    std::string patient_id;
    int stay_seq = 1;  // per-patient ICU-stay ordinal, 1-based
    EventKind kind = EventKind::vital;
    std::size_t feature = 0;  // index into the kind's feature table
    double t_rel_hours = 0.0;  // hours since ICU admission
    double value = 0.0;
};

// patient_id -> death time (hours since admission); nullopt or a missing
// entry means the patient survived.
using DeathTable = std::unordered_map<std::string, std::optional<double>>;

struct CohortSpec {
    double dt_min_hours = 24.0;
    double dt_max_hours = 72.0;
    double vitals_interval_hours = 1.0;
    double labs_interval_hours = 8.0;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Cohort selection

struct StayInfo {
    std::string patient_id;
    double t_adm = 0.0;
    double t_end = 0.0;
    double stay_hours = 0.0;
    int label = 0;
};

struct CohortSelection {
    std::vector<StayInfo> stays;       // sorted by patient_id
    std::vector<std::string> audit;    // one line per dropped patient/stay
};

// Keeps only each patient's first ICU stay, anchors t_adm at the first vital
// (falling back to the logged admission at t=0), and drops stays shorter
// than dt_min or longer than dt_max (inclusive bounds are retained).
CohortSelection select_cohort(const std::vector<RawEvent>& events, const DeathTable& deaths,
                              const CohortSpec& spec);

// 1 iff a recorded death time falls within [t_adm, t_end].
int label_stay(const StayInfo& stay, const DeathTable& deaths);

// ---------------------------------------------------------------------------
// Gridding

// NaN marks a bin with no observation; imputation removes all of them.
double gap_marker();
bool is_gap(double v);

// Bins events of one stay and one kind into a [rows × features] grid
// anchored at t_adm with half-open bins [b·interval, (b+1)·interval).
// Multiple values in a bin aggregate to their median (even counts average
// the middle two). An event at exactly t_adm + rows·interval lands in the
// last bin.
Matrix resample(const std::vector<RawEvent>& stay_events, EventKind kind, double interval_hours,
                double t_adm, std::size_t rows);

// Per feature column: forward-fill from the first observation, then
// backward-fill the leading gap; a column with no observations becomes -1.
void impute(Matrix& grid);

struct PatientRecord {
    std::string patient_id;
    Matrix vitals_grid;  // ceil(stay/vitals_interval) × 7
    Matrix labs_grid;    // ceil(stay/labs_interval) × 16
    int label = 0;
    double stay_hours = 0.0;
};

PatientRecord build_record(const std::vector<RawEvent>& stay_events, const StayInfo& stay,
                           const CohortSpec& spec);

struct Cohort {
    std::vector<PatientRecord> records;  // sorted by patient_id
    std::vector<std::string> audit;
};

// select_cohort + build_record for every retained stay.
Cohort build_cohort(const std::vector<RawEvent>& events, const DeathTable& deaths,
                    const CohortSpec& spec);

// ---------------------------------------------------------------------------
// Window slicing

struct WindowedSample {
    std::string patient_id;
    Matrix vitals;  // vitals_steps × 7
    Matrix labs;    // labs_steps × 16
    int label = 0;
    double dt_pred_hours = 0.0;  // stay_hours - dt_data
};

struct WindowedDataset {
    double dt_data_hours = 0.0;
    std::size_t vitals_steps = 0;
    std::size_t labs_steps = 0;
    std::vector<WindowedSample> samples;  // sorted by patient_id
};

// First dt_data hours of both grids; requires dt_data ≤ dt_min.
WindowedSample slice_window(const PatientRecord& record, double dt_data_hours,
                            const CohortSpec& spec);

WindowedDataset make_windowed_dataset(const Cohort& cohort, double dt_data_hours,
                                      const CohortSpec& spec);

// ---------------------------------------------------------------------------
// Normalization

// Per-feature minima/maxima over the fitting samples, excluding the -1
// sentinel. A feature observed nowhere keeps min = max = 0.
struct NormalizationStats {
    std::vector<double> vitals_min, vitals_max;  // 7 each
    std::vector<double> labs_min, labs_max;      // 16 each
};

NormalizationStats fit_normalizer(const std::vector<const WindowedSample*>& samples);

// x' = (x - min)/(max - min); sentinel cells pass through unchanged; a
// feature with max == min maps to 0. Values outside the fitted range are
// not clipped.
WindowedSample apply_normalizer(const NormalizationStats& stats, const WindowedSample& sample);

// ---------------------------------------------------------------------------
// CSV interfaces

// events.csv: patient_id,stay_seq,kind,feature,t_rel_hours,value
std::vector<RawEvent> read_events_csv(const std::string& path);
void write_events_csv(const std::string& path, const std::vector<RawEvent>& events);

// outcomes.csv: patient_id,death_t_rel_hours (empty field = survived)
DeathTable read_outcomes_csv(const std::string& path);
void write_outcomes_csv(const std::string& path, const std::vector<std::string>& patient_order,
                        const DeathTable& deaths);

}  // namespace fedicu
