#include "fedicu/datapipe.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "fedicu/errors.hpp"

namespace fedicu {

const std::array<std::string_view, kVitalsCount>& vitals_feature_names() {
    static const std::array<std::string_view, kVitalsCount> names = {
        "heart_rate",          "systolic_blood_pressure", "diastolic_blood_pressure",
        "mean_blood_pressure", "respiratory_rate",        "core_temperature",
        "spo2"};
    return names;
}

const std::array<std::string_view, kLabsCount>& labs_feature_names() {
    static const std::array<std::string_view, kLabsCount> names = {
        "albumin",    "bun",      "bilirubin",  "lactate",   "bicarbonate", "bands",
        "chloride",   "creatinine", "glucose",  "hemoglobin", "hematocrit", "platelets",
        "potassium",  "ptt",      "sodium",     "white_blood_cells"};
    return names;
}

std::size_t feature_index(EventKind kind, std::string_view name) {
    if (kind == EventKind::vital) {
        const auto& names = vitals_feature_names();
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
    } else {
        const auto& names = labs_feature_names();
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
    }
    throw FormatError("unknown feature name: " + std::string(name));
}

void CohortSpec::validate() const {
    if (!(dt_min_hours > 0.0) || !(dt_min_hours <= dt_max_hours))
        throw ValidationError("CohortSpec: need 0 < dt_min <= dt_max");
    if (vitals_interval_hours <= 0.0 || labs_interval_hours <= 0.0)
        throw ValidationError("CohortSpec: sampling intervals must be positive");
}

// ---------------------------------------------------------------------------
// Cohort selection

CohortSelection select_cohort(const std::vector<RawEvent>& events, const DeathTable& deaths,
                              const CohortSpec& spec) {
    spec.validate();

    struct StayAccum {
        double first_vital = std::numeric_limits<double>::infinity();
        double last_event = -std::numeric_limits<double>::infinity();
        std::size_t count = 0;
    };
    std::map<std::string, StayAccum> stays;
    for (const RawEvent& ev : events) {
        if (!std::isfinite(ev.t_rel_hours) || ev.t_rel_hours < 0.0)
            throw ValidationError("select_cohort: event for " + ev.patient_id +
                                  " has invalid t_rel_hours");
        StayAccum& acc = stays[ev.patient_id];
        if (ev.stay_seq != 1) continue;  // only the first ICU stay is kept
        acc.count += 1;
        acc.last_event = std::max(acc.last_event, ev.t_rel_hours);
        if (ev.kind == EventKind::vital) acc.first_vital = std::min(acc.first_vital, ev.t_rel_hours);
    }

    CohortSelection out;
    for (const auto& [patient_id, death] : deaths) {
        if (!stays.count(patient_id))
            out.audit.push_back(patient_id + ": dropped, no events recorded");
    }
    for (const auto& [patient_id, acc] : stays) {
        if (acc.count == 0) {
            out.audit.push_back(patient_id + ": dropped, no first-stay events");
            continue;
        }
        StayInfo stay;
        stay.patient_id = patient_id;
        // Admission is the first vital; when the stay recorded no vitals we
        // fall back to the logged admission time, which is t=0 by contract.
        stay.t_adm = std::isfinite(acc.first_vital) ? acc.first_vital : 0.0;
        stay.t_end = acc.last_event;
        stay.stay_hours = stay.t_end - stay.t_adm;
        if (stay.stay_hours < spec.dt_min_hours) {
            out.audit.push_back(patient_id + ": dropped, stay shorter than dt_min");
            continue;
        }
        if (stay.stay_hours > spec.dt_max_hours) {
            out.audit.push_back(patient_id + ": dropped, stay longer than dt_max");
            continue;
        }
        stay.label = label_stay(stay, deaths);
        out.stays.push_back(std::move(stay));
    }
    std::sort(out.audit.begin(), out.audit.end());
    return out;
}

int label_stay(const StayInfo& stay, const DeathTable& deaths) {
    auto it = deaths.find(stay.patient_id);
    if (it == deaths.end() || !it->second.has_value()) return 0;
    const double t = *it->second;
    return (t >= stay.t_adm && t <= stay.t_end) ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Gridding

double gap_marker() { return std::numeric_limits<double>::quiet_NaN(); }
bool is_gap(double v) { return std::isnan(v); }

Matrix resample(const std::vector<RawEvent>& stay_events, EventKind kind, double interval_hours,
                double t_adm, std::size_t rows) {
    if (interval_hours <= 0.0) throw ValidationError("resample: interval must be positive");
    const std::size_t features = kind == EventKind::vital ? kVitalsCount : kLabsCount;
    Matrix grid(rows, features, gap_marker());
    if (rows == 0) return grid;

    // bin -> values, per feature
    std::vector<std::map<std::size_t, std::vector<double>>> bins(features);
    for (const RawEvent& ev : stay_events) {
        if (ev.kind != kind) continue;
        const double rel = ev.t_rel_hours - t_adm;
        if (rel < 0.0) continue;
        std::size_t b = static_cast<std::size_t>(std::floor(rel / interval_hours));
        if (b >= rows) {
            // the stay's right endpoint belongs to the last bin
            if (rel <= rows * interval_hours) b = rows - 1;
            else continue;
        }
        bins[ev.feature][b].push_back(ev.value);
    }

    for (std::size_t f = 0; f < features; ++f) {
        for (auto& [b, values] : bins[f]) {
            std::sort(values.begin(), values.end());
            const std::size_t n = values.size();
            grid(b, f) = (n % 2 == 1) ? values[n / 2]
                                      : 0.5 * (values[n / 2 - 1] + values[n / 2]);
        }
    }
    return grid;
}

void impute(Matrix& grid) {
    for (std::size_t c = 0; c < grid.cols(); ++c) {
        std::size_t first = grid.rows();
        for (std::size_t r = 0; r < grid.rows(); ++r) {
            if (!is_gap(grid(r, c))) {
                first = r;
                break;
            }
        }
        if (first == grid.rows()) {
            for (std::size_t r = 0; r < grid.rows(); ++r) grid(r, c) = -1.0;
            continue;
        }
        for (std::size_t r = 0; r < first; ++r) grid(r, c) = grid(first, c);
        for (std::size_t r = first + 1; r < grid.rows(); ++r)
            if (is_gap(grid(r, c))) grid(r, c) = grid(r - 1, c);
    }
}

PatientRecord build_record(const std::vector<RawEvent>& stay_events, const StayInfo& stay,
                           const CohortSpec& spec) {
    PatientRecord rec;
    rec.patient_id = stay.patient_id;
    rec.label = stay.label;
    rec.stay_hours = stay.stay_hours;
    const auto rows_for = [&](double interval) {
        return static_cast<std::size_t>(std::ceil(stay.stay_hours / interval));
    };
    rec.vitals_grid = resample(stay_events, EventKind::vital, spec.vitals_interval_hours,
                               stay.t_adm, rows_for(spec.vitals_interval_hours));
    rec.labs_grid = resample(stay_events, EventKind::lab, spec.labs_interval_hours, stay.t_adm,
                             rows_for(spec.labs_interval_hours));
    impute(rec.vitals_grid);
    impute(rec.labs_grid);
    return rec;
}

Cohort build_cohort(const std::vector<RawEvent>& events, const DeathTable& deaths,
                    const CohortSpec& spec) {
    CohortSelection selection = select_cohort(events, deaths, spec);

    std::map<std::string, std::vector<RawEvent>> grouped;
    for (const RawEvent& ev : events) {
        if (ev.stay_seq != 1) continue;
        grouped[ev.patient_id].push_back(ev);
    }

    Cohort cohort;
    cohort.audit = std::move(selection.audit);
    for (const StayInfo& stay : selection.stays)
        cohort.records.push_back(build_record(grouped.at(stay.patient_id), stay, spec));
    // std::map iteration already gives patient_id order
    return cohort;
}

// ---------------------------------------------------------------------------
// Window slicing

WindowedSample slice_window(const PatientRecord& record, double dt_data_hours,
                            const CohortSpec& spec) {
    if (dt_data_hours > spec.dt_min_hours)
        throw ConfigError("slice_window: dt_data " + std::to_string(dt_data_hours) +
                          " exceeds cohort dt_min " + std::to_string(spec.dt_min_hours));
    const std::size_t v_steps =
        static_cast<std::size_t>(std::floor(dt_data_hours / spec.vitals_interval_hours));
    const std::size_t l_steps =
        static_cast<std::size_t>(std::floor(dt_data_hours / spec.labs_interval_hours));
    if (v_steps == 0 || l_steps == 0)
        throw ConfigError("slice_window: dt_data " + std::to_string(dt_data_hours) +
                          " yields an empty window");
    if (v_steps > record.vitals_grid.rows() || l_steps > record.labs_grid.rows())
        throw ValidationError("slice_window: record for " + record.patient_id +
                              " is shorter than the window");

    WindowedSample sample;
    sample.patient_id = record.patient_id;
    sample.label = record.label;
    sample.dt_pred_hours = record.stay_hours - dt_data_hours;
    sample.vitals = Matrix(v_steps, kVitalsCount);
    for (std::size_t r = 0; r < v_steps; ++r)
        for (std::size_t c = 0; c < kVitalsCount; ++c) sample.vitals(r, c) = record.vitals_grid(r, c);
    sample.labs = Matrix(l_steps, kLabsCount);
    for (std::size_t r = 0; r < l_steps; ++r)
        for (std::size_t c = 0; c < kLabsCount; ++c) sample.labs(r, c) = record.labs_grid(r, c);
    return sample;
}

WindowedDataset make_windowed_dataset(const Cohort& cohort, double dt_data_hours,
                                      const CohortSpec& spec) {
    WindowedDataset ds;
    ds.dt_data_hours = dt_data_hours;
    ds.vitals_steps =
        static_cast<std::size_t>(std::floor(dt_data_hours / spec.vitals_interval_hours));
    ds.labs_steps = static_cast<std::size_t>(std::floor(dt_data_hours / spec.labs_interval_hours));
    for (const PatientRecord& rec : cohort.records)
        ds.samples.push_back(slice_window(rec, dt_data_hours, spec));
    return ds;
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

void fit_feature_range(const Matrix& window, std::size_t feature, double& mn, double& mx,
                       bool& seen) {
    for (std::size_t r = 0; r < window.rows(); ++r) {
        const double v = window(r, feature);
        if (v == -1.0) continue;  // sentinel: never observed
        if (!seen) {
            mn = mx = v;
            seen = true;
        } else {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
    }
}

void apply_feature(Matrix& window, std::size_t feature, double mn, double mx) {
    const double range = mx - mn;
    for (std::size_t r = 0; r < window.rows(); ++r) {
        double& v = window(r, feature);
        if (v == -1.0) continue;
        v = range == 0.0 ? 0.0 : (v - mn) / range;
    }
}

}  // namespace

NormalizationStats fit_normalizer(const std::vector<const WindowedSample*>& samples) {
    NormalizationStats stats;
    stats.vitals_min.assign(kVitalsCount, 0.0);
    stats.vitals_max.assign(kVitalsCount, 0.0);
    stats.labs_min.assign(kLabsCount, 0.0);
    stats.labs_max.assign(kLabsCount, 0.0);

    for (std::size_t f = 0; f < kVitalsCount; ++f) {
        bool seen = false;
        for (const WindowedSample* s : samples)
            fit_feature_range(s->vitals, f, stats.vitals_min[f], stats.vitals_max[f], seen);
    }
    for (std::size_t f = 0; f < kLabsCount; ++f) {
        bool seen = false;
        for (const WindowedSample* s : samples)
            fit_feature_range(s->labs, f, stats.labs_min[f], stats.labs_max[f], seen);
    }
    return stats;
}

WindowedSample apply_normalizer(const NormalizationStats& stats, const WindowedSample& sample) {
    WindowedSample out = sample;
    for (std::size_t f = 0; f < kVitalsCount; ++f)
        apply_feature(out.vitals, f, stats.vitals_min[f], stats.vitals_max[f]);
    for (std::size_t f = 0; f < kLabsCount; ++f)
        apply_feature(out.labs, f, stats.labs_min[f], stats.labs_max[f]);
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

double parse_double(const std::string& s, const std::string& context, std::size_t line_no) {
    double value = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError(context + " line " + std::to_string(line_no) + ": bad number '" + s +
                          "'");
    return value;
}

int parse_int(const std::string& s, const std::string& context, std::size_t line_no) {
    int value = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError(context + " line " + std::to_string(line_no) + ": bad integer '" + s +
                          "'");
    return value;
}

std::string format_hours(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

std::vector<RawEvent> read_events_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open events file " + path);
    std::string line;
    if (!std::getline(f, line) || line != "patient_id,stay_seq,kind,feature,t_rel_hours,value")
        throw FormatError(path + " line 1: expected events header");

    std::vector<RawEvent> events;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 6)
            throw FormatError(path + " line " + std::to_string(line_no) + ": expected 6 fields");
        RawEvent ev;
        ev.patient_id = fields[0];
        ev.stay_seq = parse_int(fields[1], path, line_no);
        if (fields[2] == "vital") ev.kind = EventKind::vital;
        else if (fields[2] == "lab") ev.kind = EventKind::lab;
        else
            throw FormatError(path + " line " + std::to_string(line_no) + ": kind must be vital|lab");
        ev.feature = feature_index(ev.kind, fields[3]);
        ev.t_rel_hours = parse_double(fields[4], path, line_no);
        ev.value = parse_double(fields[5], path, line_no);
        events.push_back(std::move(ev));
    }
    return events;
}

void write_events_csv(const std::string& path, const std::vector<RawEvent>& events) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << "patient_id,stay_seq,kind,feature,t_rel_hours,value\n";
    for (const RawEvent& ev : events) {
        const std::string_view name = ev.kind == EventKind::vital
                                          ? vitals_feature_names()[ev.feature]
                                          : labs_feature_names()[ev.feature];
        f << ev.patient_id << ',' << ev.stay_seq << ','
          << (ev.kind == EventKind::vital ? "vital" : "lab") << ',' << name << ','
          << format_hours(ev.t_rel_hours) << ',' << format_value(ev.value) << '\n';
    }
    if (!f) throw FormatError("write failed for " + path);
}

DeathTable read_outcomes_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open outcomes file " + path);
    std::string line;
    if (!std::getline(f, line) || line != "patient_id,death_t_rel_hours")
        throw FormatError(path + " line 1: expected outcomes header");

    DeathTable deaths;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw FormatError(path + " line " + std::to_string(line_no) + ": expected 2 fields");
        if (fields[1].empty())
            deaths[fields[0]] = std::nullopt;
        else
            deaths[fields[0]] = parse_double(fields[1], path, line_no);
    }
    return deaths;
}

void write_outcomes_csv(const std::string& path, const std::vector<std::string>& patient_order,
                        const DeathTable& deaths) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << "patient_id,death_t_rel_hours\n";
    for (const std::string& id : patient_order) {
        f << id << ',';
        auto it = deaths.find(id);
        if (it != deaths.end() && it->second.has_value()) f << format_hours(*it->second);
        f << '\n';
    }
    if (!f) throw FormatError("write failed for " + path);
}

}  // namespace fedicu
