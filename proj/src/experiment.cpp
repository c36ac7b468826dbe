#include "fedicu/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fedicu/errors.hpp"
#include "fedicu/synthetic.hpp"

namespace fedicu {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_dt(double dt) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", dt);
    return buf;
}

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string test_set_hash(const std::vector<std::string>& test_ids) {
    std::vector<std::string> sorted = test_ids;
    std::sort(sorted.begin(), sorted.end());
    std::string joined;
    for (const std::string& id : sorted) {
        joined += id;
        joined += '\n';
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(joined)));
    return buf;
}

int paradigm_order(const std::string& p) {
    if (p == "cml") return 0;
    if (p == "fl") return 1;
    return 2;
}

bool unit_less(const GridPoint& a, const GridPoint& b) {
    const auto ka = std::make_tuple(paradigm_order(a.paradigm), a.clients, a.dt_data_hours,
                                    a.es == EsMetric::f1, a.fold);
    const auto kb = std::make_tuple(paradigm_order(b.paradigm), b.clients, b.dt_data_hours,
                                    b.es == EsMetric::f1, b.fold);
    return ka < kb;
}

bool row_less(const ResultRow& a, const ResultRow& b) {
    const auto ka = std::make_tuple(paradigm_order(a.paradigm), a.clients, a.dt_data_hours,
                                    a.es_metric, a.fold);
    const auto kb = std::make_tuple(paradigm_order(b.paradigm), b.clients, b.dt_data_hours,
                                    b.es_metric, b.fold);
    return ka < kb;
}

json row_to_json(const ResultRow& r) {
    return json{{"paradigm", r.paradigm},
                {"clients", r.clients},
                {"dt_data_h", r.dt_data_hours},
                {"es_metric", r.es_metric},
                {"fold", r.fold},
                {"auroc", r.auroc},
                {"auprc", r.auprc},
                {"precision", r.precision},
                {"recall", r.recall},
                {"f1", r.f1},
                {"dt_pred_mean_h", r.dt_pred_mean_hours}};
}

ResultRow row_from_json(const json& j) {
    ResultRow r;
    r.paradigm = j.at("paradigm").get<std::string>();
    r.clients = j.at("clients").get<std::size_t>();
    r.dt_data_hours = j.at("dt_data_h").get<double>();
    r.es_metric = j.at("es_metric").get<std::string>();
    r.fold = j.at("fold").get<std::size_t>();
    r.auroc = j.at("auroc").get<double>();
    r.auprc = j.at("auprc").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.dt_pred_mean_hours = j.at("dt_pred_mean_h").get<double>();
    return r;
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << "paradigm,clients,dt_data_h,es_metric,fold,auroc,auprc,precision,recall,f1,"
         "dt_pred_mean_h\n";
    for (const ResultRow& r : rows) {
        f << r.paradigm << ',' << r.clients << ',' << format_dt(r.dt_data_hours) << ','
          << r.es_metric << ',' << r.fold << ',' << format_metric(r.auroc) << ','
          << format_metric(r.auprc) << ',' << format_metric(r.precision) << ','
          << format_metric(r.recall) << ',' << format_metric(r.f1) << ','
          << format_metric(r.dt_pred_mean_hours) << '\n';
    }
    if (!f) throw FormatError("write failed for " + path);
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open results file " + path);
    std::string line;
    if (!std::getline(f, line) ||
        line != "paradigm,clients,dt_data_h,es_metric,fold,auroc,auprc,precision,recall,f1,"
                "dt_pred_mean_h")
        throw FormatError(path + ": unexpected results header");
    std::vector<ResultRow> rows;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 11)
            throw FormatError(path + " line " + std::to_string(line_no) + ": expected 11 fields");
        ResultRow r;
        r.paradigm = fields[0];
        r.clients = static_cast<std::size_t>(std::stoul(fields[1]));
        r.dt_data_hours = std::stod(fields[2]);
        r.es_metric = fields[3];
        r.fold = static_cast<std::size_t>(std::stoul(fields[4]));
        r.auroc = std::stod(fields[5]);
        r.auprc = std::stod(fields[6]);
        r.precision = std::stod(fields[7]);
        r.recall = std::stod(fields[8]);
        r.f1 = std::stod(fields[9]);
        r.dt_pred_mean_hours = std::stod(fields[10]);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace

std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow>& rows) {
    std::map<std::tuple<int, std::size_t, double, std::string>, std::vector<const ResultRow*>>
        groups;
    for (const ResultRow& r : rows)
        groups[{paradigm_order(r.paradigm), r.clients, r.dt_data_hours, r.es_metric}].push_back(
            &r);

    auto mean_std = [](const std::vector<double>& xs) {
        const double n = static_cast<double>(xs.size());
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= n;
        if (xs.size() < 2) return std::make_pair(mean, 0.0);
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        return std::make_pair(mean, std::sqrt(ss / (n - 1.0)));  // F-1 denominator
    };

    std::vector<AggregateRow> out;
    for (const auto& [key, members] : groups) {
        AggregateRow agg;
        agg.paradigm = members[0]->paradigm;
        agg.clients = members[0]->clients;
        agg.dt_data_hours = members[0]->dt_data_hours;
        agg.es_metric = members[0]->es_metric;
        agg.fold_count = members.size();
        std::vector<double> auroc_v, auprc_v, prec_v, rec_v, f1_v, dtp_v;
        for (const ResultRow* r : members) {
            auroc_v.push_back(r->auroc);
            auprc_v.push_back(r->auprc);
            prec_v.push_back(r->precision);
            rec_v.push_back(r->recall);
            f1_v.push_back(r->f1);
            dtp_v.push_back(r->dt_pred_mean_hours);
        }
        std::tie(agg.auroc_mean, agg.auroc_std) = mean_std(auroc_v);
        std::tie(agg.auprc_mean, agg.auprc_std) = mean_std(auprc_v);
        std::tie(agg.precision_mean, agg.precision_std) = mean_std(prec_v);
        std::tie(agg.recall_mean, agg.recall_std) = mean_std(rec_v);
        std::tie(agg.f1_mean, agg.f1_std) = mean_std(f1_v);
        agg.dt_pred_mean_hours = mean_std(dtp_v).first;
        out.push_back(std::move(agg));
    }
    return out;
}

std::string GridPoint::key() const {
    return paradigm + "_K" + std::to_string(clients) + "_dt" + format_dt(dt_data_hours) + "_" +
           es_metric_name(es) + "_fold" + std::to_string(fold);
}

std::vector<GridPoint> resolve_grid(const ExperimentConfig& config) {
    std::vector<GridPoint> units;
    for (const std::string& paradigm : config.paradigms) {
        const std::vector<std::size_t> ks =
            paradigm == "cml" ? std::vector<std::size_t>{1} : config.client_counts;
        for (std::size_t k : ks)
            for (double dt : config.dt_data_hours)
                for (EsMetric es : config.es_metrics)
                    for (std::size_t fold = 0; fold < config.folds; ++fold)
                        units.push_back(GridPoint{paradigm, k, dt, es, fold});
    }
    std::sort(units.begin(), units.end(), unit_less);
    return units;
}

ExperimentOutput run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    const std::size_t jobs = options.jobs_override > 0 ? options.jobs_override : config.jobs;

    // Resolve the grid first so a dry run never touches data or disk.
    const std::vector<GridPoint> units = resolve_grid(config);

    if (options.dry_run) {
        std::cout << "resolved grid: " << units.size() << " runs\n";
        for (const GridPoint& u : units) std::cout << "  " << u.key() << "\n";
        return {};
    }

    // Data: synthetic generation or CSV ingestion, then the shared pipeline.
    std::vector<RawEvent> events;
    DeathTable deaths;
    if (config.source == ExperimentConfig::DataSource::synthetic) {
        SyntheticParams sp;
        sp.seed = config.seed;
        sp.n_patients = config.n_patients;
        sp.death_rate = config.death_rate;
        sp.cohort = config.cohort;
        sp.drift_strength = config.drift_strength;
        SyntheticCohort synth = generate_synthetic_cohort(sp);
        events = std::move(synth.events);
        deaths = std::move(synth.deaths);
    } else {
        events = read_events_csv(config.events_path);
        deaths = read_outcomes_csv(config.outcomes_path);
    }

    const Cohort cohort = build_cohort(events, deaths, config.cohort);
    events.clear();
    events.shrink_to_fit();
    if (cohort.records.size() < config.folds)
        throw ValidationError("cohort has fewer patients than folds");

    std::vector<std::string> ids;
    std::vector<int> labels;
    for (const PatientRecord& rec : cohort.records) {
        ids.push_back(rec.patient_id);
        labels.push_back(rec.label);
    }

    const fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir / "rows");
    fs::create_directories(out_dir / "logs");
    fs::create_directories(out_dir / "checkpoints");

    // Split plans: the K=1 plan is the canonical fold assignment; per-K
    // plans share its test sets by construction.
    std::map<std::size_t, SplitPlan> plans;
    std::vector<std::size_t> needed_ks = {1};
    for (const GridPoint& u : units)
        if (!std::count(needed_ks.begin(), needed_ks.end(), u.clients))
            needed_ks.push_back(u.clients);
    std::sort(needed_ks.begin(), needed_ks.end());
    for (std::size_t k : needed_ks) {
        plans[k] = make_split_plan(ids, labels, config.folds, k, config.val_fraction,
                                   config.seed);
        const std::string name = k == 1 ? "splits.json" : "splits_K" + std::to_string(k) + ".json";
        save_split_plan(plans[k], (out_dir / name).string());
    }
    const SplitPlan& canonical = plans.at(1);

    // Normalized tensors per (dt, fold): statistics are fitted on the
    // fold's combined train+validation pool and applied everywhere.
    std::map<std::pair<double, std::size_t>, TensorDataset> tensors;
    for (double dt : config.dt_data_hours) {
        const WindowedDataset windows = make_windowed_dataset(cohort, dt, config.cohort);
        for (std::size_t fold = 0; fold < config.folds; ++fold) {
            std::unordered_map<std::string, bool> in_test;
            for (const std::string& id : canonical.folds[fold].test) in_test[id] = true;
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
            tensors[{dt, fold}] = to_tensors(normalized);
        }
    }

    // Unit execution, optionally across threads. Each unit is seeded purely
    // by its grid coordinates, so scheduling cannot change any result.
    std::vector<ResultRow> rows(units.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> completed{0};
    std::mutex io_mutex;
    std::vector<std::string> failures;

    auto paradigm_code = [](const std::string& p) -> std::uint64_t {
        return p == "cml" ? 1 : p == "fl" ? 2 : 3;
    };

    auto run_unit = [&](std::size_t ui) {
        const GridPoint& unit = units[ui];
        const std::string key = unit.key();
        const fs::path row_path = out_dir / "rows" / (key + ".json");

        if (options.resume && fs::exists(row_path)) {
            std::ifstream f(row_path);
            json j = json::parse(f, nullptr, false);
            if (!j.is_discarded()) {
                rows[ui] = row_from_json(j);
                completed.fetch_add(1);
                if (!options.quiet) {
                    std::lock_guard<std::mutex> lock(io_mutex);
                    std::cout << "[" << completed.load() << "/" << units.size() << "] " << key
                              << " (resumed)\n";
                }
                return;
            }
        }

        const TensorDataset& data = tensors.at({unit.dt_data_hours, unit.fold});
        const FoldPlan& fold_plan = plans.at(unit.clients).folds[unit.fold];

        TrainConfig tc = config.train;
        tc.es_metric = unit.es;
        tc.seed = derive_seed(config.seed,
                              {seed_tag::unit, unit.fold, paradigm_code(unit.paradigm),
                               unit.clients, static_cast<std::uint64_t>(
                                                 std::llround(unit.dt_data_hours * 1000.0)),
                               unit.es == EsMetric::f1 ? 1ULL : 0ULL});

        const auto started = std::chrono::steady_clock::now();
        ResultRow row;
        row.paradigm = unit.paradigm;
        row.clients = unit.clients;
        row.dt_data_hours = unit.dt_data_hours;
        row.es_metric = es_metric_name(unit.es);
        row.fold = unit.fold;

        ModelConfig base;
        if (unit.paradigm == "cml") {
            TrainResult r = train_cml(data, fold_plan, base, tc);
            row.auroc = r.test_report.auroc;
            row.auprc = r.test_report.auprc;
            row.precision = r.test_report.precision;
            row.recall = r.test_report.recall;
            row.f1 = r.test_report.f1;
            row.dt_pred_mean_hours = r.dt_pred_mean_hours;
            save_params(r.best_params, (out_dir / "checkpoints" / (key + ".fmp")).string());
            write_round_log_csv(r.log, (out_dir / "logs" / (key + ".csv")).string());
        } else if (unit.paradigm == "fl") {
            FlConfig flc = config.fl;
            flc.clients = unit.clients;
            TrainResult r = train_fl(data, fold_plan, base, tc, flc);
            row.auroc = r.test_report.auroc;
            row.auprc = r.test_report.auprc;
            row.precision = r.test_report.precision;
            row.recall = r.test_report.recall;
            row.f1 = r.test_report.f1;
            row.dt_pred_mean_hours = r.dt_pred_mean_hours;
            save_params(r.best_params, (out_dir / "checkpoints" / (key + ".fmp")).string());
            write_round_log_csv(r.log, (out_dir / "logs" / (key + ".csv")).string());
        } else {
            std::vector<TrainResult> rs = train_lml(data, fold_plan, base, tc);
            double auroc_acc = 0, auprc_acc = 0, prec_acc = 0, rec_acc = 0, f1_acc = 0,
                   dtp_acc = 0;
            for (std::size_t k = 0; k < rs.size(); ++k) {
                auroc_acc += rs[k].test_report.auroc;
                auprc_acc += rs[k].test_report.auprc;
                prec_acc += rs[k].test_report.precision;
                rec_acc += rs[k].test_report.recall;
                f1_acc += rs[k].test_report.f1;
                dtp_acc += rs[k].dt_pred_mean_hours;
                save_params(rs[k].best_params,
                            (out_dir / "checkpoints" /
                             (key + "_client" + std::to_string(k) + ".fmp")).string());
                write_round_log_csv(rs[k].log,
                                    (out_dir / "logs" /
                                     (key + "_client" + std::to_string(k) + ".csv")).string());
            }
            const double kn = static_cast<double>(rs.size());
            row.auroc = auroc_acc / kn;
            row.auprc = auprc_acc / kn;
            row.precision = prec_acc / kn;
            row.recall = rec_acc / kn;
            row.f1 = f1_acc / kn;
            row.dt_pred_mean_hours = dtp_acc / kn;
        }

        {
            std::ofstream f(row_path, std::ios::trunc);
            f << row_to_json(row).dump(2) << "\n";
        }
        rows[ui] = row;
        completed.fetch_add(1);
        if (!options.quiet) {
            const double secs = std::chrono::duration<double>(
                                    std::chrono::steady_clock::now() - started)
                                    .count();
            std::lock_guard<std::mutex> lock(io_mutex);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "auroc=%.3f auprc=%.3f (%.1fs)", row.auroc,
                          row.auprc, secs);
            std::cout << "[" << completed.load() << "/" << units.size() << "] " << key << " "
                      << buf << "\n";
        }
    };

    auto worker = [&]() {
        while (true) {
            const std::size_t ui = next.fetch_add(1);
            if (ui >= units.size()) return;
            try {
                run_unit(ui);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(io_mutex);
                failures.push_back(units[ui].key() + ": " + e.what());
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (!failures.empty()) {
        std::string msg = "some runs failed (completed rows kept for --resume):";
        for (const std::string& f : failures) msg += "\n  " + f;
        throw Error(msg);
    }

    ExperimentOutput output;
    output.rows = rows;
    std::sort(output.rows.begin(), output.rows.end(), row_less);
    output.aggregates = aggregate_rows(output.rows);

    write_results_csv((out_dir / "results.csv").string(), output.rows);

    json results_json;
    results_json["seed"] = config.seed;
    results_json["folds"] = config.folds;
    results_json["cohort_patients"] = cohort.records.size();
    results_json["cohort_deaths"] = std::count(labels.begin(), labels.end(), 1);
    results_json["dropped"] = cohort.audit.size();
    results_json["test_id_hashes"] = json::array();
    for (std::size_t fold = 0; fold < config.folds; ++fold)
        results_json["test_id_hashes"].push_back(
            {{"fold", fold}, {"hash", test_set_hash(canonical.folds[fold].test)}});
    results_json["rows"] = json::array();
    for (const ResultRow& r : output.rows) results_json["rows"].push_back(row_to_json(r));
    results_json["aggregates"] = json::array();
    for (const AggregateRow& a : output.aggregates) {
        results_json["aggregates"].push_back(
            {{"paradigm", a.paradigm},
             {"clients", a.clients},
             {"dt_data_h", a.dt_data_hours},
             {"es_metric", a.es_metric},
             {"folds", a.fold_count},
             {"auroc", {{"mean", a.auroc_mean}, {"std", a.auroc_std}}},
             {"auprc", {{"mean", a.auprc_mean}, {"std", a.auprc_std}}},
             {"precision", {{"mean", a.precision_mean}, {"std", a.precision_std}}},
             {"recall", {{"mean", a.recall_mean}, {"std", a.recall_std}}},
             {"f1", {{"mean", a.f1_mean}, {"std", a.f1_std}}},
             {"dt_pred_mean_h", a.dt_pred_mean_hours}});
    }
    {
        std::ofstream f(out_dir / "results.json", std::ios::trunc);
        if (!f) throw FormatError("cannot open results.json for writing");
        f << results_json.dump(2) << "\n";
    }
    return output;
}

void summarize_results(const std::string& results_dir, std::ostream& out) {
    const fs::path dir(results_dir);
    const fs::path csv = dir / "results.csv";
    if (!fs::exists(csv))
        throw ValidationError("no results.csv found in " + results_dir);
    const std::vector<ResultRow> rows = read_results_csv(csv.string());
    if (rows.empty()) throw ValidationError(csv.string() + " contains no result rows");

    const std::vector<AggregateRow> aggs = aggregate_rows(rows);

    std::ostringstream md;
    md << "| paradigm | clients | dt_data_h | es | folds | auroc | auprc | f1 | precision | "
          "recall |\n";
    md << "|---|---|---|---|---|---|---|---|---|---|\n";
    auto cell = [](double mean, double sd) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", mean, sd);
        return std::string(buf);
    };
    for (const AggregateRow& a : aggs) {
        md << "| " << a.paradigm << " | " << a.clients << " | " << format_dt(a.dt_data_hours)
           << " | " << a.es_metric << " | " << a.fold_count
           << (a.fold_count == 1 ? " (single fold, std 0)" : "") << " | "
           << cell(a.auroc_mean, a.auroc_std) << " | " << cell(a.auprc_mean, a.auprc_std)
           << " | " << cell(a.f1_mean, a.f1_std) << " | "
           << cell(a.precision_mean, a.precision_std) << " | "
           << cell(a.recall_mean, a.recall_std) << " |\n";
    }

    const std::string table = md.str();
    out << table;
    std::ofstream f(dir / "summary.md", std::ios::trunc);
    if (!f) throw FormatError("cannot open summary.md for writing");
    f << table;
}

GenDataCounts gen_data(const ExperimentConfig& config, const std::string& out_dir) {
    if (config.source != ExperimentConfig::DataSource::synthetic)
        throw ConfigError("gen-data requires data.source = synthetic");
    SyntheticParams sp;
    sp.seed = config.seed;
    sp.n_patients = config.n_patients;
    sp.death_rate = config.death_rate;
    sp.cohort = config.cohort;
    sp.drift_strength = config.drift_strength;
    const SyntheticCohort synth = generate_synthetic_cohort(sp);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    write_events_csv((dir / "events.csv").string(), synth.events);
    write_outcomes_csv((dir / "outcomes.csv").string(), synth.patient_order, synth.deaths);

    GenDataCounts counts;
    counts.patients = synth.patient_order.size();
    counts.events = synth.events.size();
    counts.deaths = synth.death_count;
    return counts;
}

}  // namespace fedicu
