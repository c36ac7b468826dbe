#include "fedicu/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "fedicu/errors.hpp"

namespace fedicu {

void TrainConfig::validate() const {
    if (lr0 <= 0.0) throw ConfigError("TrainConfig: lr0 must be positive");
    if (lr_halving_every < 1) throw ConfigError("TrainConfig: lr_halving_every must be >= 1");
    if (max_epochs < 0) throw ConfigError("TrainConfig: max_epochs must be >= 0");
    if (patience < 1) throw ConfigError("TrainConfig: patience must be >= 1");
    if (batch_base < 1) throw ConfigError("TrainConfig: batch_base must be >= 1");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ConfigError("TrainConfig: threshold outside (0,1)");
}

void FlConfig::validate() const {
    if (clients < 1) throw ConfigError("FlConfig: need at least one client");
    if (local_epochs < 1) throw ConfigError("FlConfig: local_epochs must be >= 1");
    if (!(participation > 0.0 && participation <= 1.0))
        throw ConfigError("FlConfig: participation outside (0,1]");
    if (rounds_max < 0) throw ConfigError("FlConfig: rounds_max must be >= 0");
}

ClassWeights class_weights(const std::vector<int>& labels) {
    if (labels.empty()) throw ValidationError("class_weights: empty labels");
    const double n = static_cast<double>(labels.size());
    const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const double n_neg = n - n_pos;
    ClassWeights w;
    if (n_pos == 0.0) {
        std::cerr << "[fedicu] warning: class weights degenerate, no positive samples\n";
        w.w_pos = 0.0;
    } else {
        w.w_pos = n / n_pos;
    }
    if (n_neg == 0.0) {
        std::cerr << "[fedicu] warning: class weights degenerate, no negative samples\n";
        w.w_neg = 0.0;
    } else {
        w.w_neg = n / n_neg;
    }
    return w;
}

double lr_at(int epoch, const TrainConfig& config) {
    const int halvings = epoch / config.lr_halving_every;
    return config.lr0 * std::pow(0.5, static_cast<double>(halvings));
}

// ---------------------------------------------------------------------------
// TensorDataset

std::size_t TensorDataset::index_of(const std::string& id) const {
    const auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id)
        throw ValidationError("TensorDataset: unknown patient id " + id);
    return static_cast<std::size_t>(it - ids.begin());
}

ModelConfig TensorDataset::model_config(const ModelConfig& base) const {
    ModelConfig cfg = base;
    cfg.vitals_steps = vitals_steps;
    cfg.labs_steps = labs_steps;
    return cfg;
}

TensorDataset to_tensors(const WindowedDataset& windows) {
    TensorDataset out;
    out.dt_data_hours = windows.dt_data_hours;
    out.vitals_steps = windows.vitals_steps;
    out.labs_steps = windows.labs_steps;
    std::vector<const WindowedSample*> sorted;
    for (const WindowedSample& s : windows.samples) sorted.push_back(&s);
    std::sort(sorted.begin(), sorted.end(),
              [](const WindowedSample* a, const WindowedSample* b) {
                  return a->patient_id < b->patient_id;
              });
    for (const WindowedSample* s : sorted) {
        out.ids.push_back(s->patient_id);
        out.vitals.push_back(s->vitals);
        out.labs.push_back(s->labs);
        out.labels.push_back(s->label);
        out.dt_pred_hours.push_back(s->dt_pred_hours);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Logs

void RoundLog::add(int epoch, std::string phase, std::string client, std::string metric,
                   double value) {
    entries.push_back(RoundLogEntry{epoch, std::move(phase), std::move(client),
                                    std::move(metric), value});
}

void write_round_log_csv(const RoundLog& log, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << "epoch,phase,client,metric,value\n";
    char buf[64];
    for (const RoundLogEntry& e : log.entries) {
        std::snprintf(buf, sizeof(buf), "%.9g", e.value);
        f << e.epoch << ',' << e.phase << ',' << e.client << ',' << e.metric << ',' << buf
          << '\n';
    }
    if (!f) throw FormatError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Shared fitting machinery

namespace {

std::vector<std::size_t> resolve_indices(const TensorDataset& data,
                                         const std::vector<std::string>& ids) {
    std::vector<std::size_t> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) out.push_back(data.index_of(id));
    return out;
}

void assemble_batch(const TensorDataset& data, const std::vector<std::size_t>& idx,
                    std::size_t begin, std::size_t end, BatchSequence& vitals,
                    BatchSequence& labs, Matrix& labels) {
    const std::size_t batch = end - begin;
    vitals.assign(data.vitals_steps, Matrix(batch, kVitalsCount));
    labs.assign(data.labs_steps, Matrix(batch, kLabsCount));
    labels = Matrix(batch, 1);
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t p = idx[begin + b];
        for (std::size_t t = 0; t < data.vitals_steps; ++t)
            for (std::size_t f = 0; f < kVitalsCount; ++f)
                vitals[t](b, f) = data.vitals[p](t, f);
        for (std::size_t t = 0; t < data.labs_steps; ++t)
            for (std::size_t f = 0; f < kLabsCount; ++f) labs[t](b, f) = data.labs[p](t, f);
        labels(b, 0) = static_cast<double>(data.labels[p]);
    }
}

std::vector<double> infer_scores(Model& model, const TensorDataset& data,
                                 const std::vector<std::size_t>& idx) {
    // Inference in chunks so memory stays bounded on large pools.
    constexpr std::size_t kChunk = 1024;
    std::vector<double> scores;
    scores.reserve(idx.size());
    for (std::size_t begin = 0; begin < idx.size(); begin += kChunk) {
        const std::size_t end = std::min(begin + kChunk, idx.size());
        BatchSequence vitals, labs;
        Matrix labels;
        assemble_batch(data, idx, begin, end, vitals, labs, labels);
        Matrix risks = model.forward(vitals, labs, false);
        for (std::size_t b = 0; b < risks.rows(); ++b) scores.push_back(risks(b, 0));
    }
    return scores;
}

std::vector<int> gather_labels(const TensorDataset& data, const std::vector<std::size_t>& idx) {
    std::vector<int> labels;
    labels.reserve(idx.size());
    for (std::size_t p : idx) labels.push_back(data.labels[p]);
    return labels;
}

double validation_score(Model& model, const TensorDataset& data,
                        const std::vector<std::size_t>& val_idx, const TrainConfig& config) {
    const std::vector<double> scores = infer_scores(model, data, val_idx);
    const std::vector<int> labels = gather_labels(data, val_idx);
    if (config.es_metric == EsMetric::f1)
        return confusion_at(scores, labels, config.threshold).f1;
    Matrix pred(scores.size(), 1), truth(scores.size(), 1), unit(scores.size(), 1, 1.0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        pred(i, 0) = scores[i];
        truth(i, 0) = static_cast<double>(labels[i]);
    }
    return bce_loss(pred, truth, unit).loss;
}

// One epoch of minibatch gradient descent over `train_idx`, shuffled with
// `shuffle_seed`. Returns the size-weighted mean training loss.
double run_epoch(Model& model, const TensorDataset& data, std::vector<std::size_t>& train_idx,
                 const ClassWeights& weights, const TrainConfig& config, std::size_t batch_size,
                 double lr, AdamState& adam, std::uint64_t shuffle_seed, int epoch,
                 const std::string& who) {
    Rng shuffle_rng(shuffle_seed);
    shuffle_rng.shuffle(train_idx);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < train_idx.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, train_idx.size());
        BatchSequence vitals, labs;
        Matrix labels;
        assemble_batch(data, train_idx, begin, end, vitals, labs, labels);
        Matrix sample_weights(labels.rows(), 1);
        for (std::size_t b = 0; b < labels.rows(); ++b)
            sample_weights(b, 0) = labels(b, 0) == 1.0 ? weights.w_pos : weights.w_neg;

        try {
            ModelCache cache;
            Matrix risks = model.forward_cached(vitals, labs, true, cache);
            BceResult bce = bce_loss(risks, labels, sample_weights);
            ModelGrads grads = model.backward(cache, bce.pred_grad);
            std::vector<ParamRef> refs = model.trainable_refs(grads);
            if (config.optimizer == TrainConfig::Optimizer::adam)
                adam_step(refs, adam, lr);
            else
                sgd_step(refs, lr);
            loss_sum += bce.loss * static_cast<double>(end - begin);
            seen += end - begin;
        } catch (const NumericError& e) {
            throw NumericError(who + ": aborted at epoch " + std::to_string(epoch) +
                               ", batch starting at " + std::to_string(begin) + ", lr " +
                               std::to_string(lr) + ": " + e.what());
        }
    }
    return seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
}

MetricsReport test_report_for(Model& model, const TensorDataset& data,
                              const std::vector<std::size_t>& test_idx,
                              const TrainConfig& config) {
    const std::vector<double> scores = infer_scores(model, data, test_idx);
    const std::vector<int> labels = gather_labels(data, test_idx);
    return evaluate_scores(scores, labels, config.threshold);
}

double mean_dt_pred(const TensorDataset& data, const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t p : idx) acc += data.dt_pred_hours[p];
    return acc / static_cast<double>(idx.size());
}

// A single centralized-style fit over one train/val pool. Used directly by
// CML and per client by LML.
TrainResult fit_single(const TensorDataset& data, const std::vector<std::size_t>& train,
                       const std::vector<std::size_t>& val,
                       const std::vector<std::size_t>& test, const ModelConfig& base,
                       const TrainConfig& config, std::size_t batch_size,
                       std::uint64_t client_stream, const std::string& who,
                       const TrainHooks* hooks) {
    config.validate();
    const ModelConfig model_cfg = data.model_config(base);
    Rng init_rng(derive_seed(config.seed, {seed_tag::model_init, client_stream}));
    Model model(model_cfg, init_rng);

    const ClassWeights weights = class_weights(gather_labels(data, train));
    std::vector<std::size_t> train_order = train;
    AdamState adam;
    EsMonitor monitor(config.es_metric, static_cast<std::size_t>(config.patience));
    const ParamVector initial = model.get_params();

    TrainResult result;
    const std::string client_tag = std::to_string(client_stream);
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        const double lr = lr_at(epoch, config);
        const double train_loss = run_epoch(
            model, data, train_order, weights, config, batch_size, lr, adam,
            derive_seed(config.seed, {seed_tag::shuffle, client_stream,
                                      static_cast<std::uint64_t>(epoch)}),
            epoch, who);
        const double score = validation_score(model, data, val, config);

        result.log.add(epoch, "train", client_tag, "lr", lr);
        result.log.add(epoch, "train", client_tag, "loss", train_loss);
        result.log.add(epoch, "val", client_tag,
                       config.es_metric == EsMetric::f1 ? "f1" : "loss", score);
        result.epochs_run = static_cast<std::size_t>(epoch) + 1;
        if (hooks && hooks->after_epoch) hooks->after_epoch(epoch, model.get_params());

        if (monitor.update(score, model.get_params()) == EsAction::stop) break;
    }

    if (config.max_epochs == 0 || monitor.epochs_seen() == 0) {
        result.best_params = initial;
        result.best_epoch = 0;
        result.best_score = 0.0;
    } else {
        result.best_params = monitor.best_params();
        result.best_epoch = monitor.best_epoch();
        result.best_score = monitor.best_score();
    }

    model.set_params(result.best_params);
    result.test_report = test_report_for(model, data, test, config);
    result.dt_pred_mean_hours = mean_dt_pred(data, test);
    result.log.add(static_cast<int>(result.best_epoch), "test", client_tag, "auroc",
                   result.test_report.auroc);
    result.log.add(static_cast<int>(result.best_epoch), "test", client_tag, "auprc",
                   result.test_report.auprc);
    return result;
}

}  // namespace

// ---------------------------------------------------------------------------
// CML

TrainResult train_cml(const TensorDataset& data, const FoldPlan& fold, const ModelConfig& base,
                      const TrainConfig& config, const TrainHooks* hooks) {
    std::vector<std::string> train_ids, val_ids;
    for (const ClientSplit& client : fold.clients) {
        train_ids.insert(train_ids.end(), client.train.begin(), client.train.end());
        val_ids.insert(val_ids.end(), client.val.begin(), client.val.end());
    }
    return fit_single(data, resolve_indices(data, train_ids), resolve_indices(data, val_ids),
                      resolve_indices(data, fold.test), base, config,
                      static_cast<std::size_t>(config.batch_base), 0, "cml", hooks);
}

// ---------------------------------------------------------------------------
// LML

std::vector<TrainResult> train_lml(const TensorDataset& data, const FoldPlan& fold,
                                   const ModelConfig& base, const TrainConfig& config,
                                   const TrainHooks* hooks) {
    const std::size_t clients = fold.clients.size();
    if (clients == 0) throw ValidationError("train_lml: fold has no clients");
    const std::size_t batch_size =
        std::max<std::size_t>(1, static_cast<std::size_t>(config.batch_base) / clients);

    std::vector<TrainResult> results;
    const std::vector<std::size_t> test = resolve_indices(data, fold.test);
    for (std::size_t k = 0; k < clients; ++k) {
        results.push_back(fit_single(data, resolve_indices(data, fold.clients[k].train),
                                     resolve_indices(data, fold.clients[k].val), test, base,
                                     config, batch_size, k, "lml client " + std::to_string(k),
                                     hooks));
    }
    return results;
}

// ---------------------------------------------------------------------------
// FL

ParamVector aggregate(const std::vector<ParamVector>& params,
                      const std::vector<std::size_t>& sizes) {
    if (params.empty() || params.size() != sizes.size())
        throw ValidationError("aggregate: params and sizes must be non-empty and equal length");
    double total = 0.0;
    for (std::size_t s : sizes) total += static_cast<double>(s);
    if (total == 0.0) throw ValidationError("aggregate: total size is zero");

    ParamVector out;
    out.layout = params[0].layout;
    out.values.assign(params[0].values.size(), 0.0);
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!params[k].same_layout(out))
            throw LayoutError("aggregate: client " + std::to_string(k) +
                              " has a mismatched parameter layout");
        const double w = static_cast<double>(sizes[k]) / total;
        for (std::size_t i = 0; i < out.values.size(); ++i)
            out.values[i] += w * params[k].values[i];
    }
    for (double v : out.values)
        if (!std::isfinite(v)) throw NumericError("aggregate: non-finite aggregated parameter");
    return out;
}

TrainResult train_fl(const TensorDataset& data, const FoldPlan& fold, const ModelConfig& base,
                     const TrainConfig& config, const FlConfig& fl, const TrainHooks* hooks) {
    config.validate();
    fl.validate();
    const std::size_t clients = fold.clients.size();
    if (clients != fl.clients)
        throw ValidationError("train_fl: fold has " + std::to_string(clients) +
                              " clients, FlConfig expects " + std::to_string(fl.clients));
    const std::size_t batch_size =
        std::max<std::size_t>(1, static_cast<std::size_t>(config.batch_base) / clients);

    const ModelConfig model_cfg = data.model_config(base);
    Rng init_rng(derive_seed(config.seed, {seed_tag::model_init, 0}));
    Model model(model_cfg, init_rng);  // one instance reused for every client
    ParamVector global = model.get_params();
    const ParamVector initial = global;

    // Per-client data and class weights (local by default).
    std::vector<std::vector<std::size_t>> train_idx(clients), val_idx(clients);
    std::vector<std::size_t> client_sizes(clients);
    std::vector<ClassWeights> weights(clients);
    std::vector<int> pooled_labels;
    for (std::size_t k = 0; k < clients; ++k) {
        train_idx[k] = resolve_indices(data, fold.clients[k].train);
        val_idx[k] = resolve_indices(data, fold.clients[k].val);
        client_sizes[k] = train_idx[k].size() + val_idx[k].size();
        const std::vector<int> local_labels = gather_labels(data, train_idx[k]);
        pooled_labels.insert(pooled_labels.end(), local_labels.begin(), local_labels.end());
        weights[k] = class_weights(local_labels);
    }
    if (config.global_class_weights) {
        const ClassWeights pooled = class_weights(pooled_labels);
        for (std::size_t k = 0; k < clients; ++k) weights[k] = pooled;
    }

    EsMonitor monitor(config.es_metric, static_cast<std::size_t>(config.patience));
    TrainResult result;

    for (int round = 0; round < fl.rounds_max; ++round) {
        const double lr = lr_at(round, config);

        // Client selection: everyone when C=1, otherwise a seeded sample
        // without replacement; aggregation order stays ascending.
        std::vector<std::size_t> participants(clients);
        std::iota(participants.begin(), participants.end(), 0);
        if (fl.participation < 1.0) {
            const std::size_t m = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::floor(fl.participation *
                                                       static_cast<double>(clients))));
            Rng pick(derive_seed(config.seed,
                                 {seed_tag::participation, static_cast<std::uint64_t>(round)}));
            pick.shuffle(participants);
            participants.resize(m);
            std::sort(participants.begin(), participants.end());
        }

        std::vector<ParamVector> updated;
        std::vector<std::size_t> updated_sizes;
        for (std::size_t k : participants) {
            model.set_params(global);
            AdamState adam;  // fresh optimizer state each round
            for (int le = 0; le < fl.local_epochs; ++le) {
                const int global_epoch = round * fl.local_epochs + le;
                const double train_loss = run_epoch(
                    model, data, train_idx[k], weights[k], config, batch_size, lr, adam,
                    derive_seed(config.seed, {seed_tag::shuffle, k,
                                              static_cast<std::uint64_t>(global_epoch)}),
                    global_epoch, "fl client " + std::to_string(k));
                result.log.add(round, "train", std::to_string(k), "loss", train_loss);
            }
            updated.push_back(model.get_params());
            updated_sizes.push_back(client_sizes[k]);
        }

        global = aggregate(updated, updated_sizes);
        result.log.add(round, "train", "global", "lr", lr);
        if (hooks && hooks->after_epoch) hooks->after_epoch(round, global);

        // Every client evaluates the broadcast model on its validation set.
        std::vector<double> scores(clients);
        for (std::size_t k = 0; k < clients; ++k) {
            model.set_params(global);
            scores[k] = validation_score(model, data, val_idx[k], config);
            result.log.add(round, "val", std::to_string(k),
                           config.es_metric == EsMetric::f1 ? "f1" : "loss", scores[k]);
        }
        const double global_score = fl_es_score(scores, client_sizes);
        result.log.add(round, "val", "global",
                       config.es_metric == EsMetric::f1 ? "f1" : "loss", global_score);
        result.epochs_run = static_cast<std::size_t>(round) + 1;

        if (monitor.update(global_score, global) == EsAction::stop) break;
    }

    if (fl.rounds_max == 0 || monitor.epochs_seen() == 0) {
        result.best_params = initial;
        result.best_epoch = 0;
    } else {
        result.best_params = monitor.best_params();
        result.best_epoch = monitor.best_epoch();
        result.best_score = monitor.best_score();
    }

    model.set_params(result.best_params);
    const std::vector<std::size_t> test = resolve_indices(data, fold.test);
    result.test_report = test_report_for(model, data, test, config);
    result.dt_pred_mean_hours = mean_dt_pred(data, test);
    result.log.add(static_cast<int>(result.best_epoch), "test", "global", "auroc",
                   result.test_report.auroc);
    result.log.add(static_cast<int>(result.best_epoch), "test", "global", "auprc",
                   result.test_report.auprc);
    return result;
}

}  // namespace fedicu
