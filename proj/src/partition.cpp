#include "fedicu/partition.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "fedicu/errors.hpp"

namespace fedicu {

namespace {

using nlohmann::json;

void check_inputs(const std::vector<std::string>& ids, const std::vector<int>& labels,
                  std::size_t parts, const char* what) {
    if (ids.size() != labels.size())
        throw ValidationError(std::string(what) + ": ids and labels differ in length");
    if (parts == 0) throw ValidationError(std::string(what) + ": need at least one partition");
    if (parts > ids.size())
        throw ValidationError(std::string(what) + ": " + std::to_string(parts) +
                              " partitions requested for " + std::to_string(ids.size()) + " ids");
    for (int label : labels)
        if (label != 0 && label != 1)
            throw ValidationError(std::string(what) + ": labels must be 0 or 1");
}

// Shuffled per-class id lists, positives first. The shared deal cursor is
// what keeps total partition sizes within one of each other even though
// each class is balanced separately.
std::vector<std::vector<std::string>> deal_stratified(const std::vector<std::string>& ids,
                                                      const std::vector<int>& labels,
                                                      std::size_t parts, Rng& rng) {
    std::vector<std::string> positives, negatives;
    for (std::size_t i = 0; i < ids.size(); ++i)
        (labels[i] == 1 ? positives : negatives).push_back(ids[i]);
    rng.shuffle(positives);
    rng.shuffle(negatives);

    std::vector<std::vector<std::string>> parts_out(parts);
    std::size_t cursor = 0;
    for (const auto* cls : {&positives, &negatives})
        for (const std::string& id : *cls) parts_out[cursor++ % parts].push_back(id);
    return parts_out;
}

}  // namespace

std::vector<std::vector<std::string>> make_folds(const std::vector<std::string>& ids,
                                                 const std::vector<int>& labels, std::size_t folds,
                                                 std::uint64_t seed) {
    check_inputs(ids, labels, folds, "make_folds");
    Rng rng(seed);
    return deal_stratified(ids, labels, folds, rng);
}

std::vector<ClientSplit> make_client_splits(const std::vector<std::string>& ids,
                                            const std::vector<int>& labels, std::size_t clients,
                                            double val_fraction, std::uint64_t seed) {
    check_inputs(ids, labels, clients, "make_client_splits");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw ValidationError("make_client_splits: val_fraction outside [0,1)");

    Rng rng(seed);
    std::vector<std::vector<std::string>> assignment =
        deal_stratified(ids, labels, clients, rng);

    std::unordered_map<std::string, int> label_of;
    for (std::size_t i = 0; i < ids.size(); ++i) label_of[ids[i]] = labels[i];

    std::vector<ClientSplit> out(clients);
    for (std::size_t k = 0; k < clients; ++k) {
        std::vector<std::string> pos, neg;
        for (const std::string& id : assignment[k])
            (label_of[id] == 1 ? pos : neg).push_back(id);
        for (auto* cls : {&pos, &neg}) {
            rng.shuffle(*cls);
            const std::size_t val_count = static_cast<std::size_t>(
                std::llround(val_fraction * static_cast<double>(cls->size())));
            for (std::size_t i = 0; i < cls->size(); ++i)
                (i < val_count ? out[k].val : out[k].train).push_back((*cls)[i]);
        }
        std::size_t train_pos = 0;
        for (const std::string& id : out[k].train) train_pos += label_of[id] == 1 ? 1 : 0;
        if (train_pos == 0)
            std::cerr << "[fedicu] warning: client " << k
                      << " has no positive training samples; class weight degenerates\n";
    }
    return out;
}

SplitPlan make_split_plan(const std::vector<std::string>& ids, const std::vector<int>& labels,
                          std::size_t folds, std::size_t clients, double val_fraction,
                          std::uint64_t seed) {
    SplitPlan plan;
    plan.seed = seed;
    plan.fold_count = folds;
    plan.client_count = clients;

    // The fold assignment does not depend on K, so plans with different
    // client counts share identical test sets per fold.
    const auto fold_tests =
        make_folds(ids, labels, folds, derive_seed(seed, {seed_tag::folds}));

    std::unordered_map<std::string, int> label_of;
    for (std::size_t i = 0; i < ids.size(); ++i) label_of[ids[i]] = labels[i];

    for (std::size_t f = 0; f < folds; ++f) {
        std::unordered_map<std::string, bool> in_test;
        for (const std::string& id : fold_tests[f]) in_test[id] = true;
        std::vector<std::string> rest_ids;
        std::vector<int> rest_labels;
        for (const std::string& id : ids) {
            if (in_test.count(id)) continue;
            rest_ids.push_back(id);
            rest_labels.push_back(label_of[id]);
        }
        FoldPlan fold;
        fold.test = fold_tests[f];
        fold.clients = make_client_splits(rest_ids, rest_labels, clients, val_fraction,
                                          derive_seed(seed, {seed_tag::clients, f, clients}));
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

std::string split_plan_to_json(const SplitPlan& plan) {
    json j;
    j["seed"] = plan.seed;
    j["F"] = plan.fold_count;
    j["K"] = plan.client_count;
    j["folds"] = json::array();
    for (const FoldPlan& fold : plan.folds) {
        json jf;
        jf["test"] = fold.test;
        jf["clients"] = json::array();
        for (const ClientSplit& client : fold.clients)
            jf["clients"].push_back({{"train", client.train}, {"val", client.val}});
        j["folds"].push_back(std::move(jf));
    }
    return j.dump(2) + "\n";
}

SplitPlan split_plan_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("split plan: invalid json: ") + e.what());
    }
    try {
        SplitPlan plan;
        plan.seed = j.at("seed").get<std::uint64_t>();
        plan.fold_count = j.at("F").get<std::size_t>();
        plan.client_count = j.at("K").get<std::size_t>();
        for (const json& jf : j.at("folds")) {
            FoldPlan fold;
            fold.test = jf.at("test").get<std::vector<std::string>>();
            for (const json& jc : jf.at("clients")) {
                ClientSplit client;
                client.train = jc.at("train").get<std::vector<std::string>>();
                client.val = jc.at("val").get<std::vector<std::string>>();
                fold.clients.push_back(std::move(client));
            }
            plan.folds.push_back(std::move(fold));
        }
        if (plan.folds.size() != plan.fold_count)
            throw FormatError("split plan: fold count does not match folds array");
        return plan;
    } catch (const json::exception& e) {
        throw FormatError(std::string("split plan: missing or mistyped field: ") + e.what());
    }
}

void save_split_plan(const SplitPlan& plan, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << split_plan_to_json(plan);
    if (!f) throw FormatError("write failed for " + path);
}

SplitPlan load_split_plan(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open split plan " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return split_plan_from_json(text);
}

}  // namespace fedicu
