#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedicu/rng.hpp"

namespace fedicu {

struct ClientSplit {
    std::vector<std::string> train, val;
};

struct FoldPlan {
    std::vector<std::string> test;
    std::vector<ClientSplit> clients;
};

// F-fold × K-client assignment of patient ids. Within a fold the test set
// and every client's train/val sets partition the full id list; every id is
// tested exactly once across folds.
struct SplitPlan {
    std::uint64_t seed = 0;
    std::size_t fold_count = 0;
    std::size_t client_count = 0;
    std::vector<FoldPlan> folds;
};

// Stratified folds: ids are shuffled within class and dealt round-robin
// with a cursor that carries across classes, so both the per-class counts
// and the total fold sizes differ by at most one.
std::vector<std::vector<std::string>> make_folds(const std::vector<std::string>& ids,
                                                 const std::vector<int>& labels, std::size_t folds,
                                                 std::uint64_t seed);

// K stratified equal partitions, each split stratified into train/val.
// A client whose training set has no positives is kept with a warning.
std::vector<ClientSplit> make_client_splits(const std::vector<std::string>& ids,
                                            const std::vector<int>& labels, std::size_t clients,
                                            double val_fraction, std::uint64_t seed);

SplitPlan make_split_plan(const std::vector<std::string>& ids, const std::vector<int>& labels,
                          std::size_t folds, std::size_t clients, double val_fraction,
                          std::uint64_t seed);

std::string split_plan_to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const std::string& text);
void save_split_plan(const SplitPlan& plan, const std::string& path);
SplitPlan load_split_plan(const std::string& path);

}  // namespace fedicu
