#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fedicu/nn.hpp"
#include "fedicu/params.hpp"
#include "fedicu/rng.hpp"

namespace fedicu {

struct ModelConfig {
    std::size_t vitals_features = 7;
    std::size_t labs_features = 16;
    std::size_t hidden = 16;
    std::size_t gru_layers_per_branch = 3;
    std::array<std::size_t, 2> dense_sizes = {16, 1};
    std::size_t vitals_steps = 24;
    std::size_t labs_steps = 3;
    double bn_momentum = 0.99;
    double bn_epsilon = 1e-3;

    void validate() const;
};

struct BranchParams {
    std::vector<GruLayerParams> layers;
    BatchNormParams bn;
};

struct BranchGrads {
    std::vector<GruLayerGrads> layers;
    Matrix gamma_grad, beta_grad;
};

struct ModelGrads {
    BranchGrads vitals, labs;
    DenseGrads dense1, dense2;
};

struct BranchCache {
    std::vector<GruCache> layer_caches;
    std::vector<std::size_t> step_counts;
    BatchNormCache bn_cache;
};

struct ModelCache {
    BranchCache vitals, labs;
    Matrix tanh_out;
    DenseCache dense1_cache, dense2_cache;
    Matrix risks;
    std::size_t batch = 0;
};

// Dual-branch recurrent mortality classifier: a stack of GRU layers per
// input stream, batch normalization of each branch's final hidden state,
// concatenation, a tanh dense layer, and a sigmoid risk head.
class Model {
public:
    Model(const ModelConfig& config, Rng& rng);

    // vitals: vitals_steps matrices of [patients × vitals_features];
    // labs: labs_steps matrices of [patients × labs_features].
    // Train mode updates batch-norm running statistics.
    Matrix forward(const BatchSequence& vitals, const BatchSequence& labs, bool train);
    Matrix forward_cached(const BatchSequence& vitals, const BatchSequence& labs, bool train,
                          ModelCache& cache);

    // risk_grad is dL/drisk from the loss.
    ModelGrads backward(const ModelCache& cache, const Matrix& risk_grad);

    ModelGrads zero_grads() const;

    // Optimizer views over the trainable tensors (running stats excluded),
    // in the same canonical order as the ParamVector layout.
    std::vector<ParamRef> trainable_refs(const ModelGrads& grads);

    ParamVector get_params() const;
    void set_params(const ParamVector& params);

    const ModelConfig& config() const { return config_; }

private:
    void branch_forward(BranchParams& branch, const BatchSequence& inputs, bool train,
                        BranchCache& cache, Matrix& final_state, Matrix& bn_out);
    BranchGrads branch_backward(const BranchParams& branch, const BranchCache& cache,
                                const Matrix& bn_upstream);

    ModelConfig config_;
    BranchParams vitals_, labs_;
    DenseParams dense1_, dense2_;
};

}  // namespace fedicu
