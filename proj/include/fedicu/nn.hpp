#pragma once

#include <string>
#include <vector>

#include "fedicu/matrix.hpp"
#include "fedicu/rng.hpp"

namespace fedicu {

// A batch sequence holds one [batch × features] matrix per timestep.
using BatchSequence = std::vector<Matrix>;

// Glorot-uniform initialization: uniform in ±sqrt(6/(rows+cols)).
Matrix glorot_init(Rng& rng, std::size_t rows, std::size_t cols);

// ---------------------------------------------------------------------------
// GRU layer

struct GruLayerParams {
    Matrix W_z, W_r, W_h;  // input -> hidden
    Matrix U_z, U_r, U_h;  // hidden -> hidden
    Matrix b_z, b_r, b_h;  // 1 × hidden

    std::size_t input_size() const { return W_z.rows(); }
    std::size_t hidden_size() const { return W_z.cols(); }

    static GruLayerParams init(Rng& rng, std::size_t input, std::size_t hidden);
    static GruLayerParams zeros(std::size_t input, std::size_t hidden);
};

// Mirrors GruLayerParams member for member.
using GruLayerGrads = GruLayerParams;

struct GruCache {
    BatchSequence inputs;        // x_t
    std::vector<Matrix> h_prev;  // h_{t-1} per step (h_prev[0] == h0)
    std::vector<Matrix> z, r, h_cand;
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
};

struct GruForwardResult {
    BatchSequence hidden;  // h_t per step
    GruCache cache;
};

// Gated recurrence in the form
//   z_t = σ(x_t W_z + h_{t-1} U_z + b_z)
//   r_t = σ(x_t W_r + h_{t-1} U_r + b_r)
//   h̃_t = tanh(x_t W_h + (r_t ⊙ h_{t-1}) U_h + b_h)
//   h_t = z_t ⊙ h_{t-1} + (1 - z_t) ⊙ h̃_t
GruForwardResult gru_forward(const GruLayerParams& params, const BatchSequence& inputs,
                             const Matrix& h0);

struct GruBackwardResult {
    GruLayerGrads grads;
    BatchSequence input_grads;  // dL/dx_t per step
    Matrix h0_grad;
};

// upstream[t] is dL/dh_t (zero matrices where the loss does not read h_t).
GruBackwardResult gru_backward(const GruLayerParams& params, const GruCache& cache,
                               const BatchSequence& upstream);

// ---------------------------------------------------------------------------
// Dense layer

struct DenseParams {
    Matrix W;  // in × out
    Matrix b;  // 1 × out

    static DenseParams init(Rng& rng, std::size_t in, std::size_t out);
};

using DenseGrads = DenseParams;

struct DenseCache {
    Matrix input;
};

// y = x W + b
Matrix dense_forward(const DenseParams& params, const Matrix& input, DenseCache& cache);

struct DenseBackwardResult {
    DenseGrads grads;
    Matrix input_grad;
};

DenseBackwardResult dense_backward(const DenseParams& params, const DenseCache& cache,
                                   const Matrix& upstream);

// ---------------------------------------------------------------------------
// Batch normalization (over the batch dimension, per feature column)

struct BatchNormParams {
    Matrix gamma, beta;               // 1 × features
    Matrix running_mean, running_var; // 1 × features
    double momentum = 0.99;
    double epsilon = 1e-3;

    std::size_t features() const { return gamma.cols(); }

    static BatchNormParams init(std::size_t features, double momentum = 0.99,
                                double epsilon = 1e-3);
};

struct BatchNormCache {
    Matrix x_hat;     // normalized input
    Matrix inv_std;   // 1 × features
    bool train_mode = false;
};

// Train mode normalizes with batch statistics (population variance) and
// updates the running statistics in place; inference mode is a pure function
// of the running statistics. Training on a single-row batch is rejected.
Matrix batchnorm_forward(BatchNormParams& params, const Matrix& input, bool train,
                         BatchNormCache& cache);

struct BatchNormBackwardResult {
    Matrix gamma_grad, beta_grad;  // 1 × features
    Matrix input_grad;
};

BatchNormBackwardResult batchnorm_backward(const BatchNormParams& params,
                                           const BatchNormCache& cache, const Matrix& upstream);

// ---------------------------------------------------------------------------
// Pointwise activations

Matrix sigmoid_forward(const Matrix& input);
// `output` is the value returned by sigmoid_forward.
Matrix sigmoid_backward(const Matrix& output, const Matrix& upstream);

Matrix tanh_forward(const Matrix& input);
Matrix tanh_backward(const Matrix& output, const Matrix& upstream);

// ---------------------------------------------------------------------------
// Weighted binary cross-entropy

struct BceResult {
    double loss = 0.0;
    Matrix pred_grad;  // dL/dp, same shape as predictions
};

// loss = (1/n) Σ w_i · -[y_i log p_i + (1-y_i) log(1-p_i)], with p clamped
// to [1e-12, 1-1e-12] before the logs. Labels must be exactly 0 or 1.
BceResult bce_loss(const Matrix& predictions, const Matrix& labels, const Matrix& sample_weights);

// ---------------------------------------------------------------------------
// Optimizers

// A named view into one trainable tensor and its gradient.
struct ParamRef {
    std::string name;
    Matrix* value = nullptr;
    const Matrix* grad = nullptr;
};

struct AdamState {
    std::vector<Matrix> m, v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Standard bias-corrected update; state is allocated lazily on first use and
// must keep the same layout afterwards. Non-finite gradients are rejected
// with the parameter's name.
void adam_step(std::vector<ParamRef>& params, AdamState& state, double lr);

// p ← p − lr·g
void sgd_step(std::vector<ParamRef>& params, double lr);

}  // namespace fedicu
