#include "fedicu/model.hpp"

#include <cstring>

#include "fedicu/errors.hpp"

namespace fedicu {

void ModelConfig::validate() const {
    if (vitals_features == 0 || labs_features == 0)
        throw ValidationError("ModelConfig: feature counts must be positive");
    if (vitals_steps == 0 || labs_steps == 0)
        throw ValidationError("ModelConfig: zero-length input sequence");
    if (hidden == 0 || gru_layers_per_branch == 0)
        throw ValidationError("ModelConfig: hidden size and layer count must be positive");
    if (dense_sizes[0] == 0 || dense_sizes[1] != 1)
        throw ValidationError("ModelConfig: dense head must end in a single output");
    if (bn_momentum <= 0.0 || bn_momentum >= 1.0)
        throw ValidationError("ModelConfig: bn_momentum outside (0,1)");
}

Model::Model(const ModelConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    auto build_branch = [&](std::size_t features) {
        BranchParams branch;
        std::size_t in = features;
        for (std::size_t i = 0; i < config_.gru_layers_per_branch; ++i) {
            branch.layers.push_back(GruLayerParams::init(rng, in, config_.hidden));
            in = config_.hidden;
        }
        branch.bn = BatchNormParams::init(config_.hidden, config_.bn_momentum, config_.bn_epsilon);
        return branch;
    };
    vitals_ = build_branch(config_.vitals_features);
    labs_ = build_branch(config_.labs_features);
    dense1_ = DenseParams::init(rng, 2 * config_.hidden, config_.dense_sizes[0]);
    dense2_ = DenseParams::init(rng, config_.dense_sizes[0], config_.dense_sizes[1]);
}

void Model::branch_forward(BranchParams& branch, const BatchSequence& inputs, bool train,
                           BranchCache& cache, Matrix& final_state, Matrix& bn_out) {
    const std::size_t batch = inputs.empty() ? 0 : inputs[0].rows();
    Matrix h0(batch, config_.hidden);
    const BatchSequence* seq = &inputs;
    BatchSequence next;
    for (const GruLayerParams& layer : branch.layers) {
        GruForwardResult res = gru_forward(layer, *seq, h0);
        cache.step_counts.push_back(res.hidden.size());
        cache.layer_caches.push_back(std::move(res.cache));
        next = std::move(res.hidden);
        seq = &next;
    }
    final_state = next.back();
    bn_out = batchnorm_forward(branch.bn, final_state, train, cache.bn_cache);
}

Matrix Model::forward(const BatchSequence& vitals, const BatchSequence& labs, bool train) {
    ModelCache cache;
    return forward_cached(vitals, labs, train, cache);
}

Matrix Model::forward_cached(const BatchSequence& vitals, const BatchSequence& labs, bool train,
                             ModelCache& cache) {
    if (vitals.size() != config_.vitals_steps)
        throw DimensionError("forward: vitals batch has " + std::to_string(vitals.size()) +
                             " steps, config expects " + std::to_string(config_.vitals_steps));
    if (labs.size() != config_.labs_steps)
        throw DimensionError("forward: labs batch has " + std::to_string(labs.size()) +
                             " steps, config expects " + std::to_string(config_.labs_steps));
    const std::size_t batch = vitals[0].rows();
    if (labs[0].rows() != batch)
        throw ValidationError("forward: vitals batch has " + std::to_string(batch) +
                              " patients, labs has " + std::to_string(labs[0].rows()));

    cache.batch = batch;
    Matrix v_final, v_norm, l_final, l_norm;
    branch_forward(vitals_, vitals, train, cache.vitals, v_final, v_norm);
    branch_forward(labs_, labs, train, cache.labs, l_final, l_norm);

    Matrix concat(batch, 2 * config_.hidden);
    for (std::size_t r = 0; r < batch; ++r) {
        for (std::size_t c = 0; c < config_.hidden; ++c) {
            concat(r, c) = v_norm(r, c);
            concat(r, config_.hidden + c) = l_norm(r, c);
        }
    }

    Matrix a1 = dense_forward(dense1_, concat, cache.dense1_cache);
    cache.tanh_out = tanh_forward(a1);
    Matrix logits = dense_forward(dense2_, cache.tanh_out, cache.dense2_cache);
    cache.risks = sigmoid_forward(logits);
    require_finite(cache.risks, "model forward risks");
    return cache.risks;
}

BranchGrads Model::branch_backward(const BranchParams& branch, const BranchCache& cache,
                                   const Matrix& bn_upstream) {
    BranchGrads grads;
    BatchNormBackwardResult bn = batchnorm_backward(branch.bn, cache.bn_cache, bn_upstream);
    grads.gamma_grad = std::move(bn.gamma_grad);
    grads.beta_grad = std::move(bn.beta_grad);

    // Only the last hidden state feeds the head; deeper layers receive the
    // full sequence gradient from the layer above.
    const std::size_t layer_count = branch.layers.size();
    grads.layers.resize(layer_count);
    BatchSequence upstream;
    const std::size_t top = layer_count - 1;
    const std::size_t batch = bn.input_grad.rows();
    upstream.assign(cache.step_counts[top], Matrix(batch, config_.hidden));
    upstream.back() = std::move(bn.input_grad);
    for (std::size_t li = layer_count; li-- > 0;) {
        GruBackwardResult res = gru_backward(branch.layers[li], cache.layer_caches[li], upstream);
        grads.layers[li] = std::move(res.grads);
        upstream = std::move(res.input_grads);
    }
    return grads;
}

ModelGrads Model::backward(const ModelCache& cache, const Matrix& risk_grad) {
    if (cache.batch == 0 || risk_grad.rows() != cache.batch)
        throw ValidationError("backward: cache does not match the gradient batch");

    ModelGrads grads;
    Matrix dlogits = sigmoid_backward(cache.risks, risk_grad);
    DenseBackwardResult d2 = dense_backward(dense2_, cache.dense2_cache, dlogits);
    grads.dense2 = std::move(d2.grads);
    Matrix da1 = tanh_backward(cache.tanh_out, d2.input_grad);
    DenseBackwardResult d1 = dense_backward(dense1_, cache.dense1_cache, da1);
    grads.dense1 = std::move(d1.grads);

    const std::size_t hidden = config_.hidden;
    Matrix dv(cache.batch, hidden), dl(cache.batch, hidden);
    for (std::size_t r = 0; r < cache.batch; ++r) {
        for (std::size_t c = 0; c < hidden; ++c) {
            dv(r, c) = d1.input_grad(r, c);
            dl(r, c) = d1.input_grad(r, hidden + c);
        }
    }
    grads.vitals = branch_backward(vitals_, cache.vitals, dv);
    grads.labs = branch_backward(labs_, cache.labs, dl);
    return grads;
}

ModelGrads Model::zero_grads() const {
    ModelGrads grads;
    auto zero_branch = [&](const BranchParams& branch) {
        BranchGrads g;
        for (const GruLayerParams& layer : branch.layers)
            g.layers.push_back(GruLayerParams::zeros(layer.input_size(), layer.hidden_size()));
        g.gamma_grad = Matrix(1, config_.hidden);
        g.beta_grad = Matrix(1, config_.hidden);
        return g;
    };
    grads.vitals = zero_branch(vitals_);
    grads.labs = zero_branch(labs_);
    grads.dense1.W = Matrix(dense1_.W.rows(), dense1_.W.cols());
    grads.dense1.b = Matrix(1, dense1_.b.cols());
    grads.dense2.W = Matrix(dense2_.W.rows(), dense2_.W.cols());
    grads.dense2.b = Matrix(1, dense2_.b.cols());
    return grads;
}

namespace {

// Canonical traversal shared by get_params/set_params/trainable_refs. The
// callback sees every tensor with its layout name; `trainable_only` skips
// batch-norm running statistics.
template <typename Branch, typename Dense, typename Fn>
void visit_params(Branch& vitals, Branch& labs, Dense& dense1, Dense& dense2, bool trainable_only,
                  Fn&& fn) {
    auto visit_branch = [&](Branch& branch, const std::string& prefix) {
        for (std::size_t i = 0; i < branch.layers.size(); ++i) {
            const std::string base = prefix + ".gru" + std::to_string(i) + ".";
            auto& layer = branch.layers[i];
            fn(base + "w_z", layer.W_z);
            fn(base + "w_r", layer.W_r);
            fn(base + "w_h", layer.W_h);
            fn(base + "u_z", layer.U_z);
            fn(base + "u_r", layer.U_r);
            fn(base + "u_h", layer.U_h);
            fn(base + "b_z", layer.b_z);
            fn(base + "b_r", layer.b_r);
            fn(base + "b_h", layer.b_h);
        }
        fn(prefix + ".bn.gamma", branch.bn.gamma);
        fn(prefix + ".bn.beta", branch.bn.beta);
        if (!trainable_only) {
            fn(prefix + ".bn.running_mean", branch.bn.running_mean);
            fn(prefix + ".bn.running_var", branch.bn.running_var);
        }
    };
    visit_branch(vitals, "vitals");
    visit_branch(labs, "labs");
    fn("head.dense1.w", dense1.W);
    fn("head.dense1.b", dense1.b);
    fn("head.dense2.w", dense2.W);
    fn("head.dense2.b", dense2.b);
}

}  // namespace

std::vector<ParamRef> Model::trainable_refs(const ModelGrads& grads) {
    std::vector<std::string> names;
    std::vector<Matrix*> values;
    visit_params(vitals_, labs_, dense1_, dense2_, /*trainable_only=*/true,
                 [&](const std::string& name, Matrix& m) {
                     names.push_back(name);
                     values.push_back(&m);
                 });

    // Gradient tensors in the same canonical order as the visit above.
    std::vector<const Matrix*> grad_ptrs;
    auto collect_branch = [&](const BranchGrads& g) {
        for (const GruLayerGrads& layer : g.layers) {
            grad_ptrs.push_back(&layer.W_z);
            grad_ptrs.push_back(&layer.W_r);
            grad_ptrs.push_back(&layer.W_h);
            grad_ptrs.push_back(&layer.U_z);
            grad_ptrs.push_back(&layer.U_r);
            grad_ptrs.push_back(&layer.U_h);
            grad_ptrs.push_back(&layer.b_z);
            grad_ptrs.push_back(&layer.b_r);
            grad_ptrs.push_back(&layer.b_h);
        }
        grad_ptrs.push_back(&g.gamma_grad);
        grad_ptrs.push_back(&g.beta_grad);
    };
    collect_branch(grads.vitals);
    collect_branch(grads.labs);
    grad_ptrs.push_back(&grads.dense1.W);
    grad_ptrs.push_back(&grads.dense1.b);
    grad_ptrs.push_back(&grads.dense2.W);
    grad_ptrs.push_back(&grads.dense2.b);

    std::vector<ParamRef> refs;
    for (std::size_t i = 0; i < values.size(); ++i)
        refs.push_back(ParamRef{names[i], values[i], grad_ptrs[i]});
    return refs;
}

ParamVector Model::get_params() const {
    ParamVector out;
    visit_params(vitals_, labs_, dense1_, dense2_, false,
                 [&](const std::string& name, const Matrix& m) {
                     out.layout.push_back(ParamShape{name, m.rows(), m.cols()});
                     out.values.insert(out.values.end(), m.data(), m.data() + m.size());
                 });
    return out;
}

void Model::set_params(const ParamVector& params) {
    ParamVector expected;
    visit_params(vitals_, labs_, dense1_, dense2_, false,
                 [&](const std::string& name, const Matrix& m) {
                     expected.layout.push_back(ParamShape{name, m.rows(), m.cols()});
                 });
    if (params.layout != expected.layout)
        throw LayoutError("set_params: parameter layout does not match this model");
    if (params.values.size() != params.total_size())
        throw LayoutError("set_params: values length does not match layout");

    std::size_t offset = 0;
    visit_params(vitals_, labs_, dense1_, dense2_, false, [&](const std::string&, Matrix& m) {
        std::memcpy(m.data(), params.values.data() + offset, m.size() * sizeof(double));
        offset += m.size();
    });
}

}  // namespace fedicu
