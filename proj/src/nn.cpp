#include "fedicu/nn.hpp"

#include <cmath>

#include "fedicu/errors.hpp"

namespace fedicu {

namespace {

inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void add_row_inplace(Matrix& m, const Matrix& row) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) += row(0, c);
    }
}

void accumulate(Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

}  // namespace

Matrix glorot_init(Rng& rng, std::size_t rows, std::size_t cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = rng.uniform(-bound, bound);
    return out;
}

// ---------------------------------------------------------------------------
// GRU

GruLayerParams GruLayerParams::init(Rng& rng, std::size_t input, std::size_t hidden) {
    GruLayerParams p;
    p.W_z = glorot_init(rng, input, hidden);
    p.W_r = glorot_init(rng, input, hidden);
    p.W_h = glorot_init(rng, input, hidden);
    p.U_z = glorot_init(rng, hidden, hidden);
    p.U_r = glorot_init(rng, hidden, hidden);
    p.U_h = glorot_init(rng, hidden, hidden);
    p.b_z = Matrix(1, hidden);
    p.b_r = Matrix(1, hidden);
    p.b_h = Matrix(1, hidden);
    return p;
}

GruLayerParams GruLayerParams::zeros(std::size_t input, std::size_t hidden) {
    GruLayerParams p;
    p.W_z = Matrix(input, hidden);
    p.W_r = Matrix(input, hidden);
    p.W_h = Matrix(input, hidden);
    p.U_z = Matrix(hidden, hidden);
    p.U_r = Matrix(hidden, hidden);
    p.U_h = Matrix(hidden, hidden);
    p.b_z = Matrix(1, hidden);
    p.b_r = Matrix(1, hidden);
    p.b_h = Matrix(1, hidden);
    return p;
}

GruForwardResult gru_forward(const GruLayerParams& params, const BatchSequence& inputs,
                             const Matrix& h0) {
    if (inputs.empty()) throw ValidationError("gru_forward: empty input sequence");
    const std::size_t in = params.input_size();
    const std::size_t hidden = params.hidden_size();
    if (h0.cols() != hidden)
        throw DimensionError("gru_forward: h0 has " + std::to_string(h0.cols()) +
                             " cols, expected hidden size " + std::to_string(hidden));

    GruForwardResult result;
    result.cache.input_size = in;
    result.cache.hidden_size = hidden;
    Matrix h = h0;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        const Matrix& x = inputs[t];
        if (x.cols() != in)
            throw DimensionError("gru_forward: inputs[" + std::to_string(t) + "] has " +
                                 std::to_string(x.cols()) + " cols, expected input size " +
                                 std::to_string(in));
        if (x.rows() != h.rows())
            throw DimensionError("gru_forward: inputs[" + std::to_string(t) +
                                 "] batch size differs from h0");

        Matrix az = matmul(x, params.W_z);
        accumulate(az, matmul(h, params.U_z));
        add_row_inplace(az, params.b_z);
        Matrix ar = matmul(x, params.W_r);
        accumulate(ar, matmul(h, params.U_r));
        add_row_inplace(ar, params.b_r);

        Matrix z(az.rows(), az.cols());
        Matrix r(ar.rows(), ar.cols());
        for (std::size_t i = 0; i < z.size(); ++i) {
            z.data()[i] = sigmoid_scalar(az.data()[i]);
            r.data()[i] = sigmoid_scalar(ar.data()[i]);
        }

        Matrix rh(h.rows(), hidden);
        for (std::size_t i = 0; i < rh.size(); ++i) rh.data()[i] = r.data()[i] * h.data()[i];

        Matrix ah = matmul(x, params.W_h);
        accumulate(ah, matmul(rh, params.U_h));
        add_row_inplace(ah, params.b_h);
        Matrix h_cand(ah.rows(), ah.cols());
        for (std::size_t i = 0; i < h_cand.size(); ++i) h_cand.data()[i] = std::tanh(ah.data()[i]);

        Matrix h_next(h.rows(), hidden);
        for (std::size_t i = 0; i < h_next.size(); ++i) {
            h_next.data()[i] = z.data()[i] * h.data()[i] + (1.0 - z.data()[i]) * h_cand.data()[i];
        }

        result.cache.inputs.push_back(x);
        result.cache.h_prev.push_back(h);
        result.cache.z.push_back(std::move(z));
        result.cache.r.push_back(std::move(r));
        result.cache.h_cand.push_back(std::move(h_cand));
        result.hidden.push_back(h_next);
        h = std::move(h_next);
    }
    return result;
}

GruBackwardResult gru_backward(const GruLayerParams& params, const GruCache& cache,
                               const BatchSequence& upstream) {
    const std::size_t steps = cache.inputs.size();
    if (steps == 0 || cache.input_size != params.input_size() ||
        cache.hidden_size != params.hidden_size()) {
        throw ValidationError("gru_backward: cache does not match these layer parameters");
    }
    if (upstream.size() != steps)
        throw ValidationError("gru_backward: upstream has " + std::to_string(upstream.size()) +
                              " steps, cache has " + std::to_string(steps));

    const std::size_t hidden = cache.hidden_size;
    GruBackwardResult out;
    out.grads = GruLayerParams::zeros(cache.input_size, hidden);
    out.input_grads.assign(steps, Matrix());

    const std::size_t batch = cache.inputs[0].rows();
    Matrix dh(batch, hidden);  // dL/dh_t accumulated across time

    for (std::size_t ti = steps; ti-- > 0;) {
        if (!upstream[ti].same_shape(dh))
            throw DimensionError("gru_backward: upstream[" + std::to_string(ti) +
                                 "] has the wrong shape");
        accumulate(dh, upstream[ti]);

        const Matrix& x = cache.inputs[ti];
        const Matrix& h_prev = cache.h_prev[ti];
        const Matrix& z = cache.z[ti];
        const Matrix& r = cache.r[ti];
        const Matrix& h_cand = cache.h_cand[ti];

        // h = z⊙h_prev + (1-z)⊙h̃
        Matrix da_z(batch, hidden), da_h(batch, hidden);
        Matrix dh_prev(batch, hidden);
        for (std::size_t i = 0; i < dh.size(); ++i) {
            const double g = dh.data()[i];
            const double zi = z.data()[i];
            const double hc = h_cand.data()[i];
            const double hp = h_prev.data()[i];
            da_z.data()[i] = g * (hp - hc) * zi * (1.0 - zi);
            da_h.data()[i] = g * (1.0 - zi) * (1.0 - hc * hc);
            dh_prev.data()[i] = g * zi;
        }

        // candidate path: a_h = x W_h + (r⊙h_prev) U_h + b_h
        Matrix rh(batch, hidden);
        for (std::size_t i = 0; i < rh.size(); ++i) rh.data()[i] = r.data()[i] * h_prev.data()[i];
        accumulate(out.grads.W_h, matmul_tn(x, da_h));
        accumulate(out.grads.U_h, matmul_tn(rh, da_h));
        accumulate(out.grads.b_h, col_sums(da_h));
        Matrix drh = matmul_nt(da_h, params.U_h);
        Matrix da_r(batch, hidden);
        for (std::size_t i = 0; i < drh.size(); ++i) {
            const double ri = r.data()[i];
            dh_prev.data()[i] += drh.data()[i] * ri;
            da_r.data()[i] = drh.data()[i] * h_prev.data()[i] * ri * (1.0 - ri);
        }

        // gate paths
        accumulate(out.grads.W_z, matmul_tn(x, da_z));
        accumulate(out.grads.U_z, matmul_tn(h_prev, da_z));
        accumulate(out.grads.b_z, col_sums(da_z));
        accumulate(out.grads.W_r, matmul_tn(x, da_r));
        accumulate(out.grads.U_r, matmul_tn(h_prev, da_r));
        accumulate(out.grads.b_r, col_sums(da_r));

        accumulate(dh_prev, matmul_nt(da_z, params.U_z));
        accumulate(dh_prev, matmul_nt(da_r, params.U_r));

        Matrix dx = matmul_nt(da_z, params.W_z);
        accumulate(dx, matmul_nt(da_r, params.W_r));
        accumulate(dx, matmul_nt(da_h, params.W_h));
        out.input_grads[ti] = std::move(dx);

        dh = std::move(dh_prev);
    }
    out.h0_grad = std::move(dh);
    return out;
}

// ---------------------------------------------------------------------------
// Dense

DenseParams DenseParams::init(Rng& rng, std::size_t in, std::size_t out) {
    DenseParams p;
    p.W = glorot_init(rng, in, out);
    p.b = Matrix(1, out);
    return p;
}

Matrix dense_forward(const DenseParams& params, const Matrix& input, DenseCache& cache) {
    if (params.b.cols() != params.W.cols())
        throw DimensionError("dense_forward: bias width does not match W");
    Matrix out = matmul(input, params.W);
    add_row_inplace(out, params.b);
    cache.input = input;
    return out;
}

DenseBackwardResult dense_backward(const DenseParams& params, const DenseCache& cache,
                                   const Matrix& upstream) {
    if (upstream.cols() != params.W.cols())
        throw DimensionError("dense_backward: upstream width does not match W");
    DenseBackwardResult out;
    out.grads.W = matmul_tn(cache.input, upstream);
    out.grads.b = col_sums(upstream);
    out.input_grad = matmul_nt(upstream, params.W);
    return out;
}

// ---------------------------------------------------------------------------
// Batch norm

BatchNormParams BatchNormParams::init(std::size_t features, double momentum, double epsilon) {
    BatchNormParams p;
    p.gamma = Matrix(1, features, 1.0);
    p.beta = Matrix(1, features);
    p.running_mean = Matrix(1, features);
    p.running_var = Matrix(1, features, 1.0);
    p.momentum = momentum;
    p.epsilon = epsilon;
    return p;
}

Matrix batchnorm_forward(BatchNormParams& params, const Matrix& input, bool train,
                         BatchNormCache& cache) {
    const std::size_t features = params.features();
    if (input.cols() != features)
        throw DimensionError("batchnorm_forward: input has " + std::to_string(input.cols()) +
                             " features, expected " + std::to_string(features));

    const std::size_t n = input.rows();
    cache.train_mode = train;
    Matrix mean(1, features), var(1, features);
    if (train) {
        if (n < 2)
            throw ValidationError("batchnorm_forward: training batch of size " +
                                  std::to_string(n) + " is degenerate");
        for (std::size_t c = 0; c < features; ++c) {
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r) s += input(r, c);
            mean(0, c) = s / static_cast<double>(n);
        }
        for (std::size_t c = 0; c < features; ++c) {
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                const double d = input(r, c) - mean(0, c);
                s += d * d;
            }
            var(0, c) = s / static_cast<double>(n);
        }
        for (std::size_t c = 0; c < features; ++c) {
            params.running_mean(0, c) =
                params.momentum * params.running_mean(0, c) + (1.0 - params.momentum) * mean(0, c);
            params.running_var(0, c) =
                params.momentum * params.running_var(0, c) + (1.0 - params.momentum) * var(0, c);
        }
    } else {
        mean = params.running_mean;
        var = params.running_var;
    }

    cache.inv_std = Matrix(1, features);
    for (std::size_t c = 0; c < features; ++c)
        cache.inv_std(0, c) = 1.0 / std::sqrt(var(0, c) + params.epsilon);

    cache.x_hat = Matrix(n, features);
    Matrix out(n, features);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < features; ++c) {
            const double xh = (input(r, c) - mean(0, c)) * cache.inv_std(0, c);
            cache.x_hat(r, c) = xh;
            out(r, c) = params.gamma(0, c) * xh + params.beta(0, c);
        }
    }
    return out;
}

BatchNormBackwardResult batchnorm_backward(const BatchNormParams& params,
                                           const BatchNormCache& cache, const Matrix& upstream) {
    if (!cache.train_mode)
        throw ValidationError("batchnorm_backward: cache was built in inference mode");
    require_same_shape(upstream, cache.x_hat, "batchnorm_backward upstream");

    const std::size_t n = cache.x_hat.rows();
    const std::size_t features = cache.x_hat.cols();
    BatchNormBackwardResult out;
    out.beta_grad = col_sums(upstream);
    out.gamma_grad = Matrix(1, features);
    Matrix mean_dy(1, features), mean_dy_xhat(1, features);
    for (std::size_t c = 0; c < features; ++c) {
        double sg = 0.0;
        for (std::size_t r = 0; r < n; ++r) sg += upstream(r, c) * cache.x_hat(r, c);
        out.gamma_grad(0, c) = sg;
        mean_dy(0, c) = out.beta_grad(0, c) / static_cast<double>(n);
        mean_dy_xhat(0, c) = sg / static_cast<double>(n);
    }
    out.input_grad = Matrix(n, features);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < features; ++c) {
            out.input_grad(r, c) =
                params.gamma(0, c) * cache.inv_std(0, c) *
                (upstream(r, c) - mean_dy(0, c) - cache.x_hat(r, c) * mean_dy_xhat(0, c));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Activations

Matrix sigmoid_forward(const Matrix& input) {
    Matrix out(input.rows(), input.cols());
    for (std::size_t i = 0; i < input.size(); ++i) out.data()[i] = sigmoid_scalar(input.data()[i]);
    return out;
}

Matrix sigmoid_backward(const Matrix& output, const Matrix& upstream) {
    require_same_shape(output, upstream, "sigmoid_backward");
    Matrix out(output.rows(), output.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double y = output.data()[i];
        out.data()[i] = upstream.data()[i] * y * (1.0 - y);
    }
    return out;
}

Matrix tanh_forward(const Matrix& input) {
    Matrix out(input.rows(), input.cols());
    for (std::size_t i = 0; i < input.size(); ++i) out.data()[i] = std::tanh(input.data()[i]);
    return out;
}

Matrix tanh_backward(const Matrix& output, const Matrix& upstream) {
    require_same_shape(output, upstream, "tanh_backward");
    Matrix out(output.rows(), output.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double y = output.data()[i];
        out.data()[i] = upstream.data()[i] * (1.0 - y * y);
    }
    return out;
}

// ---------------------------------------------------------------------------
// BCE

BceResult bce_loss(const Matrix& predictions, const Matrix& labels, const Matrix& sample_weights) {
    require_same_shape(predictions, labels, "bce_loss labels");
    require_same_shape(predictions, sample_weights, "bce_loss sample_weights");
    const std::size_t n = predictions.size();
    if (n == 0) throw ValidationError("bce_loss: empty input");

    constexpr double clamp = 1e-12;
    BceResult out;
    out.pred_grad = Matrix(predictions.rows(), predictions.cols());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = labels.data()[i];
        if (y != 0.0 && y != 1.0)
            throw ValidationError("bce_loss: label " + std::to_string(y) + " is not in {0,1}");
        double p = predictions.data()[i];
        if (p < clamp) p = clamp;
        if (p > 1.0 - clamp) p = 1.0 - clamp;
        const double w = sample_weights.data()[i];
        total += w * -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        out.pred_grad.data()[i] = w * (p - y) / (p * (1.0 - p)) / static_cast<double>(n);
    }
    out.loss = total / static_cast<double>(n);
    if (!std::isfinite(out.loss)) throw NumericError("bce_loss: non-finite loss");
    return out;
}

// ---------------------------------------------------------------------------
// Optimizers

void adam_step(std::vector<ParamRef>& params, AdamState& state, double lr) {
    if (state.t == 0 && state.m.empty()) {
        for (const ParamRef& p : params) {
            state.m.emplace_back(p.value->rows(), p.value->cols());
            state.v.emplace_back(p.value->rows(), p.value->cols());
        }
    }
    if (state.m.size() != params.size())
        throw LayoutError("adam_step: state tracks " + std::to_string(state.m.size()) +
                          " tensors, got " + std::to_string(params.size()));

    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& value = *params[k].value;
        const Matrix& grad = *params[k].grad;
        require_same_shape(value, grad, "adam_step " + params[k].name);
        if (!grad.all_finite())
            throw NumericError("adam_step: non-finite gradient for " + params[k].name);
        require_same_shape(value, state.m[k], "adam_step state " + params[k].name);
        for (std::size_t i = 0; i < value.size(); ++i) {
            double& m = state.m[k].data()[i];
            double& v = state.v[k].data()[i];
            const double g = grad.data()[i];
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            v = state.beta2 * v + (1.0 - state.beta2) * g * g;
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            value.data()[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

void sgd_step(std::vector<ParamRef>& params, double lr) {
    for (ParamRef& p : params) {
        require_same_shape(*p.value, *p.grad, "sgd_step " + p.name);
        if (!p.grad->all_finite())
            throw NumericError("sgd_step: non-finite gradient for " + p.name);
        for (std::size_t i = 0; i < p.value->size(); ++i)
            p.value->data()[i] -= lr * p.grad->data()[i];
    }
}

}  // namespace fedicu
