#include <doctest.h>

#include <cmath>
#include <vector>

#include "fd_support.hpp"
#include "fedicu/errors.hpp"
#include "fedicu/nn.hpp"
#include "fedicu/rng.hpp"

using namespace fedicu;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
    return m;
}

BatchSequence random_sequence(Rng& rng, std::size_t steps, std::size_t batch, std::size_t feats,
                              double scale = 1.0) {
    BatchSequence seq;
    for (std::size_t t = 0; t < steps; ++t) seq.push_back(random_matrix(rng, batch, feats, scale));
    return seq;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Independent scalar re-implementation of the gated recurrence, used as the
// oracle for the matrix path. Plain loops only.
std::vector<std::vector<double>> scalar_gru(const GruLayerParams& p,
                                            const std::vector<std::vector<double>>& xs,
                                            std::vector<double> h) {
    const std::size_t hidden = p.hidden_size();
    const std::size_t in = p.input_size();
    std::vector<std::vector<double>> out;
    for (const auto& x : xs) {
        std::vector<double> z(hidden), r(hidden), cand(hidden), next(hidden);
        for (std::size_t j = 0; j < hidden; ++j) {
            double az = p.b_z(0, j), ar = p.b_r(0, j);
            for (std::size_t i = 0; i < in; ++i) {
                az += x[i] * p.W_z(i, j);
                ar += x[i] * p.W_r(i, j);
            }
            for (std::size_t k = 0; k < hidden; ++k) {
                az += h[k] * p.U_z(k, j);
                ar += h[k] * p.U_r(k, j);
            }
            z[j] = sig(az);
            r[j] = sig(ar);
        }
        for (std::size_t j = 0; j < hidden; ++j) {
            double ah = p.b_h(0, j);
            for (std::size_t i = 0; i < in; ++i) ah += x[i] * p.W_h(i, j);
            for (std::size_t k = 0; k < hidden; ++k) ah += r[k] * h[k] * p.U_h(k, j);
            cand[j] = std::tanh(ah);
        }
        for (std::size_t j = 0; j < hidden; ++j)
            next[j] = z[j] * h[j] + (1.0 - z[j]) * cand[j];
        h = next;
        out.push_back(h);
    }
    return out;
}

double weighted_sum(const BatchSequence& seq, const BatchSequence& coeffs) {
    double total = 0.0;
    for (std::size_t t = 0; t < seq.size(); ++t)
        for (std::size_t i = 0; i < seq[t].size(); ++i)
            total += seq[t].data()[i] * coeffs[t].data()[i];
    return total;
}

}  // namespace

TEST_CASE("gru forward with zero weights and inputs stays at zero") {
    GruLayerParams p = GruLayerParams::zeros(3, 4);
    BatchSequence xs(5, Matrix(2, 3));
    Matrix h0(2, 4);
    auto res = gru_forward(p, xs, h0);
    REQUIRE(res.hidden.size() == 5);
    for (const Matrix& h : res.hidden)
        for (std::size_t i = 0; i < h.size(); ++i) CHECK(h.data()[i] == 0.0);
}

TEST_CASE("gru single scalar step matches hand-evaluated recurrence") {
    GruLayerParams p = GruLayerParams::zeros(1, 1);
    p.W_z(0, 0) = 0.2;
    p.U_z(0, 0) = -0.4;
    p.b_z(0, 0) = 0.1;
    p.W_r(0, 0) = 0.7;
    p.U_r(0, 0) = 0.3;
    p.b_r(0, 0) = -0.2;
    p.W_h(0, 0) = 1.1;
    p.U_h(0, 0) = 0.6;
    p.b_h(0, 0) = 0.05;

    const double x = 0.5, h_prev = 0.3;
    BatchSequence xs = {Matrix::from({{x}})};
    Matrix h0 = Matrix::from({{h_prev}});
    auto res = gru_forward(p, xs, h0);

    const double z = sig(x * 0.2 + h_prev * -0.4 + 0.1);
    const double r = sig(x * 0.7 + h_prev * 0.3 - 0.2);
    const double cand = std::tanh(x * 1.1 + r * h_prev * 0.6 + 0.05);
    const double expected = z * h_prev + (1.0 - z) * cand;
    CHECK(res.hidden[0](0, 0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("gru forward matches independent scalar oracle over 3 steps") {
    Rng rng(42);
    GruLayerParams p = GruLayerParams::init(rng, 3, 5);
    const std::size_t batch = 4, steps = 3;
    BatchSequence xs = random_sequence(rng, steps, batch, 3);
    Matrix h0 = random_matrix(rng, batch, 5);

    auto res = gru_forward(p, xs, h0);
    for (std::size_t b = 0; b < batch; ++b) {
        std::vector<std::vector<double>> sx;
        for (const Matrix& x : xs) {
            std::vector<double> row(3);
            for (std::size_t c = 0; c < 3; ++c) row[c] = x(b, c);
            sx.push_back(row);
        }
        std::vector<double> h(5);
        for (std::size_t c = 0; c < 5; ++c) h[c] = h0(b, c);
        auto oracle = scalar_gru(p, sx, h);
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t c = 0; c < 5; ++c)
                CHECK(std::fabs(res.hidden[t](b, c) - oracle[t][c]) < 1e-12);
    }
}

TEST_CASE("gru forward is deterministic") {
    Rng rng(7);
    GruLayerParams p = GruLayerParams::init(rng, 2, 4);
    BatchSequence xs = random_sequence(rng, 3, 2, 2);
    Matrix h0(2, 4);
    auto a = gru_forward(p, xs, h0);
    auto b = gru_forward(p, xs, h0);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t i = 0; i < a.hidden[t].size(); ++i)
            CHECK(a.hidden[t].data()[i] == b.hidden[t].data()[i]);
}

TEST_CASE("gru shape mismatches are rejected with the tensor named") {
    Rng rng(1);
    GruLayerParams p = GruLayerParams::init(rng, 3, 4);
    BatchSequence xs = {Matrix(2, 5)};
    CHECK_THROWS_AS(gru_forward(p, xs, Matrix(2, 4)), DimensionError);
    BatchSequence ok = {Matrix(2, 3)};
    CHECK_THROWS_AS(gru_forward(p, ok, Matrix(2, 3)), DimensionError);
}

TEST_CASE("gru backward with zero upstream yields zero gradients") {
    Rng rng(11);
    GruLayerParams p = GruLayerParams::init(rng, 3, 4);
    BatchSequence xs = random_sequence(rng, 2, 3, 3);
    Matrix h0 = random_matrix(rng, 3, 4);
    auto fwd = gru_forward(p, xs, h0);
    BatchSequence upstream(2, Matrix(3, 4));
    auto back = gru_backward(p, fwd.cache, upstream);
    for (const Matrix* g : {&back.grads.W_z, &back.grads.U_h, &back.grads.b_r})
        for (std::size_t i = 0; i < g->size(); ++i) CHECK(g->data()[i] == 0.0);
}

TEST_CASE("gru backward rejects a mismatched cache") {
    Rng rng(12);
    GruLayerParams p = GruLayerParams::init(rng, 3, 4);
    BatchSequence xs = random_sequence(rng, 2, 2, 3);
    auto fwd = gru_forward(p, xs, Matrix(2, 4));
    GruLayerParams other = GruLayerParams::init(rng, 5, 4);
    BatchSequence upstream(2, Matrix(2, 4));
    CHECK_THROWS_AS(gru_backward(other, fwd.cache, upstream), ValidationError);
    BatchSequence short_upstream(1, Matrix(2, 4));
    CHECK_THROWS_AS(gru_backward(p, fwd.cache, short_upstream), ValidationError);
}

TEST_CASE("gru gradients match central finite differences") {
    Rng rng(2024);
    const std::size_t in = 3, hidden = 4, batch = 2, steps = 2;
    GruLayerParams p = GruLayerParams::init(rng, in, hidden);
    BatchSequence xs = random_sequence(rng, steps, batch, in);
    Matrix h0 = random_matrix(rng, batch, hidden);
    BatchSequence coeffs = random_sequence(rng, steps, batch, hidden);

    auto loss = [&]() {
        auto res = gru_forward(p, xs, h0);
        return weighted_sum(res.hidden, coeffs);
    };
    auto fwd = gru_forward(p, xs, h0);
    auto back = gru_backward(p, fwd.cache, coeffs);

    CHECK(fedtest::fd_check_tensor(p.W_z, back.grads.W_z, loss) < 1e-4);
    CHECK(fedtest::fd_check_tensor(p.W_r, back.grads.W_r, loss) < 1e-4);
    CHECK(fedtest::fd_check_tensor(p.W_h, back.grads.W_h, loss) < 1e-4);
    CHECK(fedtest::fd_check_tensor(p.U_z, back.grads.U_z, loss) < 1e-4);
    CHECK(fedtest::fd_check_tensor(p.U_r, back.grads.U_r, loss) < 1e-4);
    CHECK(fedtest::fd_check_tensor(p.U_h, back.grads.U_h, loss) < 1e-4);
    CHECK(fedtest::fd_check_tensor(p.b_z, back.grads.b_z, loss) < 1e-4);
    CHECK(fedtest::fd_check_tensor(p.b_r, back.grads.b_r, loss) < 1e-4);
    CHECK(fedtest::fd_check_tensor(p.b_h, back.grads.b_h, loss) < 1e-4);
    for (std::size_t t = 0; t < steps; ++t)
        CHECK(fedtest::fd_check_tensor(xs[t], back.input_grads[t], loss) < 1e-4);
    CHECK(fedtest::fd_check_tensor(h0, back.h0_grad, loss) < 1e-4);
}

TEST_CASE("input feature with zeroed weights gets zero gradient") {
    Rng rng(5);
    const std::size_t in = 3, hidden = 4;
    GruLayerParams p = GruLayerParams::init(rng, in, hidden);
    const std::size_t dead = 1;
    for (std::size_t j = 0; j < hidden; ++j) {
        p.W_z(dead, j) = 0.0;
        p.W_r(dead, j) = 0.0;
        p.W_h(dead, j) = 0.0;
    }
    BatchSequence xs = random_sequence(rng, 3, 2, in);
    auto fwd = gru_forward(p, xs, Matrix(2, hidden));
    BatchSequence upstream = random_sequence(rng, 3, 2, hidden);
    auto back = gru_backward(p, fwd.cache, upstream);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t b = 0; b < 2; ++b) CHECK(back.input_grads[t](b, dead) == 0.0);
}

TEST_CASE("dense with identity weights is the identity map") {
    DenseParams p;
    p.W = Matrix(3, 3);
    for (std::size_t i = 0; i < 3; ++i) p.W(i, i) = 1.0;
    p.b = Matrix(1, 3);
    Rng rng(9);
    Matrix x = random_matrix(rng, 4, 3);
    DenseCache cache;
    Matrix y = dense_forward(p, x, cache);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("dense gradients match finite differences") {
    Rng rng(10);
    DenseParams p = DenseParams::init(rng, 3, 2);
    Matrix x = random_matrix(rng, 4, 3);
    Matrix coeffs = random_matrix(rng, 4, 2);
    auto loss = [&]() {
        DenseCache c;
        Matrix y = dense_forward(p, x, c);
        double total = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) total += y.data()[i] * coeffs.data()[i];
        return total;
    };
    DenseCache cache;
    dense_forward(p, x, cache);
    auto back = dense_backward(p, cache, coeffs);
    CHECK(fedtest::fd_check_tensor(p.W, back.grads.W, loss) < 1e-4);
    CHECK(fedtest::fd_check_tensor(p.b, back.grads.b, loss) < 1e-4);
    CHECK(fedtest::fd_check_tensor(x, back.input_grad, loss) < 1e-4);
}

TEST_CASE("batchnorm train output is standardized before gamma/beta") {
    Rng rng(21);
    BatchNormParams bn = BatchNormParams::init(5, 0.99, 1e-18);
    Matrix x = random_matrix(rng, 64, 5, 3.0);
    BatchNormCache cache;
    Matrix y = batchnorm_forward(bn, x, true, cache);
    for (std::size_t c = 0; c < 5; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < 64; ++r) mean += y(r, c);
        mean /= 64.0;
        double var = 0.0;
        for (std::size_t r = 0; r < 64; ++r) var += (y(r, c) - mean) * (y(r, c) - mean);
        var /= 64.0;
        CHECK(std::fabs(mean) < 1e-9);
        CHECK(std::fabs(var - 1.0) < 1e-9);
    }
}

TEST_CASE("batchnorm inference does not mutate running statistics") {
    Rng rng(22);
    BatchNormParams bn = BatchNormParams::init(3);
    Matrix x1 = random_matrix(rng, 8, 3);
    BatchNormCache c1;
    batchnorm_forward(bn, x1, true, c1);
    const Matrix mean_before = bn.running_mean;
    const Matrix var_before = bn.running_var;

    Matrix x2 = random_matrix(rng, 8, 3);
    BatchNormCache c2;
    Matrix a = batchnorm_forward(bn, x2, false, c2);
    Matrix b = batchnorm_forward(bn, x2, false, c2);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(bn.running_mean(0, i) == mean_before(0, i));
        CHECK(bn.running_var(0, i) == var_before(0, i));
    }
}

TEST_CASE("batchnorm rejects a training batch of one") {
    BatchNormParams bn = BatchNormParams::init(3);
    BatchNormCache cache;
    CHECK_THROWS_AS(batchnorm_forward(bn, Matrix(1, 3), true, cache), ValidationError);
}

TEST_CASE("batchnorm gradients match finite differences") {
    Rng rng(23);
    BatchNormParams bn = BatchNormParams::init(3);
    Matrix x = random_matrix(rng, 6, 3, 2.0);
    Matrix coeffs = random_matrix(rng, 6, 3);
    auto loss = [&]() {
        BatchNormParams copy = bn;  // keep running stats untouched
        BatchNormCache c;
        Matrix y = batchnorm_forward(copy, x, true, c);
        double total = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) total += y.data()[i] * coeffs.data()[i];
        return total;
    };
    BatchNormParams work = bn;
    BatchNormCache cache;
    batchnorm_forward(work, x, true, cache);
    auto back = batchnorm_backward(bn, cache, coeffs);
    CHECK(fedtest::fd_check_tensor(bn.gamma, back.gamma_grad, loss) < 1e-4);
    CHECK(fedtest::fd_check_tensor(bn.beta, back.beta_grad, loss) < 1e-4);
    CHECK(fedtest::fd_check_tensor(x, back.input_grad, loss) < 1e-4);
}

TEST_CASE("sigmoid value and gradient at zero") {
    Matrix x = Matrix::from({{0.0}});
    Matrix y = sigmoid_forward(x);
    CHECK(y(0, 0) == doctest::Approx(0.5));
    Matrix up = Matrix::from({{1.0}});
    Matrix g = sigmoid_backward(y, up);
    CHECK(g(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("bce at p=0.5 with unit weights equals ln 2") {
    Matrix p = Matrix::from({{0.5}, {0.5}, {0.5}});
    Matrix y = Matrix::from({{1.0}, {0.0}, {1.0}});
    Matrix w(3, 1, 1.0);
    auto res = bce_loss(p, y, w);
    CHECK(res.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("bce on perfect predictions is at most 1e-11") {
    Matrix p = Matrix::from({{1.0}, {0.0}});
    Matrix y = Matrix::from({{1.0}, {0.0}});
    Matrix w(2, 1, 1.0);
    auto res = bce_loss(p, y, w);
    CHECK(res.loss <= 1e-11);
}

TEST_CASE("bce with class weights matches the hand computation") {
    Matrix p = Matrix::from({{0.5}, {0.5}});
    Matrix y = Matrix::from({{1.0}, {0.0}});
    Matrix w = Matrix::from({{3.0}, {1.0}});
    auto res = bce_loss(p, y, w);
    CHECK(res.loss == doctest::Approx((3.0 * std::log(2.0) + std::log(2.0)) / 2.0).epsilon(1e-12));
}

TEST_CASE("bce rejects labels outside {0,1}") {
    Matrix p = Matrix::from({{0.5}});
    Matrix y = Matrix::from({{0.5}});
    Matrix w(1, 1, 1.0);
    CHECK_THROWS_AS(bce_loss(p, y, w), ValidationError);
}

TEST_CASE("bce gradient matches finite differences") {
    Rng rng(31);
    Matrix p(8, 1), y(8, 1), w(8, 1);
    for (std::size_t i = 0; i < 8; ++i) {
        p.data()[i] = rng.uniform(0.1, 0.9);
        y.data()[i] = rng.next_double() < 0.5 ? 0.0 : 1.0;
        w.data()[i] = rng.uniform(0.5, 3.0);
    }
    auto loss = [&]() { return bce_loss(p, y, w).loss; };
    auto res = bce_loss(p, y, w);
    CHECK(fedtest::fd_check_tensor(p, res.pred_grad, loss) < 1e-4);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
    Matrix value = Matrix::from({{1.0, -2.0}, {3.0, 4.0}});
    const Matrix original = value;
    Matrix grad(2, 2);
    std::vector<ParamRef> refs = {{"w", &value, &grad}};
    AdamState state;
    for (int i = 0; i < 5; ++i) adam_step(refs, state, 0.01);
    for (std::size_t i = 0; i < value.size(); ++i) CHECK(value.data()[i] == original.data()[i]);
}

TEST_CASE("adam first step with unit gradient moves by about -lr") {
    Matrix value = Matrix::from({{0.0}});
    Matrix grad = Matrix::from({{1.0}});
    std::vector<ParamRef> refs = {{"w", &value, &grad}};
    AdamState state;
    adam_step(refs, state, 0.01);
    // bias-corrected m̂/√v̂ is exactly 1 on the first step
    CHECK(value(0, 0) == doctest::Approx(-0.01).epsilon(1e-7));
    CHECK(state.t == 1);
}

TEST_CASE("adam updates tensors independently, matching the concatenated update") {
    Rng rng(41);
    Matrix a = random_matrix(rng, 1, 3), ga = random_matrix(rng, 1, 3);
    Matrix b = random_matrix(rng, 1, 2), gb = random_matrix(rng, 1, 2);
    Matrix cat(1, 5), gcat(1, 5);
    for (std::size_t i = 0; i < 3; ++i) {
        cat(0, i) = a(0, i);
        gcat(0, i) = ga(0, i);
    }
    for (std::size_t i = 0; i < 2; ++i) {
        cat(0, 3 + i) = b(0, i);
        gcat(0, 3 + i) = gb(0, i);
    }
    std::vector<ParamRef> split = {{"a", &a, &ga}, {"b", &b, &gb}};
    std::vector<ParamRef> joined = {{"cat", &cat, &gcat}};
    AdamState s1, s2;
    adam_step(split, s1, 0.05);
    adam_step(joined, s2, 0.05);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a(0, i) == cat(0, i));
    for (std::size_t i = 0; i < 2; ++i) CHECK(b(0, i) == cat(0, 3 + i));
}

TEST_CASE("adam rejects non-finite gradients naming the parameter") {
    Matrix value(1, 1);
    Matrix grad = Matrix::from({{std::nan("")}});
    std::vector<ParamRef> refs = {{"dense1.w", &value, &grad}};
    AdamState state;
    try {
        adam_step(refs, state, 0.01);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("dense1.w") != std::string::npos);
    }
}

TEST_CASE("sgd applies exactly p - lr*g and lr=0 is the identity") {
    Matrix value = Matrix::from({{1.0, 2.0}});
    Matrix grad = Matrix::from({{0.5, -1.0}});
    std::vector<ParamRef> refs = {{"w", &value, &grad}};
    sgd_step(refs, 0.1);
    CHECK(value(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-15));
    CHECK(value(0, 1) == doctest::Approx(2.0 + 0.1).epsilon(1e-15));
    Matrix before = value;
    sgd_step(refs, 0.0);
    for (std::size_t i = 0; i < value.size(); ++i) CHECK(value.data()[i] == before.data()[i]);
}

TEST_CASE("sgd and adam move in the same direction on the first step") {
    Rng rng(51);
    Matrix grad = random_matrix(rng, 2, 3);
    Matrix v1(2, 3), v2(2, 3);
    std::vector<ParamRef> r1 = {{"w", &v1, &grad}};
    std::vector<ParamRef> r2 = {{"w", &v2, &grad}};
    sgd_step(r1, 0.01);
    AdamState state;
    adam_step(r2, state, 0.01);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (grad.data()[i] == 0.0) continue;
        CHECK(v1.data()[i] * v2.data()[i] > 0.0);  // same sign of movement
    }
}

TEST_CASE("glorot init respects bounds and is seed-reproducible") {
    Rng a(123), b(123), c(124);
    const double bound = std::sqrt(6.0 / (20.0 + 50.0));
    Matrix m1 = glorot_init(a, 20, 50);
    REQUIRE(m1.size() == 1000);
    for (std::size_t i = 0; i < m1.size(); ++i) {
        CHECK(m1.data()[i] >= -bound);
        CHECK(m1.data()[i] <= bound);
    }
    Matrix m2 = glorot_init(b, 20, 50);
    bool identical = true, differs = false;
    Matrix m3 = glorot_init(c, 20, 50);
    for (std::size_t i = 0; i < m1.size(); ++i) {
        identical = identical && m1.data()[i] == m2.data()[i];
        differs = differs || m1.data()[i] != m3.data()[i];
    }
    CHECK(identical);
    CHECK(differs);
}

TEST_CASE("property: gradients of every op match finite differences on random instances") {
    // 100 random small instances across the differentiable ops.
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(9000 + trial);
        const std::size_t in = 1 + trial % 3, hidden = 2 + trial % 3, batch = 2 + trial % 2;
        GruLayerParams p = GruLayerParams::init(rng, in, hidden);
        BatchSequence xs = random_sequence(rng, 2, batch, in);
        Matrix h0 = random_matrix(rng, batch, hidden);
        BatchSequence coeffs = random_sequence(rng, 2, batch, hidden);
        auto loss = [&]() {
            auto res = gru_forward(p, xs, h0);
            return weighted_sum(res.hidden, coeffs);
        };
        auto fwd = gru_forward(p, xs, h0);
        auto back = gru_backward(p, fwd.cache, coeffs);
        CHECK(fedtest::fd_check_tensor(p.U_h, back.grads.U_h, loss) < 1e-4);
        CHECK(fedtest::fd_check_tensor(xs[0], back.input_grads[0], loss) < 1e-4);
    }
}
