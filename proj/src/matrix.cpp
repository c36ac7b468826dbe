#include "fedicu/matrix.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "fedicu/errors.hpp"

namespace fedicu {

namespace {

using ERowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const ERowMajor>;
using MutMap = Eigen::Map<ERowMajor>;

ConstMap view(const Matrix& m) {
    return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                    static_cast<Eigen::Index>(m.cols()));
}

MutMap view(Matrix& m) {
    return MutMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

}  // namespace

Matrix Matrix::from(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r > 0 ? rows.begin()->size() : 0;
    Matrix out(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("Matrix::from: ragged initializer");
        std::size_t j = 0;
        for (double v : row) out(i, j++) = v;
        ++i;
    }
    return out;
}

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions disagree (" + std::to_string(a.cols()) +
                             " vs " + std::to_string(b.rows()) + ")");
    }
    Matrix out(a.rows(), b.cols());
    view(out).noalias() = view(a) * view(b);
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_tn: row counts disagree (" + std::to_string(a.rows()) +
                             " vs " + std::to_string(b.rows()) + ")");
    }
    Matrix out(a.cols(), b.cols());
    view(out).noalias() = view(a).transpose() * view(b);
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt: column counts disagree (" + std::to_string(a.cols()) +
                             " vs " + std::to_string(b.cols()) + ")");
    }
    Matrix out(a.rows(), b.rows());
    view(out).noalias() = view(a) * view(b).transpose();
    return out;
}

Matrix col_sums(const Matrix& m) {
    Matrix out(1, m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out(0, c) += m(r, c);
    }
    return out;
}

void require_same_shape(const Matrix& a, const Matrix& b, const std::string& name) {
    if (!a.same_shape(b)) {
        throw DimensionError(name + ": shape " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " does not match " +
                             std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

void require_finite(const Matrix& m, const std::string& name) {
    if (!m.all_finite()) throw NumericError(name + ": non-finite entries");
}

}  // namespace fedicu
