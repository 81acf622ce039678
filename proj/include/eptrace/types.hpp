#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace eptrace {

using cplx = std::complex<double>;
inline constexpr cplx I_unit{0.0, 1.0};

enum class ErrorCode {
    DimensionMismatch,
    InvalidInput,
    NonConvergence,
    Singular,
    BandEdge,
    ZeroVector,
    DegenerateInput,
    LeftDomain,
    StalledAtNonzeroGap,
    PoleProximity,
    AmbiguousMatching,
    SchemaError,
    IoError,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::Singular: return "Singular";
        case ErrorCode::BandEdge: return "BandEdge";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::DegenerateInput: return "DegenerateInput";
        case ErrorCode::LeftDomain: return "LeftDomain";
        case ErrorCode::StalledAtNonzeroGap: return "StalledAtNonzeroGap";
        case ErrorCode::PoleProximity: return "PoleProximity";
        case ErrorCode::AmbiguousMatching: return "AmbiguousMatching";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Exception carrying a machine-readable code. Non-fatal conditions
/// (near-defective pairs, unconverged poles, ambiguous matches) are
/// reported as flags on result values instead.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline bool is_finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

class CVector {
public:
    CVector() = default;
    explicit CVector(std::size_t dim, cplx fill = {}) : data_(dim, fill) {}
    CVector(std::initializer_list<cplx> init) : data_(init) {}
    explicit CVector(std::vector<cplx> data) : data_(std::move(data)) {}

    std::size_t size() const noexcept { return data_.size(); }
    cplx& operator[](std::size_t i) { return data_[i]; }
    const cplx& operator[](std::size_t i) const { return data_[i]; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    std::span<const cplx> span() const noexcept { return data_; }
    const std::vector<cplx>& values() const noexcept { return data_; }

    CVector& operator*=(cplx s) {
        for (auto& x : data_) x *= s;
        return *this;
    }
    CVector& operator/=(cplx s) {
        for (auto& x : data_) x /= s;
        return *this;
    }
    friend CVector operator*(cplx s, CVector v) { return v *= s; }
    friend CVector operator-(const CVector& a, const CVector& b) {
        if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "vector difference");
        CVector out(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
        return out;
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](cplx z) { return is_finite(z); });
    }

    double norm() const {
        double s = 0.0;
        for (const auto& x : data_) s += std::norm(x);
        return std::sqrt(s);
    }

    friend bool operator==(const CVector&, const CVector&) = default;

private:
    std::vector<cplx> data_;
};

/// Dense complex matrix, row-major.
class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols, cplx fill = {})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    CMatrix(std::initializer_list<std::initializer_list<cplx>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_) throw Error(ErrorCode::DimensionMismatch, "ragged matrix initializer");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static CMatrix identity(std::size_t n) {
        CMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static CMatrix diagonal(std::span<const cplx> d) {
        CMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }
    static CMatrix diagonal(std::span<const double> d) {
        CMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const cplx> data() const noexcept { return data_; }

    CVector column(std::size_t c) const {
        CVector v(rows_);
        for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
        return v;
    }

    CMatrix transpose() const {
        CMatrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }
    CMatrix adjoint() const {
        CMatrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = std::conj((*this)(r, c));
        return t;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const auto& x : data_) s += std::norm(x);
        return std::sqrt(s);
    }
    double max_abs() const {
        double m = 0.0;
        for (const auto& x : data_) m = std::max(m, std::abs(x));
        return m;
    }
    cplx trace() const {
        cplx t{};
        for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
        return t;
    }
    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](cplx z) { return is_finite(z); });
    }

    CMatrix& operator+=(const CMatrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    CMatrix& operator-=(const CMatrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    CMatrix& operator*=(cplx s) {
        for (auto& x : data_) x *= s;
        return *this;
    }
    friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
    friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
    friend CMatrix operator*(cplx s, CMatrix a) { return a *= s; }

    friend CMatrix operator*(const CMatrix& a, const CMatrix& b) {
        if (a.cols_ != b.rows_) throw Error(ErrorCode::DimensionMismatch, "matrix product");
        CMatrix out(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const cplx aik = a(i, k);
                if (aik == cplx{}) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
            }
        return out;
    }
    friend CVector operator*(const CMatrix& a, const CVector& x) {
        if (a.cols_ != x.size()) throw Error(ErrorCode::DimensionMismatch, "matrix-vector product");
        CVector out(a.rows_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            cplx s{};
            for (std::size_t k = 0; k < a.cols_; ++k) s += a(i, k) * x[k];
            out[i] = s;
        }
        return out;
    }

    friend bool operator==(const CMatrix&, const CMatrix&) = default;

private:
    void check_same_shape(const CMatrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) throw Error(ErrorCode::DimensionMismatch, "shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

/// Numerical thresholds shared by all modules; every field is overridable
/// from a run configuration.
struct Tolerances {
    double tol_eig = 1e-10;
    double tol_norm = 1e-8;
    double tol_sym = 1e-8;
    double tol_solve = 1e-10;
    double gap_min = 1e-8;
    double tol_defect = 1e-3;
    double tol_fix = 1e-12;
    int max_iter = 200;
    double tol_ep_gap = 1e-8;
    double tol_ep_rig = 1e-3;
    double fd_step = 1e-6;
    double overlap_min = 0.6;
    double tol_orth = 1e-6;
    double tol_cluster = 1e-6;
    double tol_unit = 1e-10;
    double prominence = 0.05;

    friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

}  // namespace eptrace
