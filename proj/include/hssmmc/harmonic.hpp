#pragma once

// Harmonic-domain algebra for linear time-periodic systems.
//
// A periodic signal x(t) with fundamental w1 is represented by its truncated
// two-sided Fourier coefficients X_k, k = -h..h, stored in ascending k order.
// Products of periodic signals become convolutions of coefficient vectors,
// realized as banded Toeplitz matrices, and d/dt becomes the diagonal
// frequency matrix diag(j k w1). Every block matrix in the library uses the
// same ascending ordering.

#include <Eigen/Dense>

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace hssmmc {

using cplx = std::complex<double>;

inline constexpr int kDefaultOrder = 3;
inline constexpr double kSymmetryTolerance = 1e-9;

class HarmonicVector {
public:
    HarmonicVector() = default;
    HarmonicVector(int order, double base_frequency);
    HarmonicVector(int order, double base_frequency, Eigen::VectorXcd coeffs);

    static HarmonicVector constant(int order, double base_frequency, double value);
    // a*cos(k w1 t - phase) in the k-th slot pair.
    static HarmonicVector cosine(int order, double base_frequency, int k, double amplitude,
                                 double phase = 0.0);

    int order() const noexcept { return order_; }
    double base_frequency() const noexcept { return w1_; }
    double period() const;
    int size() const noexcept { return 2 * order_ + 1; }

    // Coefficient access by harmonic index k in [-h, h]. Out-of-band k reads as zero.
    cplx operator[](int k) const;
    cplx& at(int k);
    const Eigen::VectorXcd& coeffs() const noexcept { return c_; }

    double max_magnitude() const;
    bool is_conjugate_symmetric(double rel_tol = kSymmetryTolerance) const;
    // Largest |X_-k - conj(X_k)| relative to max_magnitude().
    double symmetry_defect() const;

    // Zero-pads or truncates to another order.
    HarmonicVector resized(int new_order) const;

    HarmonicVector& operator+=(const HarmonicVector& o);
    HarmonicVector& operator-=(const HarmonicVector& o);
    HarmonicVector& operator*=(cplx s);

    friend HarmonicVector operator+(HarmonicVector a, const HarmonicVector& b) { return a += b; }
    friend HarmonicVector operator-(HarmonicVector a, const HarmonicVector& b) { return a -= b; }
    friend HarmonicVector operator*(HarmonicVector a, cplx s) { return a *= s; }
    friend HarmonicVector operator*(cplx s, HarmonicVector a) { return a *= s; }
    friend HarmonicVector operator*(double s, HarmonicVector a) { return a *= s; }
    friend HarmonicVector operator-(HarmonicVector a) { return a *= -1.0; }

private:
    int order_ = 0;
    double w1_ = 0.0;
    Eigen::VectorXcd c_ = Eigen::VectorXcd::Zero(1);
};

// Banded Toeplitz matrix realizing multiplication by the source signal:
// entry(i, j) = src[i - j] for |i - j| <= h, zero otherwise.
struct ToeplitzOperator {
    int order = 0;
    Eigen::MatrixXcd matrix;

    HarmonicVector apply(const HarmonicVector& x) const;
};

ToeplitzOperator toeplitz(const HarmonicVector& src);

// diag(j k w1), k = -h..h.
struct FrequencyMatrix {
    int order = 0;
    double base_frequency = 0.0;
    Eigen::VectorXcd diagonal;

    Eigen::MatrixXcd dense() const { return diagonal.asDiagonal(); }
    HarmonicVector apply(const HarmonicVector& x) const;
};

FrequencyMatrix q_matrix(int order, double base_frequency);

// Evaluates sum_k X_k e^{j k w1 t}. Throws ResidualImaginary when the imaginary
// residue exceeds rel_tol * max|X_k| (the vector is not a real signal).
double synthesize(const HarmonicVector& src, double t, double rel_tol = kSymmetryTolerance);

// Rectangle-rule Fourier analysis of samples x(t0 + n T / N), n = 0..N-1, where
// the N samples span exactly one fundamental period. Requires N >= 4 (2h + 1).
HarmonicVector analyze(std::span<const double> samples, int order, double base_frequency,
                       double t0 = 0.0);

// h-truncated coefficient convolution, identical to toeplitz(a).apply(b).
HarmonicVector convolve(const HarmonicVector& a, const HarmonicVector& b);

// Block matrix with (2h+1)-square blocks addressed by row/column labels.
class HarmonicBlockMatrix {
public:
    HarmonicBlockMatrix() = default;
    HarmonicBlockMatrix(std::vector<std::string> row_labels, std::vector<std::string> col_labels,
                        int order);

    int order() const noexcept { return order_; }
    int block_size() const noexcept { return 2 * order_ + 1; }
    const std::vector<std::string>& row_labels() const noexcept { return rows_; }
    const std::vector<std::string>& col_labels() const noexcept { return cols_; }

    int row_index(const std::string& label) const;
    int col_index(const std::string& label) const;

    void set_block(int row, int col, const Eigen::MatrixXcd& block);
    void add_block(int row, int col, const Eigen::MatrixXcd& block);
    void set_block(const std::string& row, const std::string& col, const Eigen::MatrixXcd& block);

    Eigen::MatrixXcd block(int row, int col) const;
    Eigen::MatrixXcd block(const std::string& row, const std::string& col) const;

    const Eigen::MatrixXcd& dense() const noexcept { return m_; }

private:
    void check_block(int row, int col, const Eigen::MatrixXcd& block) const;

    int order_ = 0;
    std::vector<std::string> rows_;
    std::vector<std::string> cols_;
    Eigen::MatrixXcd m_;
};

}  // namespace hssmmc
