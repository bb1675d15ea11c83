#include "hssmmc/harmonic.hpp"

#include "hssmmc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hssmmc {

namespace {

void require_same_basis(const HarmonicVector& a, const HarmonicVector& b, const char* what) {
    if (a.order() != b.order() || a.base_frequency() != b.base_frequency()) {
        throw OrderMismatch(std::string(what) + ": operands differ in order or base frequency (h=" +
                            std::to_string(a.order()) + " vs h=" + std::to_string(b.order()) + ")");
    }
}

}  // namespace

HarmonicVector::HarmonicVector(int order, double base_frequency)
    : HarmonicVector(order, base_frequency, Eigen::VectorXcd::Zero(2 * std::max(order, 0) + 1)) {}

HarmonicVector::HarmonicVector(int order, double base_frequency, Eigen::VectorXcd coeffs)
    : order_(order), w1_(base_frequency), c_(std::move(coeffs)) {
    if (order < 0) throw InvalidArgument("harmonic order must be >= 0");
    if (c_.size() != 2 * order + 1) {
        throw DimensionMismatch("coefficient vector length " + std::to_string(c_.size()) +
                                " does not match 2h+1 = " + std::to_string(2 * order + 1));
    }
}

HarmonicVector HarmonicVector::constant(int order, double base_frequency, double value) {
    HarmonicVector v(order, base_frequency);
    v.at(0) = value;
    return v;
}

HarmonicVector HarmonicVector::cosine(int order, double base_frequency, int k, double amplitude,
                                      double phase) {
    HarmonicVector v(order, base_frequency);
    if (k == 0) {
        v.at(0) = amplitude * std::cos(phase);
    } else if (std::abs(k) <= order) {
        v.at(k) += 0.5 * amplitude * std::polar(1.0, -phase);
        v.at(-k) += 0.5 * amplitude * std::polar(1.0, phase);
    }
    return v;
}

double HarmonicVector::period() const { return 2.0 * std::numbers::pi / w1_; }

cplx HarmonicVector::operator[](int k) const {
    if (k < -order_ || k > order_) return {0.0, 0.0};
    return c_(k + order_);
}

cplx& HarmonicVector::at(int k) {
    if (k < -order_ || k > order_) {
        throw InvalidArgument("harmonic index " + std::to_string(k) + " outside [-" +
                              std::to_string(order_) + ", " + std::to_string(order_) + "]");
    }
    return c_(k + order_);
}

double HarmonicVector::max_magnitude() const { return c_.cwiseAbs().maxCoeff(); }

double HarmonicVector::symmetry_defect() const {
    const double scale = max_magnitude();
    if (scale == 0.0) return 0.0;
    double worst = 0.0;
    for (int k = 0; k <= order_; ++k) {
        worst = std::max(worst, std::abs((*this)[-k] - std::conj((*this)[k])));
    }
    return worst / scale;
}

bool HarmonicVector::is_conjugate_symmetric(double rel_tol) const {
    return symmetry_defect() <= rel_tol;
}

HarmonicVector HarmonicVector::resized(int new_order) const {
    HarmonicVector out(new_order, w1_);
    const int common = std::min(order_, new_order);
    for (int k = -common; k <= common; ++k) out.at(k) = (*this)[k];
    return out;
}

HarmonicVector& HarmonicVector::operator+=(const HarmonicVector& o) {
    require_same_basis(*this, o, "add");
    c_ += o.c_;
    return *this;
}

HarmonicVector& HarmonicVector::operator-=(const HarmonicVector& o) {
    require_same_basis(*this, o, "subtract");
    c_ -= o.c_;
    return *this;
}

HarmonicVector& HarmonicVector::operator*=(cplx s) {
    c_ *= s;
    return *this;
}

ToeplitzOperator toeplitz(const HarmonicVector& src) {
    const int h = src.order();
    const int n = src.size();
    ToeplitzOperator op{h, Eigen::MatrixXcd::Zero(n, n)};
    for (int i = 0; i < n; ++i) {
        for (int j = std::max(0, i - h); j <= std::min(n - 1, i + h); ++j) {
            op.matrix(i, j) = src[i - j];
        }
    }
    return op;
}

HarmonicVector ToeplitzOperator::apply(const HarmonicVector& x) const {
    if (x.order() != order) throw OrderMismatch("Toeplitz operator applied to vector of other order");
    return HarmonicVector(order, x.base_frequency(), matrix * x.coeffs());
}

FrequencyMatrix q_matrix(int order, double base_frequency) {
    if (order < 0) throw InvalidArgument("harmonic order must be >= 0");
    if (!(base_frequency > 0.0)) throw InvalidArgument("base frequency must be > 0");
    FrequencyMatrix q{order, base_frequency, Eigen::VectorXcd(2 * order + 1)};
    for (int k = -order; k <= order; ++k) q.diagonal(k + order) = cplx(0.0, k * base_frequency);
    return q;
}

HarmonicVector FrequencyMatrix::apply(const HarmonicVector& x) const {
    if (x.order() != order) throw OrderMismatch("frequency matrix applied to vector of other order");
    return HarmonicVector(order, x.base_frequency(), diagonal.cwiseProduct(x.coeffs()));
}

double synthesize(const HarmonicVector& src, double t, double rel_tol) {
    const int h = src.order();
    const double wt = src.base_frequency() * t;
    cplx sum = src[0];
    for (int k = 1; k <= h; ++k) {
        const cplx rot = std::polar(1.0, k * wt);
        sum += src[k] * rot + src[-k] * std::conj(rot);
    }
    const double scale = src.max_magnitude();
    if (scale > 0.0 && std::abs(sum.imag()) > rel_tol * scale) {
        throw ResidualImaginary("synthesized value has imaginary residue " +
                                std::to_string(sum.imag()) + " (vector is not a real signal)");
    }
    return sum.real();
}

HarmonicVector analyze(std::span<const double> samples, int order, double base_frequency,
                       double t0) {
    const auto count = static_cast<long>(samples.size());
    if (order < 0) throw InvalidArgument("harmonic order must be >= 0");
    if (count < 4L * (2 * order + 1)) {
        throw InsufficientSamples("analyze needs at least " + std::to_string(4 * (2 * order + 1)) +
                                  " samples per period for h=" + std::to_string(order) + ", got " +
                                  std::to_string(count));
    }
    HarmonicVector out(order, base_frequency);
    const double two_pi = 2.0 * std::numbers::pi;
    for (int k = -order; k <= order; ++k) {
        cplx acc{0.0, 0.0};
        for (long n = 0; n < count; ++n) {
            // Reduce k*n modulo N so the phase argument stays small.
            const long kn = ((static_cast<long>(k) * n) % count + count) % count;
            acc += samples[static_cast<std::size_t>(n)] *
                   std::polar(1.0, -two_pi * static_cast<double>(kn) / static_cast<double>(count));
        }
        out.at(k) = acc * std::polar(1.0, -k * base_frequency * t0) / static_cast<double>(count);
    }
    return out;
}

HarmonicVector convolve(const HarmonicVector& a, const HarmonicVector& b) {
    require_same_basis(a, b, "convolve");
    const int h = a.order();
    HarmonicVector out(h, a.base_frequency());
    for (int k = -h; k <= h; ++k) {
        cplx acc{0.0, 0.0};
        for (int j = std::max(-h, k - h); j <= std::min(h, k + h); ++j) acc += a[k - j] * b[j];
        out.at(k) = acc;
    }
    return out;
}

HarmonicBlockMatrix::HarmonicBlockMatrix(std::vector<std::string> row_labels,
                                         std::vector<std::string> col_labels, int order)
    : order_(order), rows_(std::move(row_labels)), cols_(std::move(col_labels)) {
    const auto n = static_cast<Eigen::Index>(block_size());
    m_ = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rows_.size()) * n,
                                static_cast<Eigen::Index>(cols_.size()) * n);
}

int HarmonicBlockMatrix::row_index(const std::string& label) const {
    const auto it = std::find(rows_.begin(), rows_.end(), label);
    if (it == rows_.end()) throw UnknownVariable("no block row labelled '" + label + "'");
    return static_cast<int>(it - rows_.begin());
}

int HarmonicBlockMatrix::col_index(const std::string& label) const {
    const auto it = std::find(cols_.begin(), cols_.end(), label);
    if (it == cols_.end()) throw UnknownVariable("no block column labelled '" + label + "'");
    return static_cast<int>(it - cols_.begin());
}

void HarmonicBlockMatrix::check_block(int row, int col, const Eigen::MatrixXcd& block) const {
    const int n = block_size();
    if (row < 0 || col < 0 || row >= static_cast<int>(rows_.size()) ||
        col >= static_cast<int>(cols_.size())) {
        throw DimensionMismatch("block index (" + std::to_string(row) + ", " + std::to_string(col) +
                                ") out of range");
    }
    if (block.rows() != n || block.cols() != n) {
        throw DimensionMismatch("block must be " + std::to_string(n) + "x" + std::to_string(n));
    }
}

void HarmonicBlockMatrix::set_block(int row, int col, const Eigen::MatrixXcd& block) {
    check_block(row, col, block);
    const int n = block_size();
    m_.block(row * n, col * n, n, n) = block;
}

void HarmonicBlockMatrix::add_block(int row, int col, const Eigen::MatrixXcd& block) {
    check_block(row, col, block);
    const int n = block_size();
    m_.block(row * n, col * n, n, n) += block;
}

void HarmonicBlockMatrix::set_block(const std::string& row, const std::string& col,
                                    const Eigen::MatrixXcd& block) {
    set_block(row_index(row), col_index(col), block);
}

Eigen::MatrixXcd HarmonicBlockMatrix::block(int row, int col) const {
    const int n = block_size();
    if (row < 0 || col < 0 || row >= static_cast<int>(rows_.size()) ||
        col >= static_cast<int>(cols_.size())) {
        throw DimensionMismatch("block index out of range");
    }
    return m_.block(row * n, col * n, n, n);
}

Eigen::MatrixXcd HarmonicBlockMatrix::block(const std::string& row, const std::string& col) const {
    return block(row_index(row), col_index(col));
}

}  // namespace hssmmc
