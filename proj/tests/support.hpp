#pragma once

#include "hssmmc/config.hpp"
#include "hssmmc/harmonic.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

namespace testing {

inline hssmmc::RunConfig sec3() { return hssmmc::load_config("sec3-simulation"); }
inline hssmmc::RunConfig table1() { return hssmmc::load_config("table1-prototype"); }

inline double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

// Random real periodic signal of the given order.
inline hssmmc::HarmonicVector random_signal(std::mt19937& rng, int order, double w1 = 314.0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    hssmmc::HarmonicVector x(order, w1);
    x.at(0) = u(rng);
    for (int k = 1; k <= order; ++k) {
        x.at(k) = {u(rng), u(rng)};
        x.at(-k) = std::conj(x[k]);
    }
    return x;
}

}  // namespace testing
