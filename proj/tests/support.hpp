#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>

#include "wgrisk/model.hpp"

namespace wgrisk::testing {

/// Small aligned config with an explicit core/spurious split.
inline ModelConfig small_config(int n, int d, int n_minus, double mu_core_sq, double mu_spur_sq, std::uint64_t seed) {
    ModelConfig c = ModelConfig::aligned(d, n, n_minus, 0.0);
    c.mu_core[0] = std::sqrt(mu_core_sq);
    c.mu_spur[0] = std::sqrt(mu_spur_sq);
    c.seed = seed;
    return c;
}

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

} // namespace wgrisk::testing
