#pragma once

#include <Eigen/Dense>

namespace qdon {

// Feature-major activations: one row per wire or feature, one column per
// sample. Row-major storage keeps each wire contiguous across the batch, which
// is what the Givens sweeps touch.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace qdon
