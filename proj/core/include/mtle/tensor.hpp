#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mtle {

class Rng;

// One trainable tensor: values plus a same-shape gradient accumulator.
// Gradients are zeroed at the start of an optimizer step and hold the sum of
// all per-sample contributions of that step afterwards. Vectors are stored as
// n x 1 matrices.
struct ParamTensor {
  std::string name;
  Eigen::MatrixXd values;
  Eigen::MatrixXd grads;

  ParamTensor() = default;
  ParamTensor(std::string tensor_name, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(tensor_name)),
        values(Eigen::MatrixXd::Zero(rows, cols)),
        grads(Eigen::MatrixXd::Zero(rows, cols)) {}

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  Eigen::Index size() const { return values.size(); }

  void zero_grad() { grads.setZero(); }

  // Truncated-normal fill of every entry, in row-major entry order.
  void init_truncated_normal(Rng& rng, double stddev, double clip_sigmas = 2.0);

  bool values_finite() const { return values.allFinite(); }
  bool grads_finite() const { return grads.allFinite(); }
};

void zero_grads(const std::vector<ParamTensor*>& params);

// Sum of squared values over a set of tensors.
double squared_norm(const std::vector<const ParamTensor*>& params);

// Global gradient norm over a set of tensors.
double grad_norm(const std::vector<ParamTensor*>& params);

}  // namespace mtle
