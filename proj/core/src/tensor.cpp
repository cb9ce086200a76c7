#include "mtle/tensor.hpp"

#include <cmath>

#include "mtle/rng.hpp"

namespace mtle {

void ParamTensor::init_truncated_normal(Rng& rng, double stddev, double clip_sigmas) {
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      values(r, c) = rng.truncated_normal(stddev, clip_sigmas);
}

void zero_grads(const std::vector<ParamTensor*>& params) {
  for (ParamTensor* p : params) p->zero_grad();
}

double squared_norm(const std::vector<const ParamTensor*>& params) {
  double total = 0.0;
  for (const ParamTensor* p : params) total += p->values.squaredNorm();
  return total;
}

double grad_norm(const std::vector<ParamTensor*>& params) {
  double total = 0.0;
  for (ParamTensor* p : params) total += p->grads.squaredNorm();
  return std::sqrt(total);
}

}  // namespace mtle
