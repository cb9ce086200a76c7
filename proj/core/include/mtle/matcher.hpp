#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mtle/tensor.hpp"

namespace mtle {

enum class LossMode {
  literal,      // -log s_gold
  one_vs_rest,  // -log s_gold - sum_{j != gold} log(1 - s_j)  (default)
};

LossMode parse_loss_mode(const std::string& name);
const char* to_string(LossMode mode);

// Scores are clamped to [kScoreFloor, 1 - kScoreFloor] before any log.
inline constexpr double kScoreFloor = 1e-7;

// Scoring layer over the concatenated (sequence, label) representations:
// s = sigmoid(weight . (x ++ y) + bias). The bias is on by default and can be
// disabled to recover the bias-free form.
struct MatcherParams {
  int hidden_dim = 0;
  bool use_bias = true;
  ParamTensor weight;  // 2m x 1
  ParamTensor bias;    // 1 x 1

  MatcherParams() = default;
  MatcherParams(int hidden_dim, bool use_bias);

  std::vector<ParamTensor*> tensors();
  std::vector<const ParamTensor*> tensors() const;
};

double match_score(const MatcherParams& params, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y);

// Given dLoss/ds for one (x, y) pair, accumulates parameter gradients and
// adds the input-side gradients onto dx/dy.
void match_score_backward(MatcherParams& params, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y, double score, double score_grad,
                          Eigen::VectorXd& dx, Eigen::VectorXd& dy);

double sample_loss(const std::vector<double>& scores, int gold, LossMode mode);

// dLoss/ds_j per label; entries whose score sits outside the clamp window get
// zero gradient, matching the forward clamp exactly.
std::vector<double> sample_loss_backward(const std::vector<double>& scores, int gold,
                                         LossMode mode);

struct TaskLossGroup {
  std::string task_id;
  double weight = 1.0;  // this task's loss weight
  std::vector<double> losses;
};

// L = sum_k weight_k * sum_i loss_i^(k).
double total_loss(const std::vector<TaskLossGroup>& groups);

// Argmax with lowest-index tie break.
int argmax_score(const std::vector<double>& scores);

enum class MatchMetric { cosine, l2 };

MatchMetric parse_metric(const std::string& name);

// Unsupervised nearest-label matching over pooled vectors. Cosine similarity
// against a zero vector is defined as 0 for that pair.
int unsupervised_match(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& labels,
                       MatchMetric metric);

}  // namespace mtle
