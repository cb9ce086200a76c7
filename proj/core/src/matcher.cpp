#include "mtle/matcher.hpp"

#include <algorithm>
#include <cmath>

#include "mtle/error.hpp"

namespace mtle {

LossMode parse_loss_mode(const std::string& name) {
  if (name == "literal") return LossMode::literal;
  if (name == "one_vs_rest" || name == "ovr") return LossMode::one_vs_rest;
  throw Error(ErrorKind::InvalidArgument,
              "unknown loss mode '" + name + "' (expected literal|one_vs_rest)");
}

const char* to_string(LossMode mode) {
  return mode == LossMode::literal ? "literal" : "one_vs_rest";
}

MatcherParams::MatcherParams(int hidden, bool with_bias)
    : hidden_dim(hidden),
      use_bias(with_bias),
      weight("matcher.weight", 2 * hidden, 1),
      bias("matcher.bias", 1, 1) {}

std::vector<ParamTensor*> MatcherParams::tensors() {
  std::vector<ParamTensor*> list = {&weight};
  if (use_bias) list.push_back(&bias);
  return list;
}

std::vector<const ParamTensor*> MatcherParams::tensors() const {
  auto mutable_list = const_cast<MatcherParams*>(this)->tensors();
  return {mutable_list.begin(), mutable_list.end()};
}

double match_score(const MatcherParams& params, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y) {
  const int m = params.hidden_dim;
  if (x.size() != m || y.size() != m)
    throw Error(ErrorKind::ShapeMismatch,
                "matcher expects two vectors of length " + std::to_string(m) + ", got " +
                    std::to_string(x.size()) + " and " + std::to_string(y.size()));
  double z = params.weight.values.col(0).head(m).dot(x) +
             params.weight.values.col(0).tail(m).dot(y);
  if (params.use_bias) z += params.bias.values(0, 0);
  return 1.0 / (1.0 + std::exp(-z));
}

void match_score_backward(MatcherParams& params, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y, double score, double score_grad,
                          Eigen::VectorXd& dx, Eigen::VectorXd& dy) {
  const int m = params.hidden_dim;
  if (dx.size() != m || dy.size() != m)
    throw Error(ErrorKind::ShapeMismatch, "matcher backward accumulator has wrong length");
  double dz = score_grad * score * (1.0 - score);
  params.weight.grads.col(0).head(m) += dz * x;
  params.weight.grads.col(0).tail(m) += dz * y;
  if (params.use_bias) params.bias.grads(0, 0) += dz;
  dx += dz * params.weight.values.col(0).head(m);
  dy += dz * params.weight.values.col(0).tail(m);
}

namespace {

double clamp_score(double s) {
  return std::min(std::max(s, kScoreFloor), 1.0 - kScoreFloor);
}

bool clamped(double s) { return s < kScoreFloor || s > 1.0 - kScoreFloor; }

}  // namespace

double sample_loss(const std::vector<double>& scores, int gold, LossMode mode) {
  if (gold < 0 || gold >= static_cast<int>(scores.size()))
    throw Error(ErrorKind::GoldOutOfRange, "gold index " + std::to_string(gold) + " for " +
                                               std::to_string(scores.size()) + " labels");
  double loss = -std::log(clamp_score(scores[static_cast<std::size_t>(gold)]));
  if (mode == LossMode::one_vs_rest)
    for (std::size_t j = 0; j < scores.size(); ++j)
      if (static_cast<int>(j) != gold) loss -= std::log(1.0 - clamp_score(scores[j]));
  return loss;
}

std::vector<double> sample_loss_backward(const std::vector<double>& scores, int gold,
                                         LossMode mode) {
  if (gold < 0 || gold >= static_cast<int>(scores.size()))
    throw Error(ErrorKind::GoldOutOfRange, "gold index " + std::to_string(gold) + " for " +
                                               std::to_string(scores.size()) + " labels");
  std::vector<double> grads(scores.size(), 0.0);
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (clamped(scores[j])) continue;  // the clamp makes the loss locally constant
    if (static_cast<int>(j) == gold)
      grads[j] = -1.0 / scores[j];
    else if (mode == LossMode::one_vs_rest)
      grads[j] = 1.0 / (1.0 - scores[j]);
  }
  return grads;
}

double total_loss(const std::vector<TaskLossGroup>& groups) {
  double total = 0.0;
  for (const TaskLossGroup& group : groups) {
    double task_sum = 0.0;
    for (double loss : group.losses) task_sum += loss;
    total += group.weight * task_sum;
  }
  return total;
}

int argmax_score(const std::vector<double>& scores) {
  if (scores.empty()) throw Error(ErrorKind::InvalidArgument, "argmax over no scores");
  int best = 0;
  for (int j = 1; j < static_cast<int>(scores.size()); ++j)
    if (scores[static_cast<std::size_t>(j)] > scores[static_cast<std::size_t>(best)]) best = j;
  return best;
}

MatchMetric parse_metric(const std::string& name) {
  if (name == "cosine") return MatchMetric::cosine;
  if (name == "l2") return MatchMetric::l2;
  throw Error(ErrorKind::InvalidArgument, "unknown metric '" + name + "' (expected cosine|l2)");
}

int unsupervised_match(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& labels,
                       MatchMetric metric) {
  if (labels.empty()) throw Error(ErrorKind::InvalidArgument, "no label vectors to match");
  std::vector<double> scores(labels.size(), 0.0);
  if (metric == MatchMetric::cosine) {
    double xn = x.norm();
    for (std::size_t j = 0; j < labels.size(); ++j) {
      double yn = labels[j].norm();
      scores[j] = (xn == 0.0 || yn == 0.0) ? 0.0 : x.dot(labels[j]) / (xn * yn);
    }
  } else {
    for (std::size_t j = 0; j < labels.size(); ++j) scores[j] = -(x - labels[j]).norm();
  }
  return argmax_score(scores);
}

}  // namespace mtle
