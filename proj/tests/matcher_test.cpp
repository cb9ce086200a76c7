#include <cmath>

#include "doctest.h"
#include "mtle/error.hpp"
#include "mtle/matcher.hpp"

using namespace mtle;

TEST_CASE("zero matcher scores one half everywhere") {
  MatcherParams params(3, true);
  Eigen::VectorXd x = Eigen::VectorXd::Random(3);
  Eigen::VectorXd y = Eigen::VectorXd::Random(3);
  CHECK(match_score(params, x, y) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("opposite halves cancel") {
  MatcherParams params(1, true);
  params.weight.values(0, 0) = 1.0;
  params.weight.values(1, 0) = 1.0;
  Eigen::VectorXd x(1), y(1);
  x << 2.0;
  y << -2.0;
  CHECK(match_score(params, x, y) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("single-sided weight gives sigmoid of the input half") {
  MatcherParams params(1, true);
  params.weight.values(0, 0) = 1.0;
  Eigen::VectorXd x(1), y(1);
  x << 1.0;
  y << 123.0;  // ignored: label half of the weight is zero
  const double expected = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(match_score(params, x, y) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(match_score(params, x, y) == doctest::Approx(0.73106).epsilon(1e-5));
}

TEST_CASE("score depends on the label only through the concatenation") {
  MatcherParams params(2, true);
  params.weight.values << 0.7, -0.3, 0.0, 0.0;  // label half zeroed
  Eigen::VectorXd x(2), y1(2), y2(2);
  x << 0.2, -1.0;
  y1 << 5.0, 5.0;
  y2 << -7.0, 2.0;
  CHECK(match_score(params, x, y1) == match_score(params, x, y2));
}

TEST_CASE("loss arithmetic matches the closed forms") {
  std::vector<double> scores = {0.9, 0.4};
  CHECK(sample_loss(scores, 0, LossMode::literal) ==
        doctest::Approx(-std::log(0.9)).epsilon(1e-12));
  CHECK(sample_loss(scores, 0, LossMode::one_vs_rest) ==
        doctest::Approx(-std::log(0.9) - std::log(0.6)).epsilon(1e-12));
  std::vector<double> flat = {0.5, 0.5, 0.5};
  CHECK(sample_loss(flat, 1, LossMode::literal) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("scores are clamped before the log") {
  std::vector<double> scores = {1.0, 0.0};
  double literal = sample_loss(scores, 0, LossMode::literal);
  CHECK(std::isfinite(literal));
  CHECK(literal == doctest::Approx(-std::log(1.0 - 1e-7)).epsilon(1e-9));
  double ovr = sample_loss(scores, 0, LossMode::one_vs_rest);
  CHECK(std::isfinite(ovr));
  // clamped entries carry no gradient
  auto grads = sample_loss_backward(scores, 0, LossMode::one_vs_rest);
  CHECK(grads[0] == 0.0);
  CHECK(grads[1] == 0.0);
}

TEST_CASE("gold index is validated") {
  std::vector<double> scores = {0.5, 0.5};
  CHECK_THROWS_AS(sample_loss(scores, 2, LossMode::literal), Error);
  CHECK_THROWS_AS(sample_loss(scores, -1, LossMode::literal), Error);
}

TEST_CASE("one_vs_rest dominates literal at identical scores") {
  std::vector<double> scores = {0.8, 0.3, 0.6};
  for (int gold = 0; gold < 3; ++gold)
    CHECK(sample_loss(scores, gold, LossMode::one_vs_rest) >=
          sample_loss(scores, gold, LossMode::literal));
}

TEST_CASE("total loss combines tasks linearly") {
  std::vector<TaskLossGroup> groups = {{"a", 1.0, {0.5, 0.25}}};
  CHECK(total_loss(groups) == doctest::Approx(0.75).epsilon(1e-12));

  groups = {{"a", 1.0, {0.5}}, {"b", 2.0, {0.25}}};
  CHECK(total_loss(groups) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(total_loss({}) == 0.0);

  // doubling a task weight exactly doubles its contribution
  std::vector<TaskLossGroup> base = {{"a", 1.0, {0.4, 0.3}}, {"b", 1.0, {0.2}}};
  std::vector<TaskLossGroup> doubled = {{"a", 2.0, {0.4, 0.3}}, {"b", 1.0, {0.2}}};
  CHECK(total_loss(doubled) - total_loss(base) ==
        doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("argmax breaks ties at the lowest index") {
  CHECK(argmax_score({0.5, 0.5}) == 0);
  CHECK(argmax_score({0.1, 0.7, 0.7}) == 1);
  CHECK(argmax_score({0.9}) == 0);
}

TEST_CASE("score backward matches finite differences") {
  MatcherParams params(3, true);
  Eigen::VectorXd x(3), y(3);
  x << 0.3, -0.2, 0.9;
  y << -0.5, 0.1, 0.4;
  params.weight.values << 0.2, -0.4, 0.6, 0.1, 0.3, -0.2;
  params.bias.values(0, 0) = 0.05;

  const int gold = 0;
  auto loss = [&]() {
    std::vector<double> scores = {match_score(params, x, y)};
    return sample_loss(scores, gold, LossMode::literal);
  };

  params.weight.zero_grad();
  params.bias.zero_grad();
  double score = match_score(params, x, y);
  auto grads = sample_loss_backward({score}, gold, LossMode::literal);
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(3), dy = Eigen::VectorXd::Zero(3);
  match_score_backward(params, x, y, score, grads[0], dx, dy);

  const double eps = 1e-7;
  for (Eigen::Index r = 0; r < 6; ++r) {
    double saved = params.weight.values(r, 0);
    params.weight.values(r, 0) = saved + eps;
    double up = loss();
    params.weight.values(r, 0) = saved - eps;
    double down = loss();
    params.weight.values(r, 0) = saved;
    CHECK(params.weight.grads(r, 0) == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-5));
  }
  for (int i = 0; i < 3; ++i) {
    double saved = x(i);
    x(i) = saved + eps;
    double up = loss();
    x(i) = saved - eps;
    double down = loss();
    x(i) = saved;
    CHECK(dx(i) == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-5));
  }
}

TEST_CASE("unsupervised matching selects by cosine or distance") {
  Eigen::VectorXd x(2), y0(2), y1(2);
  x << 1.0, 0.0;
  y0 << 1.0, 0.0;
  y1 << 0.0, 1.0;
  CHECK(unsupervised_match(x, {y0, y1}, MatchMetric::cosine) == 0);

  y0 << 2.0, 0.0;
  CHECK(unsupervised_match(x, {y0, y1}, MatchMetric::l2) == 0);  // 1 vs sqrt(2)

  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  CHECK(unsupervised_match(zero, {y0, y1}, MatchMetric::cosine) == 0);  // tie-break
}

TEST_CASE("cosine matching is invariant to positive rescaling") {
  Eigen::VectorXd x(3), y0(3), y1(3);
  x << 0.3, 0.5, -0.1;
  y0 << 0.2, 0.6, 0.0;
  y1 << -0.4, 0.1, 0.9;
  int base = unsupervised_match(x, {y0, y1}, MatchMetric::cosine);
  CHECK(unsupervised_match(3.7 * x, {y0 * 0.2, y1 * 5.0}, MatchMetric::cosine) == base);
}
