#include <cmath>

#include "doctest.h"
#include "mtle/encoder.hpp"
#include "mtle/error.hpp"
#include "mtle/rng.hpp"

using namespace mtle;

namespace {

std::vector<Eigen::VectorXd> random_inputs(int steps, int dim, Rng& rng) {
  std::vector<Eigen::VectorXd> xs;
  for (int t = 0; t < steps; ++t) {
    Eigen::VectorXd x(dim);
    for (int i = 0; i < dim; ++i) x(i) = rng.uniform(-1.0, 1.0);
    xs.push_back(x);
  }
  return xs;
}

LstmParams random_params(int dim, int hidden, std::uint64_t seed, LstmOptions options = {}) {
  LstmParams params("lstm", dim, hidden, options);
  Rng rng(seed);
  for (ParamTensor* t : params.tensors()) t->init_truncated_normal(rng, 0.4);
  return params;
}

}  // namespace

TEST_CASE("zero parameters give half-open gates and a zero hidden state") {
  LstmParams params("lstm", 3, 2);
  Eigen::VectorXd x(3);
  x << 0.3, -1.0, 2.0;
  LstmState out = lstm_step(params, x, LstmState::zero(2));
  CHECK(out.h.isZero(0.0));
  CHECK(out.c.isZero(0.0));
}

TEST_CASE("hand-evaluated one-unit step") {
  // m=1, d=1, only the candidate input weight set to 1:
  // gates sigmoid(0)=0.5, candidate tanh(1), cell 0.5*tanh(1),
  // hidden 0.5*tanh(0.5*tanh(1)).
  LstmParams params("lstm", 1, 1);
  params.w_cell.values(0, 0) = 1.0;
  Eigen::VectorXd x(1);
  x << 1.0;
  LstmState out = lstm_step(params, x, LstmState::zero(1));

  const double candidate = std::tanh(1.0);
  const double cell = 0.5 * candidate;
  const double hidden = 0.5 * std::tanh(cell);
  CHECK(out.c(0) == doctest::Approx(cell).epsilon(1e-12));
  CHECK(out.h(0) == doctest::Approx(hidden).epsilon(1e-12));
  // to five decimals: 0.18170
  CHECK(std::abs(out.h(0) - 0.18170) < 1e-5);
}

TEST_CASE("saturated forget gate retains the memory cell") {
  LstmParams params("lstm", 1, 1);
  params.b_forget.values(0, 0) = 50.0;   // forget gate pinned to 1
  params.b_in.values(0, 0) = -50.0;      // input gate pinned to 0
  Eigen::VectorXd x(1);
  x << 0.7;
  LstmState prev{Eigen::VectorXd::Constant(1, 1000.0), Eigen::VectorXd::Constant(1, 1000.0)};
  LstmState out = lstm_step(params, x, prev);
  CHECK(out.c(0) == doctest::Approx(1000.0).epsilon(1e-9));
}

TEST_CASE("hidden entries stay inside (-1, 1)") {
  Rng rng(21);
  LstmParams params = random_params(4, 5, 77);
  LstmState state = LstmState::zero(5);
  for (const auto& x : random_inputs(50, 4, rng)) {
    state = lstm_step(params, x, state);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(state.h(i)) < 1.0);
  }
}

TEST_CASE("length-1 encoding equals a single step") {
  Rng rng(31);
  LstmParams params = random_params(4, 3, 99);
  auto xs = random_inputs(1, 4, rng);
  Eigen::VectorXd encoded = lstm_encode(params, xs);
  LstmState stepped = lstm_step(params, xs[0], LstmState::zero(3));
  CHECK((encoded - stepped.h).norm() == 0.0);
}

TEST_CASE("encoding matches manual step composition") {
  Rng rng(32);
  LstmParams params = random_params(4, 3, 100);
  auto xs = random_inputs(2, 4, rng);
  Eigen::VectorXd encoded = lstm_encode(params, xs);
  LstmState state = LstmState::zero(3);
  state = lstm_step(params, xs[0], state);
  state = lstm_step(params, xs[1], state);
  CHECK((encoded - state.h).norm() == 0.0);
}

TEST_CASE("trailing padding leaves the encoding bit-identical") {
  Rng rng(33);
  LstmParams params = random_params(4, 3, 101);
  auto xs = random_inputs(5, 4, rng);
  Eigen::VectorXd plain = lstm_encode(params, xs);

  auto padded = xs;
  padded.push_back(Eigen::VectorXd::Zero(4));
  padded.push_back(Eigen::VectorXd::Zero(4));
  std::vector<std::uint8_t> mask = {1, 1, 1, 1, 1, 0, 0};
  Eigen::VectorXd masked = lstm_encode(params, padded, mask);
  CHECK((plain - masked).norm() == 0.0);
}

TEST_CASE("an all-masked sequence is rejected") {
  LstmParams params("lstm", 2, 2);
  std::vector<Eigen::VectorXd> xs = {Eigen::VectorXd::Zero(2)};
  CHECK_THROWS_AS(lstm_encode(params, xs, std::vector<std::uint8_t>{0}), Error);
}

TEST_CASE("backward rejects a wrong-shaped upstream gradient") {
  Rng rng(34);
  LstmParams params = random_params(3, 4, 102);
  LstmTape tape;
  lstm_encode(params, random_inputs(3, 3, rng), &tape);
  CHECK_THROWS_AS(lstm_backward(params, tape, Eigen::VectorXd::Zero(5)), Error);
}

// Oracle: central finite differences on a scalar probe of the encoder
// output, checked for every tensor including the peepholes, across several
// option combinations and sequence lengths.
namespace {

void check_bptt(std::uint64_t seed, int steps, LstmOptions options) {
  const int dim = 4, hidden = 3;
  LstmParams params = random_params(dim, hidden, seed, options);
  Rng rng(seed + 1);
  auto xs = random_inputs(steps, dim, rng);
  Eigen::VectorXd probe(hidden);
  for (int i = 0; i < hidden; ++i) probe(i) = rng.uniform(-1.0, 1.0);

  auto loss = [&]() { return probe.dot(lstm_encode(params, xs)); };

  for (ParamTensor* t : params.tensors()) t->zero_grad();
  LstmTape tape;
  lstm_encode(params, xs, &tape);
  lstm_backward(params, tape, probe);

  const double eps = 1e-6;
  for (ParamTensor* t : params.tensors()) {
    for (Eigen::Index r = 0; r < t->rows(); ++r)
      for (Eigen::Index c = 0; c < t->cols(); ++c) {
        double saved = t->values(r, c);
        t->values(r, c) = saved + eps;
        double up = loss();
        t->values(r, c) = saved - eps;
        double down = loss();
        t->values(r, c) = saved;
        double numeric = (up - down) / (2 * eps);
        double analytic = t->grads(r, c);
        INFO(t->name, "[", r, ",", c, "] steps=", steps);
        // absolute floor absorbs FD rounding noise on near-zero entries
        CHECK(std::abs(analytic - numeric) <
              1e-7 + 1e-5 * (std::abs(analytic) + std::abs(numeric)));
      }
  }
}

}  // namespace

TEST_CASE("BPTT matches finite differences for every tensor") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL})
    for (int steps : {1, 2, 7}) check_bptt(seed, steps, LstmOptions{});
}

TEST_CASE("BPTT matches finite differences under every option flag") {
  LstmOptions full;
  full.full_peepholes = true;
  check_bptt(11, 4, full);

  LstmOptions current;
  current.peephole_current_cell = true;
  check_bptt(12, 4, current);

  LstmOptions bias;
  bias.candidate_bias = true;
  check_bptt(13, 4, bias);

  LstmOptions mean;
  mean.mean_pool = true;
  check_bptt(14, 4, mean);

  LstmOptions everything;
  everything.full_peepholes = true;
  everything.peephole_current_cell = true;
  everything.candidate_bias = true;
  everything.mean_pool = true;
  check_bptt(15, 4, everything);
}

TEST_CASE("BPTT through masked steps matches finite differences") {
  const int dim = 3, hidden = 3;
  LstmParams params = random_params(dim, hidden, 55);
  Rng rng(56);
  auto xs = random_inputs(5, dim, rng);
  std::vector<std::uint8_t> mask = {1, 0, 1, 1, 0};
  Eigen::VectorXd probe(hidden);
  for (int i = 0; i < hidden; ++i) probe(i) = rng.uniform(-1.0, 1.0);

  for (ParamTensor* t : params.tensors()) t->zero_grad();
  LstmTape tape;
  lstm_encode(params, xs, mask, &tape);
  std::vector<Eigen::VectorXd> input_grads;
  lstm_backward(params, tape, probe, &input_grads);

  CHECK(input_grads[1].isZero(0.0));
  CHECK(input_grads[4].isZero(0.0));

  const double eps = 1e-6;
  auto loss = [&]() { return probe.dot(lstm_encode(params, xs, mask)); };
  ParamTensor& t = params.u_cell;
  double saved = t.values(1, 2);
  t.values(1, 2) = saved + eps;
  double up = loss();
  t.values(1, 2) = saved - eps;
  double down = loss();
  t.values(1, 2) = saved;
  double numeric = (up - down) / (2 * eps);
  CHECK(std::abs(t.grads(1, 2) - numeric) <
        1e-7 + 1e-5 * (std::abs(t.grads(1, 2)) + std::abs(numeric)));
}
