#include <cmath>

#include "doctest.h"
#include "mtle/error.hpp"
#include "mtle/gradcheck.hpp"
#include "mtle/model.hpp"
#include "mtle/rng.hpp"

using namespace mtle;

TEST_CASE("checker against the quadratic oracle") {
  // L = 0.5 * ||theta||^2, gradient = theta. Analytic case: FD must agree to
  // far below the default tolerance.
  ParamTensor theta("theta", 2, 1);
  theta.values << 3.0, -2.0;

  auto loss = [&]() { return 0.5 * theta.values.squaredNorm(); };
  auto grad = [&]() {
    theta.zero_grad();
    theta.grads = theta.values;
  };

  GradCheckReport report = finite_difference_check({&theta}, loss, grad);
  CHECK(report.pass);
  CHECK(report.max_rel_error < 1e-8);
  REQUIRE(report.tensors.size() == 1);
  CHECK(report.tensors[0].entries_checked == 2);
  CHECK(theta.grads(0, 0) == 3.0);
  CHECK(theta.grads(1, 0) == -2.0);
}

TEST_CASE("a loss independent of a tensor yields zero gradient everywhere") {
  ParamTensor used("used", 2, 1);
  ParamTensor unused("unused", 3, 1);
  used.values << 1.0, 2.0;
  unused.values << 5.0, 6.0, 7.0;

  auto loss = [&]() { return used.values.squaredNorm(); };
  auto grad = [&]() {
    used.zero_grad();
    unused.zero_grad();
    used.grads = 2.0 * used.values;
  };
  GradCheckReport report = finite_difference_check({&used, &unused}, loss, grad);
  CHECK(report.pass);
  CHECK(report.tensors[1].max_rel_error == 0.0);
}

TEST_CASE("a corrupted gradient entry is caught and reported") {
  ParamTensor theta("theta", 2, 1);
  theta.values << 3.0, -2.0;
  auto loss = [&]() { return 0.5 * theta.values.squaredNorm(); };
  auto grad = [&]() {
    theta.zero_grad();
    theta.grads = theta.values;
    theta.grads(0, 0) *= 2.0;  // fault injection
  };
  GradCheckReport report = finite_difference_check({&theta}, loss, grad);
  CHECK_FALSE(report.pass);
  REQUIRE_FALSE(report.failures.empty());
  CHECK(report.failures[0].tensor == "theta");
  CHECK(report.failures[0].row == 0);
  CHECK(report.failures[0].col == 0);
}

TEST_CASE("a non-deterministic forward pass is refused") {
  ParamTensor theta("theta", 1, 1);
  int calls = 0;
  auto loss = [&]() { return static_cast<double>(++calls); };
  auto grad = [&]() {};
  CHECK_THROWS_AS(finite_difference_check({&theta}, loss, grad), Error);
  try {
    calls = 0;
    finite_difference_check({&theta}, loss, grad);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonDeterministicForward);
  }
}

TEST_CASE("large tensors are sampled but still include the top gradient") {
  ParamTensor big("big", 40, 40);  // 1600 entries > default cap
  Rng rng(8);
  big.init_truncated_normal(rng, 1.0);
  auto loss = [&]() { return 0.5 * big.values.squaredNorm(); };
  auto grad = [&]() {
    big.zero_grad();
    big.grads = big.values;
  };
  GradCheckReport report = finite_difference_check({&big}, loss, grad);
  CHECK(report.pass);
  CHECK(report.tensors[0].entries_checked == 256);
}

TEST_CASE("the full model pipeline passes the check in both loss modes") {
  for (LossMode mode : {LossMode::one_vs_rest, LossMode::literal}) {
    ModelProbeSpec spec;
    spec.loss_mode = mode;
    spec.seed = 31;
    GradCheckReport report = run_model_gradcheck(spec);
    INFO(format_report(report));
    CHECK(report.pass);
    // both lookups, 14 tensors per encoder, matcher weight and bias
    CHECK(report.tensors.size() == 2 + 14 + 14 + 2);
  }
}

TEST_CASE("model probe catches an injected gradient fault") {
  ModelProbeSpec spec;
  spec.seed = 32;
  spec.corrupt_tensor = "lstm_input.w_cell";
  GradCheckReport report = run_model_gradcheck(spec);
  CHECK_FALSE(report.pass);
  REQUIRE_FALSE(report.failures.empty());
  CHECK(report.failures[0].tensor == "lstm_input.w_cell");
}

TEST_CASE("model probe passes under the option flags") {
  ModelProbeSpec spec;
  spec.seed = 33;
  spec.lstm.full_peepholes = true;
  spec.lstm.peephole_current_cell = true;
  spec.lstm.candidate_bias = true;
  CHECK(run_model_gradcheck(spec).pass);

  ModelProbeSpec tied;
  tied.seed = 34;
  tied.tie_lookups = true;
  tied.lstm.mean_pool = true;
  GradCheckReport report = run_model_gradcheck(tied);
  CHECK(report.pass);
  CHECK(report.tensors.size() == 1 + 14 + 14 + 2);  // one shared table

  ModelProbeSpec no_bias;
  no_bias.seed = 35;
  no_bias.matcher_bias = false;
  CHECK(run_model_gradcheck(no_bias).pass);
}

TEST_CASE("an over-tight tolerance fails on FD truncation error") {
  ModelProbeSpec spec;
  spec.seed = 36;
  FdCheckConfig config;
  config.tolerance = 1e-12;  // beyond what central differences can certify
  GradCheckReport report = run_model_gradcheck(spec, config);
  CHECK_FALSE(report.pass);
}

TEST_CASE("batch gradients are additive across samples") {
  ModelProbeSpec spec;
  spec.seed = 37;
  spec.batch_size = 2;

  // Rebuild the probe manually to get access to the model and batch.
  Rng rng = Rng::stream(spec.seed, "gradcheck-probe");
  Vocabulary vocab;
  for (int i = 0; i < 12; ++i) vocab.add("tok" + std::to_string(i));
  ModelOptions options;
  options.embedding_dim = 6;
  options.hidden_dim = 5;
  Model model(vocab, options);
  model.init_parameters(0.2, rng);

  TaskSpec task;
  task.id = "probe";
  task.weight = 1.0;
  for (int j = 0; j < 2; ++j) {
    std::string name = "tok" + std::to_string(j);
    task.label_names.push_back(name);
    task.label_words.push_back({name});
    task.label_tokens.push_back({model.vocab.id(name)});
  }
  model.registry.add(task);

  std::vector<Example> batch;
  for (int b = 0; b < 2; ++b) {
    Example ex;
    ex.task_id = "probe";
    for (int t = 0; t < 4; ++t)
      ex.tokens.push_back(2 + static_cast<int>(rng.uniform_int(12)));
    ex.gold = b % 2;
    batch.push_back(ex);
  }

  model.zero_grads();
  accumulate_batch_gradients(model, task, batch);
  std::vector<Eigen::MatrixXd> joint;
  for (ParamTensor* t : model.parameters()) joint.push_back(t->grads);

  model.zero_grads();
  accumulate_batch_gradients(model, task, {batch[0]});
  std::vector<Eigen::MatrixXd> first;
  for (ParamTensor* t : model.parameters()) first.push_back(t->grads);

  model.zero_grads();
  accumulate_batch_gradients(model, task, {batch[1]});
  std::vector<Eigen::MatrixXd> second;
  for (ParamTensor* t : model.parameters()) second.push_back(t->grads);

  for (std::size_t i = 0; i < joint.size(); ++i) {
    double scale = std::max(1.0, joint[i].cwiseAbs().maxCoeff());
    CHECK((joint[i] - first[i] - second[i]).cwiseAbs().maxCoeff() / scale < 1e-12);
  }
}
