#include "mtle/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <sstream>

#include "mtle/error.hpp"
#include "mtle/model.hpp"
#include "mtle/rng.hpp"

namespace mtle {

namespace {

double rel_error(double analytic, double numeric) {
  double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
  return std::abs(analytic - numeric) / denom;
}

bool bit_identical(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

GradCheckReport finite_difference_check(const std::vector<ParamTensor*>& params,
                                        const std::function<double()>& loss_fn,
                                        const std::function<void()>& grad_fn,
                                        const FdCheckConfig& config) {
  double probe_a = loss_fn();
  double probe_b = loss_fn();
  if (!bit_identical(probe_a, probe_b))
    throw Error(ErrorKind::NonDeterministicForward,
                "two identical forward passes produced different losses");

  grad_fn();

  GradCheckReport report;
  report.tolerance = config.tolerance;
  Rng rng = Rng::stream(config.seed, "fdcheck");

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ParamTensor& tensor = *params[pi];
    const Eigen::Index total = tensor.size();
    FdTensorSummary summary;
    summary.tensor = tensor.name;

    // Entry selection: everything for small tensors, otherwise a seeded
    // sample that always contains the largest-gradient entry.
    std::vector<Eigen::Index> chosen;
    if (total <= config.max_entries_per_tensor) {
      chosen.resize(static_cast<std::size_t>(total));
      for (Eigen::Index i = 0; i < total; ++i) chosen[static_cast<std::size_t>(i)] = i;
    } else {
      Eigen::Index top = 0;
      tensor.grads.reshaped().cwiseAbs().maxCoeff(&top);
      std::set<Eigen::Index> picked = {top};
      while (static_cast<int>(picked.size()) < config.max_entries_per_tensor)
        picked.insert(static_cast<Eigen::Index>(
            rng.uniform_int(static_cast<std::uint64_t>(total))));
      chosen.assign(picked.begin(), picked.end());
    }

    for (Eigen::Index flat : chosen) {
      // Eigen default storage is column-major; reshaped() flattens likewise.
      const Eigen::Index r = flat % tensor.rows();
      const Eigen::Index c = flat / tensor.rows();
      const double saved = tensor.values(r, c);
      tensor.values(r, c) = saved + config.epsilon;
      const double loss_plus = loss_fn();
      tensor.values(r, c) = saved - config.epsilon;
      const double loss_minus = loss_fn();
      tensor.values(r, c) = saved;

      FdEntry entry;
      entry.tensor = tensor.name;
      entry.row = static_cast<int>(r);
      entry.col = static_cast<int>(c);
      entry.analytic = tensor.grads(r, c);
      entry.numeric = (loss_plus - loss_minus) / (2.0 * config.epsilon);
      entry.rel_error = rel_error(entry.analytic, entry.numeric);

      ++summary.entries_checked;
      if (entry.rel_error >= summary.max_rel_error) {
        summary.max_rel_error = entry.rel_error;
        summary.worst = entry;
      }
      if (entry.rel_error > config.tolerance) report.failures.push_back(entry);
    }

    summary.pass = summary.max_rel_error <= config.tolerance;
    report.max_rel_error = std::max(report.max_rel_error, summary.max_rel_error);
    report.tensors.push_back(std::move(summary));
  }

  std::sort(report.failures.begin(), report.failures.end(),
            [](const FdEntry& a, const FdEntry& b) { return a.rel_error > b.rel_error; });
  report.pass = report.max_rel_error <= config.tolerance;
  return report;
}

std::string format_report(const GradCheckReport& report) {
  std::size_t name_width = 6;
  for (const auto& t : report.tensors) name_width = std::max(name_width, t.tensor.size());
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-*s %8s %12s %8s\n", static_cast<int>(name_width), "tensor",
                "entries", "max relerr", "status");
  out << line;
  for (const auto& t : report.tensors) {
    std::snprintf(line, sizeof(line), "%-*s %8d %12.3e %8s\n", static_cast<int>(name_width),
                  t.tensor.c_str(), t.entries_checked, t.max_rel_error,
                  t.pass ? "ok" : "FAIL");
    out << line;
  }
  std::snprintf(line, sizeof(line), "max relative error %.3e (tolerance %.1e): %s\n",
                report.max_rel_error, report.tolerance, report.pass ? "PASS" : "FAIL");
  out << line;
  for (std::size_t i = 0; i < report.failures.size() && i < 8; ++i) {
    const FdEntry& e = report.failures[i];
    std::snprintf(line, sizeof(line),
                  "  failed %s[%d,%d]: analytic %.9e vs numeric %.9e (relerr %.3e)\n",
                  e.tensor.c_str(), e.row, e.col, e.analytic, e.numeric, e.rel_error);
    out << line;
  }
  return out.str();
}

GradCheckReport run_model_gradcheck(const ModelProbeSpec& spec, const FdCheckConfig& config) {
  Rng rng = Rng::stream(spec.seed, "gradcheck-probe");

  // Small vocabulary of synthetic tokens; enough for labels plus inputs.
  Vocabulary vocab;
  const int content_tokens = std::max(12, spec.num_labels * 2 + 4);
  for (int i = 0; i < content_tokens; ++i) vocab.add("tok" + std::to_string(i));

  ModelOptions options;
  options.embedding_dim = spec.embedding_dim;
  options.hidden_dim = spec.hidden_dim;
  options.tie_lookups = spec.tie_lookups;
  options.matcher_bias = spec.matcher_bias;
  options.loss_mode = spec.loss_mode;
  options.lstm.full_peepholes = spec.lstm.full_peepholes;
  options.lstm.peephole_current_cell = spec.lstm.peephole_current_cell;
  options.lstm.candidate_bias = spec.lstm.candidate_bias;
  options.lstm.mean_pool = spec.lstm.mean_pool;

  Model model(vocab, options);
  model.init_parameters(spec.init_std, rng);

  TaskSpec task;
  task.id = "probe";
  task.weight = spec.task_weight;  // non-unit, so the scaling path is verified too
  for (int j = 0; j < spec.num_labels; ++j) {
    std::string name = "tok" + std::to_string(j);
    std::vector<int> ids = {model.vocab.id(name)};
    if (j % 2 == 1) ids.push_back(model.vocab.id("tok" + std::to_string(spec.num_labels + j)));
    task.label_names.push_back(name);
    task.label_words.push_back({name});
    task.label_tokens.push_back(ids);
  }
  model.registry.add(task);

  std::vector<Example> batch;
  for (int b = 0; b < std::max(1, spec.batch_size); ++b) {
    Example example;
    example.task_id = task.id;
    for (int t = 0; t < spec.sequence_len; ++t)
      example.tokens.push_back(
          2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(content_tokens))));
    if (spec.sequence_len >= 3) {
      example.tokens.push_back(Vocabulary::kPadId);
      example.tokens.push_back(Vocabulary::kPadId);
    }
    example.gold = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.num_labels)));
    batch.push_back(std::move(example));
  }

  std::vector<ParamTensor*> params = model.parameters();
  std::vector<ParamTensor*> regularized = model.regularized_parameters();

  auto loss_fn = [&]() {
    double loss = batch_loss(model, model.registry.at("probe"), batch);
    for (ParamTensor* t : regularized) loss += spec.l2_weight * t->values.squaredNorm();
    return loss;
  };
  auto grad_fn = [&]() {
    model.zero_grads();
    accumulate_batch_gradients(model, model.registry.at("probe"), batch);
    for (ParamTensor* t : regularized) t->grads += 2.0 * spec.l2_weight * t->values;
    if (!spec.corrupt_tensor.empty()) {
      bool found = false;
      for (ParamTensor* t : params)
        if (t->name == spec.corrupt_tensor) {
          Eigen::Index top = 0;
          t->grads.reshaped().cwiseAbs().maxCoeff(&top);
          if (t->grads.reshaped()(top) == 0.0)
            throw Error(ErrorKind::InvalidArgument,
                        "cannot corrupt '" + t->name + "': gradient is identically zero");
          t->grads.reshaped()(top) *= 2.0;
          found = true;
          break;
        }
      if (!found)
        throw Error(ErrorKind::InvalidArgument,
                    "no tensor named '" + spec.corrupt_tensor + "' to corrupt");
    }
  };

  return finite_difference_check(params, loss_fn, grad_fn, config);
}

}  // namespace mtle
