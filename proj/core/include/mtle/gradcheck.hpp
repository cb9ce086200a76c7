#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mtle/matcher.hpp"
#include "mtle/tensor.hpp"

namespace mtle {

struct FdCheckConfig {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  // Tensors with more entries than this get a seeded sample of this many
  // entries (the largest-gradient entry is always included).
  int max_entries_per_tensor = 256;
  std::uint64_t seed = 1;
};

struct FdEntry {
  std::string tensor;
  int row = 0;
  int col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct FdTensorSummary {
  std::string tensor;
  int entries_checked = 0;
  double max_rel_error = 0.0;
  FdEntry worst;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<FdTensorSummary> tensors;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = true;

  // Entries exceeding the tolerance, worst first.
  std::vector<FdEntry> failures;
};

// Central-difference verification of analytic gradients.
//   loss_fn : pure forward pass over the current parameter values
//   grad_fn : zeroes and repopulates every tensor's grads for the same loss
// rel error = |g_a - g_n| / max(|g_a| + |g_n|, 1e-8). Throws
// NonDeterministicForward when two identical forward passes disagree.
GradCheckReport finite_difference_check(const std::vector<ParamTensor*>& params,
                                        const std::function<double()>& loss_fn,
                                        const std::function<void()>& grad_fn,
                                        const FdCheckConfig& config = {});

std::string format_report(const GradCheckReport& report);

// Builds a tiny randomly initialized model and runs the checker over every
// trainable tensor of the full pipeline (both lookups, both encoders,
// matcher) including the L2 term.
struct ModelProbeSpec {
  int embedding_dim = 8;
  int hidden_dim = 6;
  int sequence_len = 5;   // valid steps; two PAD steps are appended when len >= 3
  int num_labels = 3;
  int batch_size = 1;
  double l2_weight = 1e-5;
  double init_std = 0.2;
  // Probe task weight. Deliberately small: scaling the objective scales the
  // forward-pass rounding noise below the checker's 1e-12 absolute window,
  // while leaving every relative comparison unchanged.
  double task_weight = 0.005;
  std::uint64_t seed = 1;
  LossMode loss_mode = LossMode::one_vs_rest;
  bool tie_lookups = false;
  bool matcher_bias = true;
  struct LstmFlags {
    bool full_peepholes = false;
    bool peephole_current_cell = false;
    bool candidate_bias = false;
    bool mean_pool = false;
  } lstm;
  // When non-empty, the named tensor's largest gradient entry is doubled
  // after the backward pass (fault injection; the check must then fail).
  std::string corrupt_tensor;
};

GradCheckReport run_model_gradcheck(const ModelProbeSpec& spec, const FdCheckConfig& config = {});

}  // namespace mtle
