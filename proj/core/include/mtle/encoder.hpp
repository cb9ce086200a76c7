#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mtle/tensor.hpp"

namespace mtle {

struct LstmOptions {
  // Peepholes act element-wise on the previous cell by default; full m x m
  // peephole matrices behind this flag.
  bool full_peepholes = false;
  // Output gate peeps at c_{t-1} by default; this flag switches it to c_t.
  bool peephole_current_cell = false;
  // The candidate cell has no bias by default; this flag adds one.
  bool candidate_bias = false;
  // Sequence representation is the hidden state at the last valid step by
  // default; this flag switches to mean-over-time pooling of valid steps.
  bool mean_pool = false;

  bool operator==(const LstmOptions&) const = default;
};

// All trainable tensors of one peephole LSTM with hidden size m over
// d-dimensional inputs.
struct LstmParams {
  int input_dim = 0;
  int hidden_dim = 0;
  LstmOptions options;

  ParamTensor w_in, w_forget, w_out, w_cell;  // m x d input weights
  ParamTensor u_in, u_forget, u_out, u_cell;  // m x m recurrent weights
  ParamTensor peep_in, peep_forget, peep_out; // m x 1 (or m x m) cell peepholes
  ParamTensor b_in, b_forget, b_out;          // m x 1 gate biases
  ParamTensor b_cell;                         // m x 1, used only with candidate_bias

  LstmParams() = default;
  LstmParams(const std::string& prefix, int input_dim, int hidden_dim, LstmOptions options = {});

  // Trainable tensors in a fixed order (b_cell only when enabled).
  std::vector<ParamTensor*> tensors();
  std::vector<const ParamTensor*> tensors() const;

  // Weight matrices subject to L2 regularization (biases excluded).
  std::vector<ParamTensor*> weight_tensors();
};

struct LstmState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;

  static LstmState zero(int hidden_dim);
};

// One transition: gates from x_t, h_{t-1} and the peeped cell; returns
// (h_t, c_t).
LstmState lstm_step(const LstmParams& params, const Eigen::VectorXd& x, const LstmState& prev);

// Everything the backward pass needs, recorded per step. Masked (PAD) steps
// copy state through unchanged and contribute nothing.
struct LstmTape {
  std::vector<Eigen::VectorXd> x;
  std::vector<std::uint8_t> valid;
  std::vector<Eigen::VectorXd> gate_in, gate_forget, gate_out, candidate;
  std::vector<Eigen::VectorXd> cell, hidden;  // post-step states
  int valid_steps = 0;
  int last_valid = -1;
};

// Encodes a variable-length sequence into a fixed m-vector (h at the last
// valid step, or the mean over valid steps under mean_pool). Records a tape
// when one is supplied. Throws EmptySequence when no step is valid.
Eigen::VectorXd lstm_encode(const LstmParams& params, const std::vector<Eigen::VectorXd>& inputs,
                            const std::vector<std::uint8_t>& valid, LstmTape* tape = nullptr);
Eigen::VectorXd lstm_encode(const LstmParams& params, const std::vector<Eigen::VectorXd>& inputs,
                            LstmTape* tape = nullptr);

// Full BPTT. Accumulates parameter gradients into `params` and writes
// per-step input gradients into `input_grads` (zero at masked steps).
// Gradients of parameters used at several timesteps are summed over
// timesteps.
void lstm_backward(LstmParams& params, const LstmTape& tape,
                   const Eigen::VectorXd& output_grad,
                   std::vector<Eigen::VectorXd>* input_grads = nullptr);

}  // namespace mtle
