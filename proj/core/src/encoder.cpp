#include "mtle/encoder.hpp"

#include <cmath>

#include "mtle/error.hpp"

namespace mtle {

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Eigen::VectorXd tanh_vec(const Eigen::VectorXd& z) {
  return z.unaryExpr([](double v) { return std::tanh(v); });
}

// peep(v): element-wise by default, matrix product with full peepholes.
Eigen::VectorXd peep_apply(const LstmParams& p, const ParamTensor& peep,
                           const Eigen::VectorXd& v) {
  if (p.options.full_peepholes) return peep.values * v;
  return peep.values.col(0).cwiseProduct(v);
}

void peep_grad(const LstmParams& p, ParamTensor& peep, const Eigen::VectorXd& da,
               const Eigen::VectorXd& v) {
  if (p.options.full_peepholes)
    peep.grads += da * v.transpose();
  else
    peep.grads.col(0) += da.cwiseProduct(v);
}

Eigen::VectorXd peep_carry(const LstmParams& p, const ParamTensor& peep,
                           const Eigen::VectorXd& da) {
  if (p.options.full_peepholes) return peep.values.transpose() * da;
  return peep.values.col(0).cwiseProduct(da);
}

struct StepActivations {
  Eigen::VectorXd gate_in, gate_forget, gate_out, candidate, cell, hidden;
};

StepActivations step_forward(const LstmParams& p, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev) {
  if (x.size() != p.input_dim)
    throw Error(ErrorKind::ShapeMismatch, "lstm input has length " + std::to_string(x.size()) +
                                              ", expected " + std::to_string(p.input_dim));
  StepActivations act;
  act.gate_in = sigmoid(p.w_in.values * x + p.u_in.values * h_prev +
                        peep_apply(p, p.peep_in, c_prev) + p.b_in.values.col(0));
  act.gate_forget = sigmoid(p.w_forget.values * x + p.u_forget.values * h_prev +
                            peep_apply(p, p.peep_forget, c_prev) + p.b_forget.values.col(0));
  Eigen::VectorXd candidate_pre = p.w_cell.values * x + p.u_cell.values * h_prev;
  if (p.options.candidate_bias) candidate_pre += p.b_cell.values.col(0);
  act.candidate = tanh_vec(candidate_pre);
  act.cell = act.gate_forget.cwiseProduct(c_prev) + act.gate_in.cwiseProduct(act.candidate);
  const Eigen::VectorXd& peeped_cell = p.options.peephole_current_cell ? act.cell : c_prev;
  act.gate_out = sigmoid(p.w_out.values * x + p.u_out.values * h_prev +
                         peep_apply(p, p.peep_out, peeped_cell) + p.b_out.values.col(0));
  act.hidden = act.gate_out.cwiseProduct(tanh_vec(act.cell));
  return act;
}

}  // namespace

LstmParams::LstmParams(const std::string& prefix, int in_dim, int hid_dim, LstmOptions opts)
    : input_dim(in_dim), hidden_dim(hid_dim), options(opts) {
  const int peep_cols = opts.full_peepholes ? hid_dim : 1;
  w_in = ParamTensor(prefix + ".w_in", hid_dim, in_dim);
  w_forget = ParamTensor(prefix + ".w_forget", hid_dim, in_dim);
  w_out = ParamTensor(prefix + ".w_out", hid_dim, in_dim);
  w_cell = ParamTensor(prefix + ".w_cell", hid_dim, in_dim);
  u_in = ParamTensor(prefix + ".u_in", hid_dim, hid_dim);
  u_forget = ParamTensor(prefix + ".u_forget", hid_dim, hid_dim);
  u_out = ParamTensor(prefix + ".u_out", hid_dim, hid_dim);
  u_cell = ParamTensor(prefix + ".u_cell", hid_dim, hid_dim);
  peep_in = ParamTensor(prefix + ".peep_in", hid_dim, peep_cols);
  peep_forget = ParamTensor(prefix + ".peep_forget", hid_dim, peep_cols);
  peep_out = ParamTensor(prefix + ".peep_out", hid_dim, peep_cols);
  b_in = ParamTensor(prefix + ".b_in", hid_dim, 1);
  b_forget = ParamTensor(prefix + ".b_forget", hid_dim, 1);
  b_out = ParamTensor(prefix + ".b_out", hid_dim, 1);
  b_cell = ParamTensor(prefix + ".b_cell", hid_dim, 1);
}

std::vector<ParamTensor*> LstmParams::tensors() {
  std::vector<ParamTensor*> list = {&w_in,   &w_forget,   &w_out,  &w_cell,     &u_in, &u_forget,
                                    &u_out,  &u_cell,     &peep_in, &peep_forget, &peep_out,
                                    &b_in,   &b_forget,   &b_out};
  if (options.candidate_bias) list.push_back(&b_cell);
  return list;
}

std::vector<const ParamTensor*> LstmParams::tensors() const {
  auto mutable_list = const_cast<LstmParams*>(this)->tensors();
  return {mutable_list.begin(), mutable_list.end()};
}

std::vector<ParamTensor*> LstmParams::weight_tensors() {
  return {&w_in, &w_forget, &w_out,       &w_cell,  &u_in,    &u_forget,
          &u_out, &u_cell,  &peep_in, &peep_forget, &peep_out};
}

LstmState LstmState::zero(int hidden_dim) {
  return {Eigen::VectorXd::Zero(hidden_dim), Eigen::VectorXd::Zero(hidden_dim)};
}

LstmState lstm_step(const LstmParams& params, const Eigen::VectorXd& x, const LstmState& prev) {
  StepActivations act = step_forward(params, x, prev.h, prev.c);
  return {act.hidden, act.cell};
}

Eigen::VectorXd lstm_encode(const LstmParams& params, const std::vector<Eigen::VectorXd>& inputs,
                            const std::vector<std::uint8_t>& valid, LstmTape* tape) {
  if (inputs.size() != valid.size())
    throw Error(ErrorKind::ShapeMismatch, "lstm mask length " + std::to_string(valid.size()) +
                                              " for " + std::to_string(inputs.size()) + " steps");
  const int steps = static_cast<int>(inputs.size());
  LstmState state = LstmState::zero(params.hidden_dim);
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(params.hidden_dim);
  int valid_steps = 0;
  int last_valid = -1;

  if (tape) {
    tape->x = inputs;
    tape->valid = valid;
    tape->gate_in.assign(inputs.size(), {});
    tape->gate_forget.assign(inputs.size(), {});
    tape->gate_out.assign(inputs.size(), {});
    tape->candidate.assign(inputs.size(), {});
    tape->cell.assign(inputs.size(), {});
    tape->hidden.assign(inputs.size(), {});
  }

  for (int t = 0; t < steps; ++t) {
    if (valid[static_cast<std::size_t>(t)]) {
      StepActivations act = step_forward(params, inputs[static_cast<std::size_t>(t)], state.h,
                                         state.c);
      state = {act.hidden, act.cell};
      ++valid_steps;
      last_valid = t;
      if (params.options.mean_pool) pooled += state.h;
      if (tape) {
        auto ti = static_cast<std::size_t>(t);
        tape->gate_in[ti] = std::move(act.gate_in);
        tape->gate_forget[ti] = std::move(act.gate_forget);
        tape->gate_out[ti] = std::move(act.gate_out);
        tape->candidate[ti] = std::move(act.candidate);
      }
    }
    if (tape) {
      auto ti = static_cast<std::size_t>(t);
      tape->cell[ti] = state.c;
      tape->hidden[ti] = state.h;
    }
  }
  if (valid_steps == 0)
    throw Error(ErrorKind::EmptySequence, "lstm_encode: sequence has no valid steps");
  if (tape) {
    tape->valid_steps = valid_steps;
    tape->last_valid = last_valid;
  }
  return params.options.mean_pool ? Eigen::VectorXd(pooled / valid_steps) : state.h;
}

Eigen::VectorXd lstm_encode(const LstmParams& params, const std::vector<Eigen::VectorXd>& inputs,
                            LstmTape* tape) {
  return lstm_encode(params, inputs, std::vector<std::uint8_t>(inputs.size(), 1), tape);
}

void lstm_backward(LstmParams& params, const LstmTape& tape, const Eigen::VectorXd& output_grad,
                   std::vector<Eigen::VectorXd>* input_grads) {
  const int m = params.hidden_dim;
  if (output_grad.size() != m)
    throw Error(ErrorKind::ShapeMismatch, "lstm upstream gradient has length " +
                                              std::to_string(output_grad.size()) + ", expected " +
                                              std::to_string(m));
  if (tape.valid_steps == 0)
    throw Error(ErrorKind::EmptySequence, "lstm_backward: empty tape");

  const int steps = static_cast<int>(tape.x.size());
  if (input_grads) input_grads->assign(tape.x.size(), Eigen::VectorXd::Zero(params.input_dim));

  const Eigen::VectorXd mean_share =
      params.options.mean_pool ? Eigen::VectorXd(output_grad / tape.valid_steps)
                               : Eigen::VectorXd();

  Eigen::VectorXd dh = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(m);

  for (int t = steps - 1; t >= 0; --t) {
    const auto ti = static_cast<std::size_t>(t);
    if (!tape.valid[ti]) continue;  // masked steps copy state: dh, dc pass through

    if (params.options.mean_pool)
      dh += mean_share;
    else if (t == tape.last_valid)
      dh += output_grad;

    const Eigen::VectorXd& gate_in = tape.gate_in[ti];
    const Eigen::VectorXd& gate_forget = tape.gate_forget[ti];
    const Eigen::VectorXd& gate_out = tape.gate_out[ti];
    const Eigen::VectorXd& candidate = tape.candidate[ti];
    const Eigen::VectorXd& cell = tape.cell[ti];

    // Previous post-step state, skipping back over masked steps.
    Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(m);
    if (t > 0) {
      h_prev = tape.hidden[ti - 1];
      c_prev = tape.cell[ti - 1];
    }

    Eigen::VectorXd tanh_cell = tanh_vec(cell);
    Eigen::VectorXd d_gate_out = dh.cwiseProduct(tanh_cell);
    Eigen::VectorXd da_out =
        d_gate_out.cwiseProduct(gate_out).cwiseProduct(Eigen::VectorXd::Ones(m) - gate_out);

    Eigen::VectorXd dcell =
        dc + dh.cwiseProduct(gate_out)
                 .cwiseProduct(Eigen::VectorXd::Ones(m) - tanh_cell.cwiseProduct(tanh_cell));
    if (params.options.peephole_current_cell) dcell += peep_carry(params, params.peep_out, da_out);

    Eigen::VectorXd d_gate_in = dcell.cwiseProduct(candidate);
    Eigen::VectorXd d_candidate = dcell.cwiseProduct(gate_in);
    Eigen::VectorXd d_gate_forget = dcell.cwiseProduct(c_prev);

    Eigen::VectorXd da_in =
        d_gate_in.cwiseProduct(gate_in).cwiseProduct(Eigen::VectorXd::Ones(m) - gate_in);
    Eigen::VectorXd da_forget = d_gate_forget.cwiseProduct(gate_forget)
                                    .cwiseProduct(Eigen::VectorXd::Ones(m) - gate_forget);
    Eigen::VectorXd da_cell =
        d_candidate.cwiseProduct(Eigen::VectorXd::Ones(m) - candidate.cwiseProduct(candidate));

    const Eigen::VectorXd& x = tape.x[ti];
    params.w_in.grads += da_in * x.transpose();
    params.w_forget.grads += da_forget * x.transpose();
    params.w_out.grads += da_out * x.transpose();
    params.w_cell.grads += da_cell * x.transpose();
    params.u_in.grads += da_in * h_prev.transpose();
    params.u_forget.grads += da_forget * h_prev.transpose();
    params.u_out.grads += da_out * h_prev.transpose();
    params.u_cell.grads += da_cell * h_prev.transpose();
    params.b_in.grads.col(0) += da_in;
    params.b_forget.grads.col(0) += da_forget;
    params.b_out.grads.col(0) += da_out;
    if (params.options.candidate_bias) params.b_cell.grads.col(0) += da_cell;
    peep_grad(params, params.peep_in, da_in, c_prev);
    peep_grad(params, params.peep_forget, da_forget, c_prev);
    peep_grad(params, params.peep_out, da_out,
              params.options.peephole_current_cell ? cell : c_prev);

    if (input_grads)
      (*input_grads)[ti] = params.w_in.values.transpose() * da_in +
                           params.w_forget.values.transpose() * da_forget +
                           params.w_out.values.transpose() * da_out +
                           params.w_cell.values.transpose() * da_cell;

    dh = params.u_in.values.transpose() * da_in +
         params.u_forget.values.transpose() * da_forget +
         params.u_out.values.transpose() * da_out + params.u_cell.values.transpose() * da_cell;

    dc = dcell.cwiseProduct(gate_forget) + peep_carry(params, params.peep_in, da_in) +
         peep_carry(params, params.peep_forget, da_forget);
    if (!params.options.peephole_current_cell)
      dc += peep_carry(params, params.peep_out, da_out);
  }
}

}  // namespace mtle
