// Copyright 2026 The dpmob Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpmob/neural.h"

#include <atomic>
#include <cmath>
#include <string>

#include "dpmob/errors.h"
#include "dpmob/numeric.h"

namespace dpmob {
namespace {

using Vec = std::vector<double>;

std::atomic<std::uint64_t> g_next_revision{1};

double Act(Activation act, double x) {
  return act == Activation::kRelu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

// Derivative expressed through the pre-activation x and the activation y.
double ActGrad(Activation act, double x, double y) {
  return act == Activation::kRelu ? (x > 0.0 ? 1.0 : 0.0) : 1.0 - y * y;
}

// out += v^T W for W of shape [v.size() x out.size()].
void AddVecMat(const double* v, std::size_t rows, const Tensor& w, double* out) {
  const std::size_t cols = w.dim(1);
  const double* wd = w.data();
  for (std::size_t j = 0; j < rows; ++j) {
    const double vj = v[j];
    if (vj == 0.0) continue;
    const double* wr = wd + j * cols;
    for (std::size_t k = 0; k < cols; ++k) out[k] += vj * wr[k];
  }
}

// out[j] += sum_k W[j,k] * d[k]  (i.e. out += W d).
void AddMatVec(const Tensor& w, const double* d, double* out) {
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  const double* wd = w.data();
  for (std::size_t j = 0; j < rows; ++j) {
    const double* wr = wd + j * cols;
    double acc = 0.0;
    for (std::size_t k = 0; k < cols; ++k) acc += wr[k] * d[k];
    out[j] += acc;
  }
}

// G += a b^T.
void AddOuter(const Vec& a, const Vec& b, Tensor& g) {
  const std::size_t cols = b.size();
  double* gd = g.data();
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double aj = a[j];
    if (aj == 0.0) continue;
    double* gr = gd + j * cols;
    for (std::size_t k = 0; k < cols; ++k) gr[k] += aj * b[k];
  }
}

void AddTo(Tensor& t, const Vec& v) {
  double* d = t.data();
  for (std::size_t k = 0; k < v.size(); ++k) d[k] += v[k];
}

Vec Affine(const Tensor& wx, const Tensor& wh, const Tensor& b, const Vec& x,
           const Vec& h) {
  Vec out(b.values().begin(), b.values().end());
  AddVecMat(x.data(), x.size(), wx, out.data());
  AddVecMat(h.data(), h.size(), wh, out.data());
  return out;
}

void CheckMatrix(const Tensor& t, std::size_t rows, std::size_t cols,
                 const char* name) {
  if (t.shape() != Shape{rows, cols}) {
    throw InvalidArgument(std::string(name) + ": expected " + std::to_string(rows) +
                          "x" + std::to_string(cols) + " matrix");
  }
}

void CheckVector(const Tensor& t, std::size_t n, const char* name) {
  if (t.shape() != Shape{n}) {
    throw InvalidArgument(std::string(name) + ": expected vector of length " +
                          std::to_string(n));
  }
}

StepCache LstmForwardStep(const LstmParams& p, Vec x, Vec h_prev, Vec c_prev,
                          Activation act) {
  StepCache s;
  s.g1 = Affine(p.w_xi, p.w_hi, p.b_i, x, h_prev);
  s.g2 = Affine(p.w_xf, p.w_hf, p.b_f, x, h_prev);
  s.g3 = Affine(p.w_xo, p.w_ho, p.b_o, x, h_prev);
  s.pre_cand = Affine(p.w_xg, p.w_hg, p.b_g, x, h_prev);
  const std::size_t n = s.g1.size();
  s.g4.resize(n);
  s.c.resize(n);
  s.act_c.resize(n);
  s.h.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s.g1[k] = Sigmoid(s.g1[k]);
    s.g2[k] = Sigmoid(s.g2[k]);
    s.g3[k] = Sigmoid(s.g3[k]);
    s.g4[k] = Act(act, s.pre_cand[k]);
    s.c[k] = s.g2[k] * c_prev[k] + s.g1[k] * s.g4[k];
    s.act_c[k] = Act(act, s.c[k]);
    s.h[k] = s.g3[k] * s.act_c[k];
  }
  s.x = std::move(x);
  s.h_prev = std::move(h_prev);
  s.c_prev = std::move(c_prev);
  return s;
}

StepCache GruForwardStep(const GruParams& p, Vec x, Vec h_prev, Activation act) {
  StepCache s;
  s.g1 = Affine(p.w_z, p.u_z, p.b_z, x, h_prev);
  s.g2 = Affine(p.w_r, p.u_r, p.b_r, x, h_prev);
  const std::size_t n = s.g1.size();
  s.g3.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s.g1[k] = Sigmoid(s.g1[k]);
    s.g2[k] = Sigmoid(s.g2[k]);
    s.g3[k] = s.g2[k] * h_prev[k];
  }
  s.pre_cand = Affine(p.w, p.u, p.b, x, s.g3);
  s.g4.resize(n);
  s.h.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s.g4[k] = Act(act, s.pre_cand[k]);
    s.h[k] = (1.0 - s.g1[k]) * h_prev[k] + s.g1[k] * s.g4[k];
  }
  s.x = std::move(x);
  s.h_prev = std::move(h_prev);
  return s;
}

int HiddenSize(const CellParams& cell) {
  return std::visit([](const auto& p) { return p.hidden_size(); }, cell);
}

int InputSize(const CellParams& cell) {
  return std::visit([](const auto& p) { return p.input_size(); }, cell);
}

DirectionTape RunDirection(const CellParams& cell, const Tensor& window,
                           bool reversed, Activation act) {
  const std::size_t lag = window.dim(0);
  const std::size_t h = static_cast<std::size_t>(HiddenSize(cell));
  DirectionTape tape;
  tape.steps.reserve(lag);
  Vec hs(h, 0.0), cs(h, 0.0);
  for (std::size_t i = 0; i < lag; ++i) {
    const std::size_t t = reversed ? lag - 1 - i : i;
    auto row = window.row(t);
    Vec x(row.begin(), row.end());
    if (const auto* lstm = std::get_if<LstmParams>(&cell)) {
      tape.steps.push_back(LstmForwardStep(*lstm, std::move(x), hs, cs, act));
      cs = tape.steps.back().c;
    } else {
      tape.steps.push_back(
          GruForwardStep(std::get<GruParams>(cell), std::move(x), hs, act));
    }
    hs = tape.steps.back().h;
  }
  return tape;
}

void BackpropLstm(const LstmParams& p, const DirectionTape& tape, Activation act,
                  Vec dh, LstmParams& g) {
  const std::size_t n = dh.size();
  Vec dc(n, 0.0), dzi(n), dzf(n), dzo(n), dzg(n);
  for (std::size_t t = tape.steps.size(); t-- > 0;) {
    const StepCache& s = tape.steps[t];
    for (std::size_t k = 0; k < n; ++k) {
      const double i = s.g1[k], f = s.g2[k], o = s.g3[k], gg = s.g4[k];
      const double d_o = dh[k] * s.act_c[k];
      const double dck = dc[k] + dh[k] * o * ActGrad(act, s.c[k], s.act_c[k]);
      dzo[k] = d_o * o * (1.0 - o);
      dzi[k] = dck * gg * i * (1.0 - i);
      dzf[k] = dck * s.c_prev[k] * f * (1.0 - f);
      dzg[k] = dck * i * ActGrad(act, s.pre_cand[k], gg);
      dc[k] = dck * f;
    }
    AddOuter(s.x, dzi, g.w_xi);
    AddOuter(s.x, dzf, g.w_xf);
    AddOuter(s.x, dzo, g.w_xo);
    AddOuter(s.x, dzg, g.w_xg);
    AddOuter(s.h_prev, dzi, g.w_hi);
    AddOuter(s.h_prev, dzf, g.w_hf);
    AddOuter(s.h_prev, dzo, g.w_ho);
    AddOuter(s.h_prev, dzg, g.w_hg);
    AddTo(g.b_i, dzi);
    AddTo(g.b_f, dzf);
    AddTo(g.b_o, dzo);
    AddTo(g.b_g, dzg);
    if (t == 0) break;  // initial state is a constant
    std::fill(dh.begin(), dh.end(), 0.0);
    AddMatVec(p.w_hi, dzi.data(), dh.data());
    AddMatVec(p.w_hf, dzf.data(), dh.data());
    AddMatVec(p.w_ho, dzo.data(), dh.data());
    AddMatVec(p.w_hg, dzg.data(), dh.data());
  }
}

void BackpropGru(const GruParams& p, const DirectionTape& tape, Activation act,
                 Vec dh, GruParams& g) {
  const std::size_t n = dh.size();
  Vec dzz(n), dzr(n), dzc(n), drh(n), dh_prev(n);
  for (std::size_t t = tape.steps.size(); t-- > 0;) {
    const StepCache& s = tape.steps[t];
    for (std::size_t k = 0; k < n; ++k) {
      const double z = s.g1[k];
      dzz[k] = dh[k] * (s.g4[k] - s.h_prev[k]) * z * (1.0 - z);
      dzc[k] = dh[k] * z * ActGrad(act, s.pre_cand[k], s.g4[k]);
      dh_prev[k] = dh[k] * (1.0 - z);
    }
    std::fill(drh.begin(), drh.end(), 0.0);
    AddMatVec(p.u, dzc.data(), drh.data());
    for (std::size_t k = 0; k < n; ++k) {
      const double r = s.g2[k];
      dzr[k] = drh[k] * s.h_prev[k] * r * (1.0 - r);
      dh_prev[k] += drh[k] * r;
    }
    AddOuter(s.x, dzz, g.w_z);
    AddOuter(s.x, dzr, g.w_r);
    AddOuter(s.x, dzc, g.w);
    AddOuter(s.h_prev, dzz, g.u_z);
    AddOuter(s.h_prev, dzr, g.u_r);
    AddOuter(s.g3, dzc, g.u);
    AddTo(g.b_z, dzz);
    AddTo(g.b_r, dzr);
    AddTo(g.b, dzc);
    if (t == 0) break;
    AddMatVec(p.u_z, dzz.data(), dh_prev.data());
    AddMatVec(p.u_r, dzr.data(), dh_prev.data());
    dh.swap(dh_prev);
  }
}

void BackpropCell(const CellParams& cell, const DirectionTape& tape,
                  Activation act, Vec dh, CellParams& grad) {
  if (const auto* lstm = std::get_if<LstmParams>(&cell)) {
    BackpropLstm(*lstm, tape, act, std::move(dh), std::get<LstmParams>(grad));
  } else {
    BackpropGru(std::get<GruParams>(cell), tape, act, std::move(dh),
                std::get<GruParams>(grad));
  }
}

CellParams ZeroCell(CellKind kind, int d, int h) {
  if (kind == CellKind::kLstm) return LstmParams::Zeros(d, h);
  return GruParams::Zeros(d, h);
}

template <typename Fn>
void ForEachCellTensor(LstmParams& p, Fn&& fn) {
  fn("w_xi", p.w_xi); fn("w_xf", p.w_xf); fn("w_xo", p.w_xo); fn("w_xg", p.w_xg);
  fn("w_hi", p.w_hi); fn("w_hf", p.w_hf); fn("w_ho", p.w_ho); fn("w_hg", p.w_hg);
  fn("b_i", p.b_i); fn("b_f", p.b_f); fn("b_o", p.b_o); fn("b_g", p.b_g);
}

template <typename Fn>
void ForEachCellTensor(GruParams& p, Fn&& fn) {
  fn("w_z", p.w_z); fn("w_r", p.w_r); fn("w", p.w);
  fn("u_z", p.u_z); fn("u_r", p.u_r); fn("u", p.u);
  fn("b_z", p.b_z); fn("b_r", p.b_r); fn("b", p.b);
}

void CheckWindow(const ModelSpec& spec, const Tensor& window) {
  if (window.rank() != 2 || window.dim(0) < 1 ||
      window.dim(1) != static_cast<std::size_t>(spec.input_size)) {
    throw InvalidArgument("window must be [lag >= 1, " +
                          std::to_string(spec.input_size) + "]");
  }
}

}  // namespace

std::string ToString(CellKind kind) { return kind == CellKind::kLstm ? "lstm" : "gru"; }
std::string ToString(Activation act) { return act == Activation::kRelu ? "relu" : "tanh"; }

CellKind ParseCellKind(const std::string& s) {
  if (s == "lstm") return CellKind::kLstm;
  if (s == "gru") return CellKind::kGru;
  throw InvalidArgument("unknown cell kind '" + s + "' (expected lstm|gru)");
}

Activation ParseActivation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw InvalidArgument("unknown activation '" + s + "' (expected relu|tanh)");
}

void ModelSpec::Validate() const {
  if (hidden_size < 1 || input_size < 1 || output_size < 1) {
    throw InvalidArgument("model sizes must be positive");
  }
}

LstmParams LstmParams::Zeros(int input_size, int hidden_size) {
  const std::size_t d = input_size, h = hidden_size;
  LstmParams p;
  for (Tensor* t : {&p.w_xi, &p.w_xf, &p.w_xo, &p.w_xg}) *t = Tensor({d, h});
  for (Tensor* t : {&p.w_hi, &p.w_hf, &p.w_ho, &p.w_hg}) *t = Tensor({h, h});
  for (Tensor* t : {&p.b_i, &p.b_f, &p.b_o, &p.b_g}) *t = Tensor({h});
  return p;
}

void LstmParams::Validate() const {
  if (w_xi.rank() != 2) throw InvalidArgument("lstm w_xi must be a matrix");
  const std::size_t d = w_xi.dim(0), h = w_xi.dim(1);
  for (const Tensor* t : {&w_xi, &w_xf, &w_xo, &w_xg}) CheckMatrix(*t, d, h, "lstm input weight");
  for (const Tensor* t : {&w_hi, &w_hf, &w_ho, &w_hg}) CheckMatrix(*t, h, h, "lstm recurrent weight");
  for (const Tensor* t : {&b_i, &b_f, &b_o, &b_g}) CheckVector(*t, h, "lstm bias");
}

GruParams GruParams::Zeros(int input_size, int hidden_size) {
  const std::size_t d = input_size, h = hidden_size;
  GruParams p;
  for (Tensor* t : {&p.w_z, &p.w_r, &p.w}) *t = Tensor({d, h});
  for (Tensor* t : {&p.u_z, &p.u_r, &p.u}) *t = Tensor({h, h});
  for (Tensor* t : {&p.b_z, &p.b_r, &p.b}) *t = Tensor({h});
  return p;
}

void GruParams::Validate() const {
  if (w_z.rank() != 2) throw InvalidArgument("gru w_z must be a matrix");
  const std::size_t d = w_z.dim(0), h = w_z.dim(1);
  for (const Tensor* t : {&w_z, &w_r, &w}) CheckMatrix(*t, d, h, "gru input weight");
  for (const Tensor* t : {&u_z, &u_r, &u}) CheckMatrix(*t, h, h, "gru recurrent weight");
  for (const Tensor* t : {&b_z, &b_r, &b}) CheckVector(*t, h, "gru bias");
}

ModelParams ModelParams::Zeros(const ModelSpec& spec) {
  spec.Validate();
  ModelParams p;
  p.forward = ZeroCell(spec.cell, spec.input_size, spec.hidden_size);
  if (spec.bidirectional) {
    p.backward = ZeroCell(spec.cell, spec.input_size, spec.hidden_size);
  }
  p.dense_w = Tensor({static_cast<std::size_t>(spec.dense_input_size()),
                      static_cast<std::size_t>(spec.output_size)});
  p.dense_b = Tensor({static_cast<std::size_t>(spec.output_size)});
  p.Touch();
  return p;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::Named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  auto add_cell = [&out](const std::string& prefix, CellParams& cell) {
    std::visit(
        [&](auto& c) {
          ForEachCellTensor(c, [&](const char* name, Tensor& t) {
            out.emplace_back(prefix + name, &t);
          });
        },
        cell);
  };
  add_cell("fwd/", forward);
  if (backward) add_cell("bwd/", *backward);
  out.emplace_back("dense/kernel", &dense_w);
  out.emplace_back("dense/bias", &dense_b);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::Named() const {
  auto named = const_cast<ModelParams*>(this)->Named();
  return {named.begin(), named.end()};
}

std::size_t ModelParams::NumParameters() const {
  std::size_t n = 0;
  for (const auto& [name, t] : Named()) n += t->size();
  return n;
}

void ModelParams::Validate(const ModelSpec& spec) const {
  spec.Validate();
  auto check_cell = [&spec](const CellParams& cell) {
    const bool is_lstm = std::holds_alternative<LstmParams>(cell);
    if (is_lstm != (spec.cell == CellKind::kLstm)) {
      throw InvalidArgument("cell parameters do not match spec cell kind");
    }
    std::visit([](const auto& c) { c.Validate(); }, cell);
    if (InputSize(cell) != spec.input_size || HiddenSize(cell) != spec.hidden_size) {
      throw InvalidArgument("cell parameter sizes do not match spec");
    }
  };
  check_cell(forward);
  if (backward.has_value() != spec.bidirectional) {
    throw InvalidArgument("backward-direction parameters do not match spec");
  }
  if (backward) check_cell(*backward);
  CheckMatrix(dense_w, spec.dense_input_size(), spec.output_size, "dense kernel");
  CheckVector(dense_b, spec.output_size, "dense bias");
}

void ModelParams::Touch() { revision = g_next_revision.fetch_add(1); }

double GlobalNorm(const ModelParams& p) {
  // Concatenate norms hierarchically: ||(n_1, ..., n_k)||.
  std::vector<double> norms;
  for (const auto& [name, t] : p.Named()) norms.push_back(L2Norm(*t));
  return L2Norm(norms);
}

void AddScaled(ModelParams& a, double alpha, const ModelParams& b) {
  auto na = a.Named();
  auto nb = b.Named();
  if (na.size() != nb.size()) throw InvalidArgument("parameter layouts differ");
  for (std::size_t i = 0; i < na.size(); ++i) na[i].second->Axpy(alpha, *nb[i].second);
}

void Scale(ModelParams& a, double factor) {
  for (auto& [name, t] : a.Named()) *t *= factor;
}

ModelParams ZerosLike(const ModelParams& like) {
  ModelParams out = like;
  for (auto& [name, t] : out.Named()) t->Fill(0.0);
  return out;
}

ModelParams InitParams(const ModelSpec& spec, RngStream& rng) {
  ModelParams p = ModelParams::Zeros(spec);
  for (auto& [name, t] : p.Named()) {
    if (t->rank() != 2) continue;  // biases stay zero
    const double fan_in = static_cast<double>(t->dim(0));
    const double fan_out = static_cast<double>(t->dim(1));
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : t->values()) v = (2.0 * rng.Uniform() - 1.0) * bound;
  }
  p.Touch();
  return p;
}

LstmState LstmStep(const LstmParams& p, const Tensor& x_t, const Tensor& h_prev,
                   const Tensor& c_prev, Activation act) {
  p.Validate();
  const std::size_t h = p.hidden_size();
  CheckVector(x_t, p.input_size(), "lstm x_t");
  CheckVector(h_prev, h, "lstm h_prev");
  CheckVector(c_prev, h, "lstm c_prev");
  auto xs = x_t.values(), hs = h_prev.values(), cs = c_prev.values();
  StepCache s = LstmForwardStep(p, Vec(xs.begin(), xs.end()), Vec(hs.begin(), hs.end()),
                                Vec(cs.begin(), cs.end()), act);
  return {Tensor({h}, std::move(s.h)), Tensor({h}, std::move(s.c))};
}

Tensor GruStep(const GruParams& p, const Tensor& x_t, const Tensor& h_prev,
               Activation act) {
  p.Validate();
  const std::size_t h = p.hidden_size();
  CheckVector(x_t, p.input_size(), "gru x_t");
  CheckVector(h_prev, h, "gru h_prev");
  auto xs = x_t.values(), hs = h_prev.values();
  StepCache s =
      GruForwardStep(p, Vec(xs.begin(), xs.end()), Vec(hs.begin(), hs.end()), act);
  return Tensor({h}, std::move(s.h));
}

ForwardResult Forward(const ModelSpec& spec, const ModelParams& params,
                      const Tensor& window) {
  CheckWindow(spec, window);
  ForwardResult result;
  ForwardTape& tape = result.tape;
  tape.lag = window.dim(0);
  tape.params_revision = params.revision;
  tape.forward_dir = RunDirection(params.forward, window, false, spec.activation);
  tape.merged = tape.forward_dir.steps.back().h;
  if (spec.bidirectional) {
    if (!params.backward) throw InvalidArgument("bidirectional spec without backward params");
    tape.backward_dir = RunDirection(*params.backward, window, true, spec.activation);
    const Vec& hb = tape.backward_dir->steps.back().h;
    tape.merged.insert(tape.merged.end(), hb.begin(), hb.end());
  }
  if (tape.merged.size() != params.dense_w.dim(0)) {
    throw InvalidArgument("dense kernel rows do not match recurrent output");
  }
  tape.prediction.assign(params.dense_b.values().begin(), params.dense_b.values().end());
  AddVecMat(tape.merged.data(), tape.merged.size(), params.dense_w,
            tape.prediction.data());
  result.prediction = Tensor({tape.prediction.size()}, tape.prediction);
  return result;
}

double MaeLoss(const Tensor& prediction, const Tensor& target) {
  CheckSameShape(prediction, target, "mae");
  double acc = 0.0;
  for (std::size_t r = 0; r < target.size(); ++r) {
    acc += std::abs(prediction[r] - target[r]);
  }
  return acc / static_cast<double>(target.size());
}

double AccumulateGradient(const ModelSpec& spec, const ModelParams& params,
                          const ForwardTape& tape, const Tensor& target,
                          double scale, GradientSet& accum) {
  if (tape.params_revision != params.revision) {
    throw InvalidState("forward tape was recorded against a different parameter revision");
  }
  const std::size_t out = tape.prediction.size();
  if (target.shape() != Shape{out}) throw InvalidArgument("target shape mismatch");

  Vec dy(out);
  double loss = 0.0;
  for (std::size_t r = 0; r < out; ++r) {
    const double resid = tape.prediction[r] - target[r];
    loss += std::abs(resid);
    const double sign = resid > 0.0 ? 1.0 : (resid < 0.0 ? -1.0 : 0.0);
    dy[r] = scale * sign / static_cast<double>(out);
  }
  loss /= static_cast<double>(out);

  AddOuter(tape.merged, dy, accum.dense_w);
  AddTo(accum.dense_b, dy);

  Vec dmerged(tape.merged.size(), 0.0);
  AddMatVec(params.dense_w, dy.data(), dmerged.data());
  const std::size_t h = static_cast<std::size_t>(spec.hidden_size);
  BackpropCell(params.forward, tape.forward_dir, spec.activation,
               Vec(dmerged.begin(), dmerged.begin() + h), accum.forward);
  if (spec.bidirectional) {
    BackpropCell(*params.backward, *tape.backward_dir, spec.activation,
                 Vec(dmerged.begin() + h, dmerged.end()), *accum.backward);
  }
  return loss;
}

GradientSet Backward(const ModelSpec& spec, const ModelParams& params,
                     const ForwardTape& tape, const Tensor& target) {
  GradientSet grad = ZerosLike(params);
  AccumulateGradient(spec, params, tape, target, 1.0, grad);
  return grad;
}

}  // namespace dpmob
