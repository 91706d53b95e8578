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

#ifndef DPMOB_NEURAL_H_
#define DPMOB_NEURAL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dpmob/rng.h"
#include "dpmob/tensor.h"

namespace dpmob {

enum class CellKind { kLstm, kGru };
enum class Activation { kRelu, kTanh };

std::string ToString(CellKind kind);
std::string ToString(Activation act);
CellKind ParseCellKind(const std::string& s);
Activation ParseActivation(const std::string& s);

// One recurrent hidden layer (optionally bidirectional, merged by
// concatenation) followed by a linear dense output layer.
struct ModelSpec {
  CellKind cell = CellKind::kGru;
  bool bidirectional = true;
  int hidden_size = 175;
  int input_size = 10;
  int output_size = 6;
  Activation activation = Activation::kRelu;

  int dense_input_size() const {
    return bidirectional ? 2 * hidden_size : hidden_size;
  }
  void Validate() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Input weights are stored input_size x hidden_size and applied as x^T W;
// recurrent weights hidden_size x hidden_size, applied as h^T U.
struct LstmParams {
  Tensor w_xi, w_xf, w_xo, w_xg;
  Tensor w_hi, w_hf, w_ho, w_hg;
  Tensor b_i, b_f, b_o, b_g;

  static LstmParams Zeros(int input_size, int hidden_size);
  int input_size() const { return static_cast<int>(w_xi.dim(0)); }
  int hidden_size() const { return static_cast<int>(w_xi.dim(1)); }
  void Validate() const;
};

// Update gate z, reset gate r and candidate (w, u, b).
struct GruParams {
  Tensor w_z, w_r, w;
  Tensor u_z, u_r, u;
  Tensor b_z, b_r, b;

  static GruParams Zeros(int input_size, int hidden_size);
  int input_size() const { return static_cast<int>(w_z.dim(0)); }
  int hidden_size() const { return static_cast<int>(w_z.dim(1)); }
  void Validate() const;
};

using CellParams = std::variant<LstmParams, GruParams>;

// All trainable weights of a model. Gradients share this layout
// (see GradientSet).
struct ModelParams {
  CellParams forward;
  std::optional<CellParams> backward;
  Tensor dense_w;  // dense_input_size x output_size
  Tensor dense_b;  // output_size

  // Identifies the parameter values a forward tape was recorded against.
  // Refreshed by every producer of new values (init, optimizer, loader).
  std::uint64_t revision = 0;

  static ModelParams Zeros(const ModelSpec& spec);

  // Stable, ordered (name, tensor) views. Names look like "fwd/w_z",
  // "bwd/u", "dense/kernel".
  std::vector<std::pair<std::string, Tensor*>> Named();
  std::vector<std::pair<std::string, const Tensor*>> Named() const;

  std::size_t NumParameters() const;
  void Validate(const ModelSpec& spec) const;
  // Assigns a fresh revision id.
  void Touch();
};

using GradientSet = ModelParams;

// Global L2 norm across every tensor.
double GlobalNorm(const ModelParams& p);
// a += alpha * b over every tensor; layouts must match.
void AddScaled(ModelParams& a, double alpha, const ModelParams& b);
void Scale(ModelParams& a, double factor);
// Same layout as `like`, all zeros.
ModelParams ZerosLike(const ModelParams& like);

// Glorot-uniform weights with per-gate fan (fan_in = rows, fan_out = cols of
// each individual gate matrix); biases zero.
ModelParams InitParams(const ModelSpec& spec, RngStream& rng);

struct LstmState {
  Tensor h;
  Tensor c;
};

LstmState LstmStep(const LstmParams& p, const Tensor& x_t, const Tensor& h_prev,
                   const Tensor& c_prev, Activation act);
Tensor GruStep(const GruParams& p, const Tensor& x_t, const Tensor& h_prev,
               Activation act);

// Intermediate values of one recurrent step, retained for backprop.
struct StepCache {
  std::vector<double> x;       // input at this step
  std::vector<double> h_prev;
  std::vector<double> c_prev;  // LSTM only
  // LSTM: gate activations i, f, o, candidate g, its pre-activation, c, act(c).
  // GRU: z, r, r*h_prev, candidate pre-activation and activation.
  std::vector<double> g1, g2, g3, g4, pre_cand, c, act_c;
  std::vector<double> h;
};

struct DirectionTape {
  std::vector<StepCache> steps;
};

struct ForwardTape {
  DirectionTape forward_dir;
  std::optional<DirectionTape> backward_dir;
  std::vector<double> merged;  // dense-layer input
  std::vector<double> prediction;
  std::uint64_t params_revision = 0;
  std::size_t lag = 0;
};

struct ForwardResult {
  Tensor prediction;  // [output_size]
  ForwardTape tape;
};

// Runs the model over a [lag x input_size] window from zero initial states.
// The backward direction consumes the reversed window.
ForwardResult Forward(const ModelSpec& spec, const ModelParams& params,
                      const Tensor& window);

// Gradients of the per-example MAE, mean_r |prediction_r - target_r|, with
// sign(0) taken as 0. Throws InvalidState if the tape was recorded against a
// different parameter revision.
GradientSet Backward(const ModelSpec& spec, const ModelParams& params,
                     const ForwardTape& tape, const Tensor& target);

// As Backward, but adds `scale` times the gradient into `accum` and returns
// the example's MAE. Used by the training loop to avoid per-example
// allocations.
double AccumulateGradient(const ModelSpec& spec, const ModelParams& params,
                          const ForwardTape& tape, const Tensor& target,
                          double scale, GradientSet& accum);

double MaeLoss(const Tensor& prediction, const Tensor& target);

}  // namespace dpmob

#endif  // DPMOB_NEURAL_H_
