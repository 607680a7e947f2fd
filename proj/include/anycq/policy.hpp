#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "anycq/compgraph.hpp"
#include "anycq/rng.hpp"

namespace anycq {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecF = Eigen::VectorXf;

struct Linear {
  int in = 0;
  int out = 0;
  std::vector<float> w;  // row-major [out][in]
  std::vector<float> b;  // [out]
};

// Two layers, ReLU after the first.
struct MLP {
  Linear l1;
  Linear l2;
};

// Standard GRU cell; gate order in the packed 3d blocks is reset, update,
// candidate (sigmoid, sigmoid, tanh).
struct GRUCell {
  Linear wx;  // d -> 3d
  Linear wh;  // d -> 3d
};

struct PolicyParameters {
  int d = 128;
  int hidden = 128;
  std::vector<float> h_init;  // [d]
  MLP E;                      // d+1 -> d
  MLP MV;                     // d -> 4d
  MLP MR;                     // d -> 4d
  MLP UV;                     // d -> d
  MLP UX;                     // d -> d
  MLP O;                      // d -> 1
  GRUCell gru;
};

// Weights and biases uniform in +-1/sqrt(fan_in), h_init zero.
PolicyParameters init_policy(int d, int hidden, std::uint64_t seed);

// Versioned little-endian binary checkpoint.
void save_policy(std::ostream& out, const PolicyParameters& p);
void save_policy_file(const std::string& path, const PolicyParameters& p);
PolicyParameters load_policy(std::istream& in);
PolicyParameters load_policy_file(const std::string& path);

// Applies fn to every tensor in a fixed order (shared by serialization,
// optimizer state, and gradient flattening).
template <typename P, typename Fn>
void for_each_tensor(P& p, Fn&& fn) {
  fn(p.h_init);
  for (auto* m : {&p.E, &p.MV, &p.MR, &p.UV, &p.UX, &p.O}) {
    fn(m->l1.w);
    fn(m->l1.b);
    fn(m->l2.w);
    fn(m->l2.b);
  }
  fn(p.gru.wx.w);
  fn(p.gru.wx.b);
  fn(p.gru.wh.w);
  fn(p.gru.wh.b);
}

// Gradients in the same shapes as the parameters.
struct PolicyGrad {
  PolicyParameters g;  // reuses the container, values are gradients
  explicit PolicyGrad(const PolicyParameters& like);
  void zero();
  void add_scaled(const PolicyGrad& other, float scale);
};

// Everything one forward step writes; retained for backprop, reused as
// scratch during inference.
struct StepTape {
  std::vector<float> h_prev;
  std::vector<int> alpha;
  std::vector<std::uint8_t> le;
  MatF xin, aE, x;
  MatF aMV, mV;
  MatF y_lit, aMR, mR;
  MatF y_val;
  MatF aUV, z_v;
  MatF z_term_in, aUX, z_term;
  MatF g_in, gr, gz, gn, hn_h;
  MatF h_new;
  MatF aO;
  std::vector<float> logits;        // clipped shifted head outputs, per variable value
  std::vector<std::uint8_t> clip_pass;
  std::vector<int> rowmax_arg;      // per variable
  std::vector<int> lit_win, val_win, term_win;
  std::vector<double> mu;           // per-variable softmax rows, concatenated
};

// One message-passing step. `h` is the [num_value_vertices * d] hidden state,
// updated in place; `mu` receives per-variable distributions over the entity
// domain (row-major [num_vars * num_entities]). `alpha` and `le` describe the
// current assignment.
void policy_forward(const PolicyParameters& p, const CompGraph& cg,
                    std::span<const int> alpha, std::span<const std::uint8_t> le,
                    std::vector<float>& h, StepTape& tape, std::vector<double>& mu);

// Reverse pass of one step for the loss term
//   coeff * sum_z log mu_z(selected[z]).
// `dh` carries dL/dh_new in and dL/dh_prev out; parameter gradients
// accumulate into `grad`. Element-wise max gathers route to the first argmax;
// the clip has unit gradient inside [-100, 0].
void policy_backward(const PolicyParameters& p, const CompGraph& cg, const StepTape& tape,
                     double coeff, std::span<const int> selected, std::vector<float>& dh,
                     PolicyGrad& grad);

// Categorical draw per variable. Returns the joint log probability.
double sample_assignment(const std::vector<double>& mu, int num_vars, int num_entities,
                         Rng& rng, std::vector<int>& alpha_out);

double assignment_log_prob(const std::vector<double>& mu, int num_entities,
                           std::span<const int> alpha);

}  // namespace anycq
