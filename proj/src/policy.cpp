#include "anycq/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "anycq/errors.hpp"

namespace anycq {

namespace {

using Eigen::Map;
using RowVec = Eigen::RowVectorXf;

Map<const MatF> weights(const Linear& l) {
  return Map<const MatF>(l.w.data(), l.out, l.in);
}

void linear_fwd(const Linear& l, const MatF& x, MatF& y) {
  y.noalias() = x * weights(l).transpose();
  y.rowwise() += Map<const RowVec>(l.b.data(), l.out);
}

void mlp_fwd(const MLP& m, const MatF& x, MatF& a, MatF& y) {
  linear_fwd(m.l1, x, a);
  a = a.cwiseMax(0.0f);
  linear_fwd(m.l2, a, y);
}

void linear_grads(const Linear& l, Linear& gl, const MatF& x, const MatF& dy) {
  Map<MatF> gw(gl.w.data(), l.out, l.in);
  gw.noalias() += dy.transpose() * x;
  Map<RowVec> gb(gl.b.data(), l.out);
  gb += dy.colwise().sum();
}

// dy is dL/d output; accumulates parameter grads, writes dL/d input to dx.
void mlp_bwd(const MLP& m, MLP& gm, const MatF& x, const MatF& a, const MatF& dy,
             MatF& dx) {
  MatF da = dy * weights(m.l2);
  da = da.cwiseProduct((a.array() > 0.0f).cast<float>().matrix());
  linear_grads(m.l2, gm.l2, a, dy);
  linear_grads(m.l1, gm.l1, x, da);
  dx.noalias() = da * weights(m.l1);
}

void init_linear(Linear& l, int in, int out, Rng& rng) {
  l.in = in;
  l.out = out;
  l.w.resize(static_cast<std::size_t>(in) * out);
  l.b.resize(out);
  float bound = 1.0f / std::sqrt(static_cast<float>(in));
  for (float& v : l.w) v = static_cast<float>((uniform_double(rng) * 2 - 1) * bound);
  for (float& v : l.b) v = static_cast<float>((uniform_double(rng) * 2 - 1) * bound);
}

void shape_like(Linear& l, const Linear& src) {
  l.in = src.in;
  l.out = src.out;
  l.w.assign(src.w.size(), 0.0f);
  l.b.assign(src.b.size(), 0.0f);
}

constexpr float kNegInf = -std::numeric_limits<float>::infinity();

}  // namespace

PolicyParameters init_policy(int d, int hidden, std::uint64_t seed) {
  if (d <= 0 || hidden <= 0) throw DataError("policy dimensions must be positive");
  Rng rng(seed);
  PolicyParameters p;
  p.d = d;
  p.hidden = hidden;
  p.h_init.assign(d, 0.0f);
  auto make_mlp = [&](MLP& m, int in, int out) {
    init_linear(m.l1, in, hidden, rng);
    init_linear(m.l2, hidden, out, rng);
  };
  make_mlp(p.E, d + 1, d);
  make_mlp(p.MV, d, 4 * d);
  make_mlp(p.MR, d, 4 * d);
  make_mlp(p.UV, d, d);
  make_mlp(p.UX, d, d);
  make_mlp(p.O, d, 1);
  init_linear(p.gru.wx, d, 3 * d, rng);
  init_linear(p.gru.wh, d, 3 * d, rng);
  return p;
}

PolicyGrad::PolicyGrad(const PolicyParameters& like) {
  g.d = like.d;
  g.hidden = like.hidden;
  g.h_init.assign(like.h_init.size(), 0.0f);
  auto mlps_src = {&like.E, &like.MV, &like.MR, &like.UV, &like.UX, &like.O};
  auto mlps_dst = {&g.E, &g.MV, &g.MR, &g.UV, &g.UX, &g.O};
  auto src_it = mlps_src.begin();
  for (auto* dst : mlps_dst) {
    shape_like(dst->l1, (*src_it)->l1);
    shape_like(dst->l2, (*src_it)->l2);
    ++src_it;
  }
  shape_like(g.gru.wx, like.gru.wx);
  shape_like(g.gru.wh, like.gru.wh);
}

void PolicyGrad::zero() {
  for_each_tensor(g, [](std::vector<float>& t) { std::fill(t.begin(), t.end(), 0.0f); });
}

void PolicyGrad::add_scaled(const PolicyGrad& other, float scale) {
  std::vector<const std::vector<float>*> src;
  for_each_tensor(const_cast<PolicyGrad&>(other).g,
                  [&](std::vector<float>& t) { src.push_back(&t); });
  std::size_t i = 0;
  for_each_tensor(g, [&](std::vector<float>& t) {
    const std::vector<float>& s = *src[i++];
    for (std::size_t j = 0; j < t.size(); ++j) t[j] += scale * s[j];
  });
}

// ---------------------------------------------------------------------------
// Serialization: magic, version, dims, then tensors in for_each_tensor order,
// each prefixed by its element count. Little-endian host assumed.

namespace {
constexpr char kMagic[4] = {'A', 'C', 'Q', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("checkpoint truncated");
  return v;
}
}  // namespace

void save_policy(std::ostream& out, const PolicyParameters& p) {
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(p.d));
  write_pod(out, static_cast<std::uint32_t>(p.hidden));
  for_each_tensor(const_cast<PolicyParameters&>(p), [&](std::vector<float>& t) {
    write_pod(out, static_cast<std::uint64_t>(t.size()));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(float)));
  });
  if (!out) throw DataError("checkpoint write failed");
}

void save_policy_file(const std::string& path, const PolicyParameters& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  save_policy(out, p);
}

PolicyParameters load_policy(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not a policy checkpoint (bad magic)");
  std::uint32_t version = read_pod<std::uint32_t>(in);
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  int d = static_cast<int>(read_pod<std::uint32_t>(in));
  int hidden = static_cast<int>(read_pod<std::uint32_t>(in));
  if (d <= 0 || d > (1 << 20) || hidden <= 0 || hidden > (1 << 20))
    throw DataError("implausible checkpoint dimensions");
  PolicyParameters p = init_policy(d, hidden, 0);
  for_each_tensor(p, [&](std::vector<float>& t) {
    std::uint64_t n = read_pod<std::uint64_t>(in);
    if (n != t.size()) throw DataError("checkpoint tensor size mismatch");
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!in) throw DataError("checkpoint truncated");
  });
  in.peek();
  if (!in.eof()) throw DataError("trailing bytes in checkpoint");
  return p;
}

PolicyParameters load_policy_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  return load_policy(in);
}

// ---------------------------------------------------------------------------
// Forward

void policy_forward(const PolicyParameters& p, const CompGraph& cg,
                    std::span<const int> alpha, std::span<const std::uint8_t> le,
                    std::vector<float>& h, StepTape& tape, std::vector<double>& mu) {
  const int d = p.d;
  const int NV = cg.num_value_vertices();
  const int NL = cg.num_literals();
  const int NT = cg.num_terms();
  const int nvars = cg.num_vars();
  const int V = cg.num_entities();
  const int varvals = nvars * V;
  if (static_cast<int>(h.size()) != NV * d) throw DataError("hidden state size mismatch");
  if (static_cast<int>(alpha.size()) != nvars) throw DataError("assignment size mismatch");

  tape.h_prev.assign(h.begin(), h.end());
  tape.alpha.assign(alpha.begin(), alpha.end());
  tape.le.assign(le.begin(), le.end());
  Map<const MatF> Hprev(tape.h_prev.data(), NV, d);

  tape.xin.resize(NV, d + 1);
  tape.xin.leftCols(d) = Hprev;
  tape.xin.col(d).setZero();
  for (int z = 0; z < nvars; ++z) tape.xin(cg.var_value_offset(z) + alpha[z], d) = 1.0f;
  for (int c = 0; c < cg.num_consts(); ++c) tape.xin(cg.const_value_offset(c), d) = 1.0f;

  mlp_fwd(p.E, tape.xin, tape.aE, tape.x);
  mlp_fwd(p.MV, tape.x, tape.aMV, tape.mV);

  const std::vector<std::uint8_t>& pe = cg.pe();
  tape.y_lit.resize(NL, d);
  tape.y_lit.setConstant(kNegInf);
  tape.lit_win.assign(static_cast<std::size_t>(NL) * d, -1);
  for (const CompGraph::Slot& s : cg.slots()) {
    float* dst = tape.y_lit.data() + static_cast<std::size_t>(s.literal) * d;
    int* win = tape.lit_win.data() + static_cast<std::size_t>(s.literal) * d;
    for (int a = 0; a < s.domain; ++a) {
      int v = s.value_offset + a;
      int idx = 2 * pe[s.label_offset + a] + le[s.label_offset + a];
      const float* src = tape.mV.data() + (static_cast<std::size_t>(v) * 4 + idx) * d;
      int code = v * 4 + idx;
      for (int j = 0; j < d; ++j) {
        if (src[j] > dst[j]) {
          dst[j] = src[j];
          win[j] = code;
        }
      }
    }
  }

  mlp_fwd(p.MR, tape.y_lit, tape.aMR, tape.mR);

  tape.y_val.resize(NV, d);
  tape.y_val.setConstant(kNegInf);
  tape.val_win.assign(static_cast<std::size_t>(NV) * d, -1);
  for (const CompGraph::Slot& s : cg.slots()) {
    for (int a = 0; a < s.domain; ++a) {
      int v = s.value_offset + a;
      int idx = 2 * pe[s.label_offset + a] + le[s.label_offset + a];
      const float* src = tape.mR.data() + (static_cast<std::size_t>(s.literal) * 4 + idx) * d;
      float* dst = tape.y_val.data() + static_cast<std::size_t>(v) * d;
      int* win = tape.val_win.data() + static_cast<std::size_t>(v) * d;
      int code = s.literal * 4 + idx;
      for (int j = 0; j < d; ++j) {
        if (src[j] > dst[j]) {
          dst[j] = src[j];
          win[j] = code;
        }
      }
    }
  }

  MatF u = tape.x + tape.y_val;
  mlp_fwd(p.UV, u, tape.aUV, tape.z_v);
  tape.z_v += tape.x;

  tape.z_term_in.resize(NT, d);
  tape.z_term_in.setConstant(kNegInf);
  tape.term_win.assign(static_cast<std::size_t>(NT) * d, -1);
  for (int t = 0; t < NT; ++t) {
    int off = cg.term_value_offset(t);
    int dom = cg.term_domain(t);
    float* dst = tape.z_term_in.data() + static_cast<std::size_t>(t) * d;
    int* win = tape.term_win.data() + static_cast<std::size_t>(t) * d;
    for (int a = 0; a < dom; ++a) {
      int v = off + a;
      const float* src = tape.z_v.data() + static_cast<std::size_t>(v) * d;
      for (int j = 0; j < d; ++j) {
        if (src[j] > dst[j]) {
          dst[j] = src[j];
          win[j] = v;
        }
      }
    }
  }
  mlp_fwd(p.UX, tape.z_term_in, tape.aUX, tape.z_term);

  tape.g_in.resize(NV, d);
  for (int v = 0; v < NV; ++v)
    tape.g_in.row(v) = tape.z_v.row(v) + tape.z_term.row(cg.term_of_value(v));

  MatF xg(NV, 3 * d), hg(NV, 3 * d);
  linear_fwd(p.gru.wx, tape.g_in, xg);
  linear_fwd(p.gru.wh, Hprev, hg);
  auto sigmoid = [](const MatF& m) -> MatF {
    return (1.0f + (-m.array()).exp()).inverse().matrix();
  };
  tape.gr = sigmoid(xg.leftCols(d) + hg.leftCols(d));
  tape.gz = sigmoid(xg.middleCols(d, d) + hg.middleCols(d, d));
  tape.hn_h = hg.rightCols(d);
  tape.gn = (xg.rightCols(d) + tape.gr.cwiseProduct(tape.hn_h)).array().tanh().matrix();
  tape.h_new = (MatF::Ones(NV, d) - tape.gz).cwiseProduct(tape.gn) +
               tape.gz.cwiseProduct(Hprev);
  Map<MatF>(h.data(), NV, d) = tape.h_new;

  // Head: per-variable logits from the updated hidden states, shifted by the
  // row max, clipped to [-100, 0], softmax per domain. Normalization runs in
  // double so the exp(-100)/|D| probability floor survives rounding.
  MatF o_out;
  MatF hvar = tape.h_new.topRows(varvals);
  mlp_fwd(p.O, hvar, tape.aO, o_out);
  tape.logits.resize(varvals);
  tape.clip_pass.assign(varvals, 1);
  tape.rowmax_arg.assign(nvars, 0);
  mu.resize(varvals);
  tape.mu.resize(varvals);
  for (int z = 0; z < nvars; ++z) {
    int base = z * V;
    int arg = 0;
    float best = o_out(base, 0);
    for (int a = 1; a < V; ++a) {
      if (o_out(base + a, 0) > best) {
        best = o_out(base + a, 0);
        arg = a;
      }
    }
    tape.rowmax_arg[z] = arg;
    double total = 0.0;
    for (int a = 0; a < V; ++a) {
      float shifted = o_out(base + a, 0) - best;
      if (shifted < -100.0f) {
        shifted = -100.0f;
        tape.clip_pass[base + a] = 0;
      }
      tape.logits[base + a] = shifted;
      total += std::exp(static_cast<double>(shifted));
    }
    for (int a = 0; a < V; ++a) {
      double m = std::exp(static_cast<double>(tape.logits[base + a])) / total;
      mu[base + a] = m;
      tape.mu[base + a] = m;
    }
  }
}

// ---------------------------------------------------------------------------
// Backward

void policy_backward(const PolicyParameters& p, const CompGraph& cg, const StepTape& tape,
                     double coeff, std::span<const int> selected, std::vector<float>& dh,
                     PolicyGrad& grad) {
  const int d = p.d;
  const int NV = cg.num_value_vertices();
  const int NL = cg.num_literals();
  const int NT = cg.num_terms();
  const int nvars = cg.num_vars();
  const int V = cg.num_entities();
  const int varvals = nvars * V;

  Map<MatF> dH(dh.data(), NV, d);
  Map<const MatF> Hprev(tape.h_prev.data(), NV, d);

  // Head: d log mu backward through softmax, clip, and row-max shift.
  MatF d_out(varvals, 1);
  for (int z = 0; z < nvars; ++z) {
    int base = z * V;
    double sum_shift = 0.0;
    std::vector<double> dshift(V);
    for (int a = 0; a < V; ++a) {
      double g = coeff * ((a == selected[z] ? 1.0 : 0.0) - tape.mu[base + a]);
      g *= tape.clip_pass[base + a];
      dshift[a] = g;
      sum_shift += g;
    }
    for (int a = 0; a < V; ++a) {
      double g = dshift[a] - (a == tape.rowmax_arg[z] ? sum_shift : 0.0);
      d_out(base + a, 0) = static_cast<float>(g);
    }
  }
  MatF hvar = tape.h_new.topRows(varvals);
  MatF dhvar;
  mlp_bwd(p.O, grad.g.O, hvar, tape.aO, d_out, dhvar);
  dH.topRows(varvals) += dhvar;

  // GRU backward.
  MatF dgz = dH.cwiseProduct(Hprev - tape.gn);
  MatF dgn = dH.cwiseProduct(MatF::Ones(NV, d) - tape.gz);
  MatF dh_prev = dH.cwiseProduct(tape.gz);
  MatF dgn_pre =
      dgn.cwiseProduct((MatF::Ones(NV, d) - tape.gn.cwiseProduct(tape.gn)));
  MatF dgr = dgn_pre.cwiseProduct(tape.hn_h);
  MatF dgr_pre =
      dgr.cwiseProduct(tape.gr.cwiseProduct(MatF::Ones(NV, d) - tape.gr));
  MatF dgz_pre =
      dgz.cwiseProduct(tape.gz.cwiseProduct(MatF::Ones(NV, d) - tape.gz));

  MatF dxg(NV, 3 * d), dhg(NV, 3 * d);
  dxg.leftCols(d) = dgr_pre;
  dxg.middleCols(d, d) = dgz_pre;
  dxg.rightCols(d) = dgn_pre;
  dhg.leftCols(d) = dgr_pre;
  dhg.middleCols(d, d) = dgz_pre;
  dhg.rightCols(d) = dgn_pre.cwiseProduct(tape.gr);

  linear_grads(p.gru.wx, grad.g.gru.wx, tape.g_in, dxg);
  linear_grads(p.gru.wh, grad.g.gru.wh, Hprev, dhg);
  MatF dg_in = dxg * weights(p.gru.wx);
  dh_prev += dhg * weights(p.gru.wh);

  // g_in = z_v + z_term[term_of(v)]
  MatF dz_v = dg_in;
  MatF dz_term = MatF::Zero(NT, d);
  for (int v = 0; v < NV; ++v) dz_term.row(cg.term_of_value(v)) += dg_in.row(v);

  // z_term = UX(gather(z_v))
  MatF dz_term_in;
  mlp_bwd(p.UX, grad.g.UX, tape.z_term_in, tape.aUX, dz_term, dz_term_in);
  for (int t = 0; t < NT; ++t) {
    const int* win = tape.term_win.data() + static_cast<std::size_t>(t) * d;
    for (int j = 0; j < d; ++j)
      dz_v(win[j], j) += dz_term_in(t, j);
  }

  // z_v = UV(x + y_val) + x
  MatF u = tape.x + tape.y_val;
  MatF du;
  mlp_bwd(p.UV, grad.g.UV, u, tape.aUV, dz_v, du);
  MatF dx = dz_v + du;  // skip connection plus the U_V input path
  const MatF& dy_val = du;

  // y_val gather -> m_R
  MatF dmR = MatF::Zero(NL, 4 * d);
  for (int v = 0; v < NV; ++v) {
    const int* win = tape.val_win.data() + static_cast<std::size_t>(v) * d;
    for (int j = 0; j < d; ++j) {
      int lit = win[j] >> 2;
      int idx = win[j] & 3;
      dmR(lit, idx * d + j) += dy_val(v, j);
    }
  }
  MatF dy_lit;
  mlp_bwd(p.MR, grad.g.MR, tape.y_lit, tape.aMR, dmR, dy_lit);

  // y_lit gather -> m_V
  MatF dmV = MatF::Zero(NV, 4 * d);
  for (int l = 0; l < NL; ++l) {
    const int* win = tape.lit_win.data() + static_cast<std::size_t>(l) * d;
    for (int j = 0; j < d; ++j) {
      int v = win[j] >> 2;
      int idx = win[j] & 3;
      dmV(v, idx * d + j) += dy_lit(l, j);
    }
  }
  MatF dx2;
  mlp_bwd(p.MV, grad.g.MV, tape.x, tape.aMV, dmV, dx2);
  dx += dx2;

  // x = E([h_prev, delta])
  MatF dxin;
  mlp_bwd(p.E, grad.g.E, tape.xin, tape.aE, dx, dxin);
  dh_prev += dxin.leftCols(d);

  Map<MatF>(dh.data(), NV, d) = dh_prev;
}

// ---------------------------------------------------------------------------
// Sampling

double sample_assignment(const std::vector<double>& mu, int num_vars, int num_entities,
                         Rng& rng, std::vector<int>& alpha_out) {
  alpha_out.resize(num_vars);
  double logp = 0.0;
  for (int z = 0; z < num_vars; ++z) {
    int base = z * num_entities;
    double u = uniform_double(rng);
    int pick = num_entities - 1;
    double acc = 0.0;
    for (int a = 0; a < num_entities; ++a) {
      acc += mu[base + a];
      if (u < acc) {
        pick = a;
        break;
      }
    }
    alpha_out[z] = pick;
    logp += std::log(mu[base + pick]);
  }
  return logp;
}

double assignment_log_prob(const std::vector<double>& mu, int num_entities,
                           std::span<const int> alpha) {
  double logp = 0.0;
  for (std::size_t z = 0; z < alpha.size(); ++z)
    logp += std::log(mu[z * num_entities + alpha[z]]);
  return logp;
}

}  // namespace anycq
