#pragma once

// Temporal transformer fusing a query point's pose code with the codes of its
// tracked points in the key frames: multi-head attention over N = K_f + 1
// tokens per point, residual MLP, average pooling, no positional encoding.

#include "radiant/nn.hpp"

namespace radiant {

template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class FusionMode {
  standard,       // values gathered from key-frame codes (default)
  paper_literal,  // query code weighted by the attention mass, plus f_v(query)
};

inline FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "standard") return FusionMode::standard;
  if (s == "paper-literal") return FusionMode::paper_literal;
  throw std::invalid_argument("unknown fusion mode '" + s + "' (standard, paper-literal)");
}

template <class S>
struct FusionParams {
  Linear<S> fq, fk, fv;   // [C, C], heads as column blocks
  Linear<S> proj;         // output projection after head concat
  Linear<S> mlp1, mlp2;   // residual MLP block
  Eigen::Index heads = 3;

  Eigen::Index dim() const { return fq.weight.dim(0); }
  Eigen::Index head_dim() const { return dim() / heads; }

  static FusionParams create(ParamStore<S>& ps, const std::string& name, Eigen::Index C,
                             Eigen::Index heads, std::mt19937& rng) {
    if (C % heads) op_error("fusion", "code dim must be divisible by head count");
    FusionParams p;
    p.heads = heads;
    S scale = S(std::sqrt(1.0 / double(C)));
    p.fq = Linear<S>::create(ps, name + "/fq", C, C, rng, scale);
    p.fk = Linear<S>::create(ps, name + "/fk", C, C, rng, scale);
    p.fv = Linear<S>::create(ps, name + "/fv", C, C, rng, scale);
    p.proj = Linear<S>::create(ps, name + "/proj", C, C, rng, scale);
    p.mlp1 = Linear<S>::create(ps, name + "/mlp1", C, C, rng);
    p.mlp2 = Linear<S>::create(ps, name + "/mlp2", C, C, rng, scale);
    return p;
  }
};

namespace detail {

// Row-wise softmax of scores/sqrt(d) for one group and head.
template <class S>
MatX<S> attention_from_scores(const MatX<S>& q, const MatX<S>& k) {
  S inv = S(1) / S(std::sqrt(double(q.cols())));
  MatX<S> a = q * k.transpose() * inv;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    auto row = a.row(r).array();
    S m = row.maxCoeff();
    a.row(r) = (row - m).exp();
    a.row(r) /= a.row(r).sum();
  }
  return a;
}

}  // namespace detail

// Eq. 3 weights for one group of N tokens and one head; oracle-visible helper
// (the fused op below recomputes the same quantity internally).
template <class S>
MatX<S> attention_weights(const MatX<S>& q_rows, const MatX<S>& k_rows) {
  return detail::attention_from_scores(q_rows, k_rows);
}

// Multi-head attention over groups of `group` consecutive rows. tokens/q/k/v
// are [P*group, C]; heads are column blocks of width C/heads. Standard mode
// mixes values across the group; paper-literal keeps each token's own code
// weighted by its attention mass and adds its value vector.
template <class S>
Tensor<S> grouped_attention(Tensor<S> tokens, Tensor<S> q, Tensor<S> k, Tensor<S> v,
                            Eigen::Index group, Eigen::Index heads, FusionMode mode) {
  if (tokens.rank() != 2) op_error("attention", "tokens must be [N,C]");
  Eigen::Index rows = tokens.dim(0), C = tokens.dim(1);
  if (rows % group) op_error("attention", "row count not a multiple of the group size");
  if (C % heads) op_error("attention", "feature dim not divisible by head count");
  if (q.shape() != tokens.shape() || k.shape() != tokens.shape() || v.shape() != tokens.shape())
    op_error("attention", "q/k/v shapes must match tokens " + shape_str(tokens.shape()));
  Eigen::Index dh = C / heads, P = rows / group;

  ArrayX<S> out(rows * C);
  Eigen::Map<MatX<S>> om(out.data(), rows, C);
  auto xm = tokens.mat();
  auto qm = q.mat();
  auto km = k.mat();
  auto vm = v.mat();
  for (Eigen::Index g = 0; g < P; ++g) {
    Eigen::Index r0 = g * group;
    for (Eigen::Index h = 0; h < heads; ++h) {
      Eigen::Index c0 = h * dh;
      MatX<S> a = detail::attention_from_scores<S>(qm.block(r0, c0, group, dh),
                                                   km.block(r0, c0, group, dh));
      if (mode == FusionMode::standard) {
        om.block(r0, c0, group, dh).noalias() = a * vm.block(r0, c0, group, dh);
      } else {
        VecX<S> mass = a.rowwise().sum();
        om.block(r0, c0, group, dh) =
            xm.block(r0, c0, group, dh).array().colwise() * mass.array();
        om.block(r0, c0, group, dh) += vm.block(r0, c0, group, dh);
      }
    }
  }

  return detail::make_result<S>(
      tokens.shape(), std::move(out), {tokens, q, k, v},
      [group, heads, dh, P, C, mode](typename Tensor<S>::Node& self) {
        Eigen::Index rows = P * group;
        Eigen::Map<const MatX<S>> g_out(self.grad.data(), rows, C);
        Eigen::Map<const MatX<S>> xm(self.parents[0]->value.data(), rows, C);
        Eigen::Map<const MatX<S>> qm(self.parents[1]->value.data(), rows, C);
        Eigen::Map<const MatX<S>> km(self.parents[2]->value.data(), rows, C);
        Eigen::Map<const MatX<S>> vm(self.parents[3]->value.data(), rows, C);
        Eigen::Map<MatX<S>> gx(self.parents[0]->ensure_grad().data(), rows, C);
        Eigen::Map<MatX<S>> gq(self.parents[1]->ensure_grad().data(), rows, C);
        Eigen::Map<MatX<S>> gk(self.parents[2]->ensure_grad().data(), rows, C);
        Eigen::Map<MatX<S>> gv(self.parents[3]->ensure_grad().data(), rows, C);
        S inv = S(1) / S(std::sqrt(double(dh)));
        for (Eigen::Index g = 0; g < P; ++g) {
          Eigen::Index r0 = g * group;
          for (Eigen::Index h = 0; h < heads; ++h) {
            Eigen::Index c0 = h * dh;
            MatX<S> a = detail::attention_from_scores<S>(qm.block(r0, c0, group, dh),
                                                         km.block(r0, c0, group, dh));
            MatX<S> go = g_out.block(r0, c0, group, dh);
            MatX<S> da;
            if (mode == FusionMode::standard) {
              gv.block(r0, c0, group, dh).noalias() += a.transpose() * go;
              da.noalias() = go * vm.block(r0, c0, group, dh).transpose();
            } else {
              gv.block(r0, c0, group, dh) += go;
              VecX<S> mass = a.rowwise().sum();
              gx.block(r0, c0, group, dh) +=
                  (go.array().colwise() * mass.array()).matrix();
              VecX<S> dmass =
                  (go.array() * xm.block(r0, c0, group, dh).array()).rowwise().sum();
              da = dmass.replicate(1, group);
            }
            // Softmax backward: dS = A o (dA - rowsum(dA o A)), then the 1/sqrt(d).
            VecX<S> rowdot = (da.array() * a.array()).rowwise().sum();
            MatX<S> ds = (a.array() * (da.array().colwise() - rowdot.array())).matrix() * inv;
            gq.block(r0, c0, group, dh).noalias() += ds * km.block(r0, c0, group, dh);
            gk.block(r0, c0, group, dh).noalias() += ds.transpose() * qm.block(r0, c0, group, dh);
          }
        }
      });
}

// Mean over each group of `group` consecutive rows: [P*group, C] -> [P, C].
template <class S>
Tensor<S> group_mean(Tensor<S> x, Eigen::Index group) {
  if (x.rank() != 2) op_error("group_mean", "expects [N,C]");
  Eigen::Index rows = x.dim(0), C = x.dim(1);
  if (rows % group) op_error("group_mean", "row count not a multiple of the group size");
  Eigen::Index P = rows / group;
  ArrayX<S> v(P * C);
  Eigen::Map<MatX<S>> vm(v.data(), P, C);
  auto xm = x.mat();
  for (Eigen::Index g = 0; g < P; ++g)
    vm.row(g) = xm.middleRows(g * group, group).colwise().mean();
  return detail::make_result<S>(
      {P, C}, std::move(v), {x}, [group, P, C](typename Tensor<S>::Node& self) {
        Eigen::Map<MatX<S>> gx(self.parents[0]->ensure_grad().data(), P * group, C);
        Eigen::Map<const MatX<S>> g(self.grad.data(), P, C);
        S inv = S(1) / S(group);
        for (Eigen::Index r = 0; r < P * group; ++r) gx.row(r) += inv * g.row(r / group);
      });
}

// Fused code per point: attention over each group of N tokens, projection with
// residual, residual MLP, then average pooling over the group's outputs.
// tokens [P*N, C] -> [P, C].
template <class S>
Tensor<S> fuse_codes(Tensor<S> tokens, const FusionParams<S>& p, Eigen::Index n_tokens,
                     FusionMode mode) {
  Tensor<S> att = grouped_attention(tokens, p.fq(tokens), p.fk(tokens), p.fv(tokens), n_tokens,
                                    p.heads, mode);
  Tensor<S> y = add(p.proj(att), tokens);
  y = add(y, p.mlp2(relu(p.mlp1(y))));
  return group_mean(y, n_tokens);
}

}  // namespace radiant
