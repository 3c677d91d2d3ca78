#pragma once

// Radiance-field machinery: positional encoding, the density/color MLP,
// stratified and importance sampling, and volume-rendering quadrature.

#include "radiant/camera.hpp"
#include "radiant/nn.hpp"

#include <random>

namespace radiant {

// [N,D] -> [N, D*(2L+1)]: per component v, then per frequency l the blocks
// sin(2^l pi v) and cos(2^l pi v).
template <class S>
Tensor<S> positional_encode(Tensor<S> x, int L) {
  if (x.rank() != 2) op_error("positional_encode", "expects [N,D]");
  if (L < 1) op_error("positional_encode", "L must be >= 1");
  Eigen::Index N = x.dim(0), D = x.dim(1), Dout = D * (2 * L + 1);
  ArrayX<S> v(N * Dout);
  Eigen::Map<MatX<S>> vm(v.data(), N, Dout);
  auto xm = x.mat();
  vm.leftCols(D) = xm;
  for (int l = 0; l < L; ++l) {
    S f = S(std::pow(2.0, l) * M_PI);
    vm.middleCols(D + 2 * l * D, D) = (xm.array() * f).sin();
    vm.middleCols(D + (2 * l + 1) * D, D) = (xm.array() * f).cos();
  }
  return detail::make_result<S>(
      {N, Dout}, std::move(v), {x}, [N, D, L](typename Tensor<S>::Node& self) {
        Eigen::Map<MatX<S>> gx(self.parents[0]->ensure_grad().data(), N, D);
        Eigen::Map<const MatX<S>> xm(self.parents[0]->value.data(), N, D);
        Eigen::Map<const MatX<S>> g(self.grad.data(), N, D * (2 * L + 1));
        gx += g.leftCols(D);
        for (int l = 0; l < L; ++l) {
          S f = S(std::pow(2.0, l) * M_PI);
          gx.array() += g.middleCols(D + 2 * l * D, D).array() * (xm.array() * f).cos() * f;
          gx.array() -= g.middleCols(D + (2 * l + 1) * D, D).array() * (xm.array() * f).sin() * f;
        }
      });
}

// Rows of `values` scattered to the given rows of an otherwise-zero
// [total_rows, C] tensor (adjoint of gather_rows).
template <class S>
Tensor<S> scatter_rows(Tensor<S> values, const std::vector<Eigen::Index>& idx,
                       Eigen::Index total_rows) {
  if (values.rank() != 2) op_error("scatter_rows", "expects [N,C]");
  if (Eigen::Index(idx.size()) != values.dim(0))
    op_error("scatter_rows", "index count does not match value rows");
  Eigen::Index C = values.dim(1);
  ArrayX<S> v = ArrayX<S>::Zero(total_rows * C);
  Eigen::Map<MatX<S>> vm(v.data(), total_rows, C);
  auto am = values.mat();
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= total_rows) op_error("scatter_rows", "row index out of range");
    vm.row(idx[i]) = am.row(Eigen::Index(i));
  }
  return detail::make_result<S>(
      {total_rows, C}, std::move(v), {values},
      [idx, total_rows, C](typename Tensor<S>::Node& self) {
        Eigen::Map<MatX<S>> gv(self.parents[0]->ensure_grad().data(),
                               Eigen::Index(idx.size()), C);
        Eigen::Map<const MatX<S>> g(self.grad.data(), total_rows, C);
        for (size_t i = 0; i < idx.size(); ++i) gv.row(Eigen::Index(i)) += g.row(idx[i]);
      });
}

// ---------------------------------------------------------------------------
// Field network M: (pose code, appearance code, gamma_x, gamma_d) -> (sigma, c).

template <class S>
struct FieldNetwork {
  std::vector<Linear<S>> trunk;
  Linear<S> sigma_head;    // hidden -> 1, relu
  Linear<S> color_hidden;  // hidden + |gamma_d| -> hidden
  Linear<S> color_head;    // hidden -> 3, sigmoid

  static FieldNetwork create(ParamStore<S>& ps, const std::string& name, Eigen::Index code_dim,
                             Eigen::Index xenc_dim, Eigen::Index denc_dim, std::mt19937& rng,
                             Eigen::Index hidden = 128, int layers = 6) {
    FieldNetwork net;
    Eigen::Index in = code_dim + xenc_dim;
    for (int l = 0; l < layers; ++l) {
      net.trunk.push_back(
          Linear<S>::create(ps, name + "/trunk" + std::to_string(l), in, hidden, rng));
      in = hidden;
    }
    net.sigma_head = Linear<S>::create(ps, name + "/sigma", hidden, 1, rng);
    net.color_hidden = Linear<S>::create(ps, name + "/color_hidden", hidden + denc_dim, hidden, rng);
    net.color_head = Linear<S>::create(ps, name + "/color", hidden, 3, rng);
    return net;
  }

  // codes [N, code_dim] (fused pose code and appearance code concatenated by
  // the caller), x_enc [N, |gamma_x|], d_enc [N, |gamma_d|].
  std::pair<Tensor<S>, Tensor<S>> operator()(Tensor<S> codes, Tensor<S> x_enc,
                                             Tensor<S> d_enc) const {
    std::vector<Tensor<S>> ins{codes, x_enc};
    Tensor<S> h = concat(ins, 1);
    for (const auto& layer : trunk) h = relu(layer(h));
    Tensor<S> sigma = relu(sigma_head(h));
    std::vector<Tensor<S>> cin{h, d_enc};
    Tensor<S> ch = relu(color_hidden(concat(cin, 1)));
    Tensor<S> color = sigmoid(color_head(ch));
    return {sigma, color};
  }
};

// ---------------------------------------------------------------------------
// Samplers

// One uniform draw per equal bin of [near, far]; nullptr rng -> bin midpoints.
inline std::vector<double> stratified_samples(double near, double far, int M, std::mt19937* rng) {
  if (M < 1) throw std::invalid_argument("stratified_samples: M must be >= 1");
  if (!(near < far)) throw std::invalid_argument("stratified_samples: near must precede far");
  std::vector<double> out(size_t(M), 0.0);
  double bin = (far - near) / M;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < M; ++i) out[size_t(i)] = near + bin * (i + (rng ? u(*rng) : 0.5));
  return out;
}

// Inverse-CDF draws from the piecewise-constant pdf over the bins between
// consecutive coarse depths, proportional to the bin's left weight plus a
// uniform floor; merged and sorted with the coarse depths.
inline std::vector<double> importance_samples(const std::vector<double>& depths,
                                              const std::vector<double>& weights, int M_f,
                                              std::mt19937& rng, double eps = 1e-2) {
  if (depths.size() != weights.size() || depths.size() < 2)
    throw std::invalid_argument("importance_samples: need matching depths/weights, at least 2");
  for (double w : weights)
    if (w < 0) throw std::invalid_argument("importance_samples: negative weight");
  size_t B = depths.size() - 1;
  std::vector<double> cdf(B + 1, 0.0);
  for (size_t b = 0; b < B; ++b) cdf[b + 1] = cdf[b] + weights[b] + eps;
  double total = cdf[B];
  if (total <= 0) {  // all-zero weights and no floor: uniform fallback
    for (size_t b = 0; b < B; ++b) cdf[b + 1] = cdf[b] + (depths[b + 1] - depths[b]);
    total = cdf[B];
  }
  std::vector<double> out = depths;
  out.reserve(depths.size() + size_t(M_f));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < M_f; ++i) {
    // Stratified uniforms keep the empirical CDF tight.
    double r = total * (i + u(rng)) / M_f;
    size_t b = size_t(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
    b = std::min(std::max(b, size_t(1)), B) - 1;
    double f = (r - cdf[b]) / (cdf[b + 1] - cdf[b]);
    out.push_back(depths[b] + f * (depths[b + 1] - depths[b]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Quadrature (Eq. 2). sigma [R*M,1], color [R*M,3], depth/far per ray; black
// background. Returns pixel colors [R,3]; alpha-composite weights optionally
// written for importance sampling.
template <class S>
Tensor<S> composite_rays(Tensor<S> sigma, Tensor<S> color, const std::vector<double>& depths,
                         const std::vector<double>& fars, Eigen::Index M,
                         MatX<S>* out_weights = nullptr) {
  if (sigma.rank() != 2 || sigma.dim(1) != 1) op_error("composite", "sigma must be [N,1]");
  if (color.rank() != 2 || color.dim(1) != 3) op_error("composite", "color must be [N,3]");
  Eigen::Index rows = sigma.dim(0);
  if (rows != color.dim(0) || rows != Eigen::Index(depths.size()) || rows % M)
    op_error("composite", "inconsistent sample counts");
  Eigen::Index R = rows / M;
  if (Eigen::Index(fars.size()) != R) op_error("composite", "need one far bound per ray");

  ArrayX<S> delta(rows);
  for (Eigen::Index r = 0; r < R; ++r)
    for (Eigen::Index i = 0; i < M; ++i) {
      Eigen::Index k = r * M + i;
      double next = i + 1 < M ? depths[size_t(k + 1)] : fars[size_t(r)];
      if (i + 1 < M && next <= depths[size_t(k)])
        op_error("composite", "sample depths must be strictly increasing");
      delta[k] = S(std::max(next - depths[size_t(k)], 0.0));
    }

  auto run_forward = [M, R](const ArrayX<S>& sg, ArrayX<S>& alpha, ArrayX<S>& trans,
                            const ArrayX<S>& delta) {
    for (Eigen::Index r = 0; r < R; ++r) {
      S T = S(1);
      for (Eigen::Index i = 0; i < M; ++i) {
        Eigen::Index k = r * M + i;
        S a = S(1) - std::exp(-sg[k] * delta[k]);
        alpha[k] = a;
        trans[k] = T;
        T *= S(1) - a;
      }
    }
  };

  ArrayX<S> alpha(rows), trans(rows);
  run_forward(sigma.value(), alpha, trans, delta);
  ArrayX<S> out = ArrayX<S>::Zero(R * 3);
  Eigen::Map<MatX<S>> om(out.data(), R, 3);
  auto cm = color.mat();
  for (Eigen::Index r = 0; r < R; ++r)
    for (Eigen::Index i = 0; i < M; ++i) {
      Eigen::Index k = r * M + i;
      om.row(r) += trans[k] * alpha[k] * cm.row(k);
    }
  if (out_weights) {
    out_weights->resize(R, M);
    for (Eigen::Index r = 0; r < R; ++r)
      for (Eigen::Index i = 0; i < M; ++i)
        (*out_weights)(r, i) = trans[r * M + i] * alpha[r * M + i];
  }

  return detail::make_result<S>(
      {R, 3}, std::move(out), {sigma, color},
      [M, R, delta = std::move(delta), run_forward](typename Tensor<S>::Node& self) {
        Eigen::Index rows = R * M;
        ArrayX<S> alpha(rows), trans(rows);
        Eigen::Map<const ArrayX<S>> sg(self.parents[0]->value.data(), rows);
        ArrayX<S> sg_copy = sg;
        run_forward(sg_copy, alpha, trans, delta);
        Eigen::Map<const MatX<S>> cm(self.parents[1]->value.data(), rows, 3);
        Eigen::Map<const MatX<S>> g(self.grad.data(), R, 3);
        auto& gs = self.parents[0]->ensure_grad();
        Eigen::Map<MatX<S>> gc(self.parents[1]->ensure_grad().data(), rows, 3);
        for (Eigen::Index r = 0; r < R; ++r) {
          // dL/dc_i = w_i g ; dL/dsigma_i = delta_i (T_{i+1} g.c_i - suffix_{k>i} w_k g.c_k)
          S suffix = S(0);
          for (Eigen::Index i = M - 1; i >= 0; --i) {
            Eigen::Index k = r * M + i;
            S w = trans[k] * alpha[k];
            S gdotc = g.row(r).dot(cm.row(k));
            gc.row(k) += w * g.row(r);
            S Tnext = trans[k] * (S(1) - alpha[k]);
            gs[k] += delta[k] * (Tnext * gdotc - suffix);
            suffix += w * gdotc;
          }
        }
      });
}

}  // namespace radiant
