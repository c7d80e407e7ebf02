#include "mvtap/layers.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvtap/error.h"

namespace mvtap::nn {
namespace {

constexpr double kNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

Matrix Gather(const Matrix& m, const std::vector<int>& rows, int col0,
              int cols) {
  Matrix out(rows.size(), cols);
  for (size_t i = 0; i < rows.size(); ++i) {
    out.row(i) = m.block(rows[i], col0, 1, cols);
  }
  return out;
}

void ScatterAdd(Matrix* m, const std::vector<int>& rows, int col0,
                const Matrix& block) {
  for (size_t i = 0; i < rows.size(); ++i) {
    m->block(rows[i], col0, 1, block.cols()) += block.row(i);
  }
}

}  // namespace

Matrix Linear::Forward(const Matrix& x) const {
  if (x.cols() != weight.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "linear layer expects " + std::to_string(weight.rows()) +
                    " inputs, got " + std::to_string(x.cols()));
  }
  Matrix y = x * weight;
  y.rowwise() += bias.row(0);
  return y;
}

void Linear::Backward(const Matrix& x, const Matrix& dy, Linear* grad,
                      Matrix* dx) const {
  if (grad != nullptr) {
    grad->weight.noalias() += x.transpose() * dy;
    grad->bias += dy.colwise().sum();
  }
  if (dx != nullptr) *dx = dy * weight.transpose();
}

void Linear::InitRandom(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(in()));
  for (Eigen::Index i = 0; i < weight.size(); ++i) {
    weight.data()[i] = normal(rng);
  }
  bias.setZero();
}

Matrix LayerNormForward(const Matrix& x, const Matrix& gain,
                        LayerNormCache* cache) {
  const Eigen::Index d = x.cols();
  Matrix normalized(x.rows(), d);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + kNormEps);
    normalized.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  Matrix y = normalized.array().rowwise() * gain.row(0).array();
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix LayerNormBackward(const LayerNormCache& cache, const Matrix& gain,
                         const Matrix& dy, Matrix* dgain) {
  const Matrix& xhat = cache.normalized;
  if (dgain != nullptr) {
    *dgain += (dy.array() * xhat.array()).colwise().sum().matrix();
  }
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_d = dxhat.row(r).mean();
    const double mean_dx = dxhat.row(r).dot(xhat.row(r)) / dy.cols();
    dx.row(r) = cache.inv_std(r) *
                (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx)
                    .matrix();
  }
  return dx;
}

Matrix Gelu(const Matrix& x) {
  return x.unaryExpr(
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
}

Matrix GeluGrad(const Matrix& x) {
  return x.unaryExpr([](double v) {
    return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
           v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
  });
}

Matrix GroupedAttention(const Matrix& q, const Matrix& k, const Matrix& v,
                        const AttentionGroups& groups, int heads,
                        AttentionCache* cache, AttentionStats* stats) {
  const int d = static_cast<int>(q.cols());
  if (heads < 1 || d % heads != 0) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature width must be divisible by the head count");
  }
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out = Matrix::Zero(q.rows(), d);
  if (cache != nullptr) {
    cache->probs.clear();
    cache->probs.reserve(groups.size() * heads);
  }
  for (const auto& rows : groups) {
    for (int h = 0; h < heads; ++h) {
      const Matrix qh = Gather(q, rows, h * dh, dh);
      const Matrix kh = Gather(k, rows, h * dh, dh);
      const Matrix vh = Gather(v, rows, h * dh, dh);
      Matrix p = (qh * kh.transpose()) * scale;
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const double mx = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - mx).exp();
        p.row(r) /= p.row(r).sum();
      }
      if (stats != nullptr) {
        ++stats->calls;
        stats->rows += p.rows();
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
          stats->max_rowsum_error =
              std::max(stats->max_rowsum_error, std::abs(p.row(r).sum() - 1.0));
        }
      }
      ScatterAdd(&out, rows, h * dh, p * vh);
      if (cache != nullptr) cache->probs.push_back(std::move(p));
    }
  }
  return out;
}

void GroupedAttentionBackward(const Matrix& q, const Matrix& k,
                              const Matrix& v, const AttentionGroups& groups,
                              int heads, const AttentionCache& cache,
                              const Matrix& dout, Matrix* dq, Matrix* dk,
                              Matrix* dv) {
  const int d = static_cast<int>(q.cols());
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  *dq = Matrix::Zero(q.rows(), d);
  *dk = Matrix::Zero(k.rows(), d);
  *dv = Matrix::Zero(v.rows(), d);
  size_t idx = 0;
  for (const auto& rows : groups) {
    for (int h = 0; h < heads; ++h, ++idx) {
      const Matrix& p = cache.probs[idx];
      const Matrix qh = Gather(q, rows, h * dh, dh);
      const Matrix kh = Gather(k, rows, h * dh, dh);
      const Matrix vh = Gather(v, rows, h * dh, dh);
      const Matrix doh = Gather(dout, rows, h * dh, dh);
      const Matrix dp = doh * vh.transpose();
      Matrix ds = dp;
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const double dot = dp.row(r).dot(p.row(r));
        ds.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
      }
      ds *= scale;
      ScatterAdd(dq, rows, h * dh, ds * kh);
      ScatterAdd(dk, rows, h * dh, ds.transpose() * qh);
      ScatterAdd(dv, rows, h * dh, p.transpose() * doh);
    }
  }
}

AxisLayer::AxisLayer(int d, int ff_width)
    : norm1(Matrix::Ones(1, d)),
      wq(d, d),
      wk(d, d),
      wv(d, d),
      wo(d, d),
      norm2(Matrix::Ones(1, d)),
      ff1(d, ff_width),
      ff2(ff_width, d) {}

void AxisLayer::InitRandom(std::mt19937_64& rng) {
  norm1.setOnes();
  norm2.setOnes();
  for (Linear* l : {&wq, &wk, &wv, &wo, &ff1, &ff2}) l->InitRandom(rng);
}

Matrix AxisLayerForward(const AxisLayer& layer, const Matrix& x,
                        const AttentionGroups& groups, int heads,
                        AxisLayerCache* cache, AttentionStats* stats) {
  AxisLayerCache local;
  AxisLayerCache& c = cache != nullptr ? *cache : local;
  c.x = x;
  c.h = LayerNormForward(x, layer.norm1, &c.n1);
  c.q = layer.wq.Forward(c.h);
  c.k = layer.wk.Forward(c.h);
  c.v = layer.wv.Forward(c.h);
  c.a = GroupedAttention(c.q, c.k, c.v, groups, heads, &c.attn, stats);
  c.x1 = x + layer.wo.Forward(c.a);
  c.h2 = LayerNormForward(c.x1, layer.norm2, &c.n2);
  c.u = layer.ff1.Forward(c.h2);
  c.g = Gelu(c.u);
  return c.x1 + layer.ff2.Forward(c.g);
}

Matrix AxisLayerBackward(const AxisLayer& layer, const AttentionGroups& groups,
                         int heads, const AxisLayerCache& c, const Matrix& dy,
                         AxisLayer* grad) {
  Matrix dg;
  layer.ff2.Backward(c.g, dy, &grad->ff2, &dg);
  const Matrix du = dg.cwiseProduct(GeluGrad(c.u));
  Matrix dh2;
  layer.ff1.Backward(c.h2, du, &grad->ff1, &dh2);
  Matrix dx1 = dy + LayerNormBackward(c.n2, layer.norm2, dh2, &grad->norm2);

  Matrix da;
  layer.wo.Backward(c.a, dx1, &grad->wo, &da);
  Matrix dq, dk, dv;
  GroupedAttentionBackward(c.q, c.k, c.v, groups, heads, c.attn, da, &dq, &dk,
                           &dv);
  Matrix dh, tmp;
  layer.wq.Backward(c.h, dq, &grad->wq, &dh);
  layer.wk.Backward(c.h, dk, &grad->wk, &tmp);
  dh += tmp;
  layer.wv.Backward(c.h, dv, &grad->wv, &tmp);
  dh += tmp;
  return dx1 + LayerNormBackward(c.n1, layer.norm1, dh, &grad->norm1);
}

}  // namespace mvtap::nn
