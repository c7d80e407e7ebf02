#ifndef MVTAP_LAYERS_H_
#define MVTAP_LAYERS_H_

// Minimal dense layers with hand-written backward passes. Activations are
// row-batched: one row per token, one column per feature.

#include <random>
#include <vector>

#include <Eigen/Core>

namespace mvtap::nn {

using Matrix = Eigen::MatrixXd;

struct Linear {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out

  Linear() = default;
  Linear(int in, int out)
      : weight(Matrix::Zero(in, out)), bias(Matrix::Zero(1, out)) {}

  int in() const { return static_cast<int>(weight.rows()); }
  int out() const { return static_cast<int>(weight.cols()); }

  Matrix Forward(const Matrix& x) const;
  // Accumulates parameter gradients into `grad` and returns dL/dx when
  // `dx` is non-null.
  void Backward(const Matrix& x, const Matrix& dy, Linear* grad,
                Matrix* dx) const;

  // Weights ~ N(0, 1/in), zero bias.
  void InitRandom(std::mt19937_64& rng);
};

// Layer normalization over features with a learned gain and no bias.
struct LayerNormCache {
  Matrix normalized;
  Eigen::VectorXd inv_std;
};

Matrix LayerNormForward(const Matrix& x, const Matrix& gain,
                        LayerNormCache* cache);
Matrix LayerNormBackward(const LayerNormCache& cache, const Matrix& gain,
                         const Matrix& dy, Matrix* dgain);

// Exact GELU, x * Phi(x).
Matrix Gelu(const Matrix& x);
Matrix GeluGrad(const Matrix& x);

// Sets of token rows that attend to each other.
using AttentionGroups = std::vector<std::vector<int>>;

struct AttentionCache {
  // probs[g * heads + h] is the softmax matrix of group g, head h.
  std::vector<Matrix> probs;
};

struct AttentionStats {
  long calls = 0;
  long rows = 0;
  double max_rowsum_error = 0.0;
};

// Scaled dot-product attention within each group, split into `heads` heads
// of width d / heads. Rows absent from every group come out as zero.
Matrix GroupedAttention(const Matrix& q, const Matrix& k, const Matrix& v,
                        const AttentionGroups& groups, int heads,
                        AttentionCache* cache, AttentionStats* stats);

void GroupedAttentionBackward(const Matrix& q, const Matrix& k,
                              const Matrix& v, const AttentionGroups& groups,
                              int heads, const AttentionCache& cache,
                              const Matrix& dout, Matrix* dq, Matrix* dk,
                              Matrix* dv);

// Pre-norm residual block attending along one axis:
//   x1 = x + Wo(attn(norm1(x)));  y = x1 + ff2(gelu(ff1(norm2(x1)))).
struct AxisLayer {
  Matrix norm1;  // 1 x d
  Linear wq, wk, wv, wo;
  Matrix norm2;  // 1 x d
  Linear ff1, ff2;

  AxisLayer() = default;
  AxisLayer(int d, int ff_width);
  void InitRandom(std::mt19937_64& rng);
};

struct AxisLayerCache {
  Matrix x;
  LayerNormCache n1;
  Matrix h, q, k, v;
  AttentionCache attn;
  Matrix a, x1;
  LayerNormCache n2;
  Matrix h2, u, g;
};

Matrix AxisLayerForward(const AxisLayer& layer, const Matrix& x,
                        const AttentionGroups& groups, int heads,
                        AxisLayerCache* cache, AttentionStats* stats);

// Returns dL/dx; parameter gradients accumulate into `grad`.
Matrix AxisLayerBackward(const AxisLayer& layer, const AttentionGroups& groups,
                         int heads, const AxisLayerCache& cache,
                         const Matrix& dy, AxisLayer* grad);

}  // namespace mvtap::nn

#endif  // MVTAP_LAYERS_H_
