#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hrsim/common.hpp"

namespace hrsim {

/// Lower-triangular mask: query i may attend to keys j <= i.
inline Mask causal_mask(Eigen::Index n) {
  if (n < 1) throw UsageError("causal_mask needs n >= 1");
  Mask m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = j <= i;
  return m;
}

/// Row-wise softmax with max subtraction. Masked-out entries get weight
/// exactly zero; a row with no allowed entry is an error.
template <typename Scalar>
Matrix<Scalar> masked_softmax(const Matrix<Scalar>& scores, const Mask* mask = nullptr) {
  if (mask && (mask->rows() != scores.rows() || mask->cols() != scores.cols()))
    throw UsageError("mask shape does not match the score matrix");
  Matrix<Scalar> w(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Scalar peak = -std::numeric_limits<Scalar>::infinity();
    bool any = false;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (mask && !(*mask)(i, j)) continue;
      peak = any ? std::max(peak, scores(i, j)) : scores(i, j);
      any = true;
    }
    if (!any) throw UsageError("attention row " + std::to_string(i) + " is fully masked");
    Scalar total = 0;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      const bool allowed = !mask || (*mask)(i, j);
      w(i, j) = allowed ? std::exp(scores(i, j) - peak) : Scalar(0);
      total += w(i, j);
    }
    w.row(i) /= total;
  }
  return w;
}

/// Attention weights softmax(Q K^T / sqrt(d_k)) with optional mask.
template <typename Scalar>
Matrix<Scalar> attention_weights(const Matrix<Scalar>& q, const Matrix<Scalar>& k,
                                 const Mask* mask = nullptr) {
  if (q.cols() != k.cols())
    throw UsageError("query and key widths differ (" + std::to_string(q.cols()) + " vs " +
                     std::to_string(k.cols()) + ")");
  if (!q.allFinite() || !k.allFinite()) throw DataError("non-finite attention input");
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));
  Matrix<Scalar> scores = (q * k.transpose()) * scale;
  return masked_softmax(scores, mask);
}

template <typename Scalar>
Matrix<Scalar> scaled_dot_attention(const Matrix<Scalar>& q, const Matrix<Scalar>& k,
                                    const Matrix<Scalar>& v, const Mask* mask = nullptr) {
  if (k.rows() != v.rows()) throw UsageError("key and value row counts differ");
  if (!v.allFinite()) throw DataError("non-finite attention input");
  return attention_weights(q, k, mask) * v;
}

/// Per-head projections W_q, W_k (d_model x d_k), W_v (d_model x d_v) and the
/// shared output projection W_o (n_heads*d_v x d_model).
template <typename Scalar>
struct AttentionParams {
  std::vector<Matrix<Scalar>> w_q, w_k, w_v;
  Matrix<Scalar> w_o;

  Eigen::Index heads() const { return static_cast<Eigen::Index>(w_q.size()); }
  Eigen::Index d_model() const { return w_o.cols(); }

  void validate() const {
    const auto h = w_q.size();
    if (h == 0 || w_k.size() != h || w_v.size() != h)
      throw UsageError("attention needs the same nonzero number of q/k/v projections");
    const auto dm = w_o.cols(), dk = w_q[0].cols(), dv = w_v[0].cols();
    for (std::size_t i = 0; i < h; ++i) {
      if (w_q[i].rows() != dm || w_k[i].rows() != dm || w_v[i].rows() != dm)
        throw UsageError("projection input width differs from d_model");
      if (w_q[i].cols() != dk || w_k[i].cols() != dk || w_v[i].cols() != dv)
        throw UsageError("inconsistent d_k/d_v across heads");
      if (!w_q[i].allFinite() || !w_k[i].allFinite() || !w_v[i].allFinite())
        throw DataError("non-finite attention projection");
    }
    if (w_o.rows() != static_cast<Eigen::Index>(h) * dv)
      throw UsageError("W_o must have n_heads*d_v rows");
    if (!w_o.allFinite()) throw DataError("non-finite output projection");
  }
};

template <typename Scalar>
Matrix<Scalar> multi_head_attention(const Matrix<Scalar>& x_q, const Matrix<Scalar>& x_kv,
                                    const AttentionParams<Scalar>& p, const Mask* mask = nullptr) {
  p.validate();
  if (x_q.cols() != p.d_model() || x_kv.cols() != p.d_model())
    throw UsageError("attention input width differs from d_model");
  const Eigen::Index dv = p.w_v[0].cols();
  Matrix<Scalar> concat(x_q.rows(), p.heads() * dv);
  for (Eigen::Index h = 0; h < p.heads(); ++h) {
    const Matrix<Scalar> q = x_q * p.w_q[h];
    const Matrix<Scalar> k = x_kv * p.w_k[h];
    const Matrix<Scalar> v = x_kv * p.w_v[h];
    concat.middleCols(h * dv, dv) = scaled_dot_attention(q, k, v, mask);
  }
  return concat * p.w_o;
}

template <typename Scalar>
struct LayerNormParams {
  RowVector<Scalar> gain;
  RowVector<Scalar> bias;
  Scalar eps = Scalar(1e-12);

  static LayerNormParams identity(Eigen::Index d) {
    return {RowVector<Scalar>::Ones(d), RowVector<Scalar>::Zero(d)};
  }
};

/// Normalizes each row to zero mean and unit (population) variance, then
/// applies gain and bias.
template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const LayerNormParams<Scalar>& p) {
  if (p.gain.size() != x.cols() || p.bias.size() != x.cols())
    throw UsageError("layer norm parameters do not match input width");
  Matrix<Scalar> y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Scalar mean = x.row(i).mean();
    const RowVector<Scalar> centered = x.row(i).array() - mean;
    const Scalar var = centered.squaredNorm() / static_cast<Scalar>(x.cols());
    y.row(i) = (centered / std::sqrt(var + p.eps)).cwiseProduct(p.gain) + p.bias;
  }
  return y;
}

/// Position-wise two-layer network with ReLU in between.
template <typename Scalar>
struct FeedForwardParams {
  Matrix<Scalar> w1;  // d_model x d_ff
  RowVector<Scalar> b1;
  Matrix<Scalar> w2;  // d_ff x d_model
  RowVector<Scalar> b2;
};

template <typename Scalar>
Matrix<Scalar> feed_forward(const Matrix<Scalar>& x, const FeedForwardParams<Scalar>& p) {
  if (x.cols() != p.w1.rows() || p.w1.cols() != p.w2.rows() || p.b1.size() != p.w1.cols() ||
      p.b2.size() != p.w2.cols())
    throw UsageError("feed-forward dimensions do not chain");
  Matrix<Scalar> hidden = (x * p.w1).rowwise() + p.b1;
  hidden = hidden.cwiseMax(Scalar(0));
  return (hidden * p.w2).rowwise() + p.b2;
}

template <typename Scalar>
struct EncoderBlockParams {
  AttentionParams<Scalar> self_attn;
  LayerNormParams<Scalar> norm1;
  FeedForwardParams<Scalar> ffn;
  LayerNormParams<Scalar> norm2;
};

template <typename Scalar>
struct DecoderBlockParams {
  AttentionParams<Scalar> self_attn;
  LayerNormParams<Scalar> norm1;
  AttentionParams<Scalar> cross_attn;
  LayerNormParams<Scalar> norm2;
  FeedForwardParams<Scalar> ffn;
  LayerNormParams<Scalar> norm3;
};

namespace detail {
template <typename Scalar>
void require_finite(const Matrix<Scalar>& m, const char* where) {
  if (!m.allFinite()) throw DataError(std::string("non-finite values in ") + where);
}
}  // namespace detail

/// Post-norm encoder block: LayerNorm(x + SelfAttn(x)), then
/// LayerNorm(h + FFN(h)).
template <typename Scalar>
Matrix<Scalar> encoder_block_forward(const Matrix<Scalar>& x, const EncoderBlockParams<Scalar>& p) {
  detail::require_finite(x, "encoder input");
  const Matrix<Scalar> h = layer_norm<Scalar>(x + multi_head_attention(x, x, p.self_attn), p.norm1);
  Matrix<Scalar> out = layer_norm<Scalar>(h + feed_forward(h, p.ffn), p.norm2);
  detail::require_finite(out, "encoder block output");
  return out;
}

/// Post-norm decoder block: causal self-attention, cross-attention over the
/// encoder output, then the feed-forward sub-layer.
template <typename Scalar>
Matrix<Scalar> decoder_block_forward(const Matrix<Scalar>& y, const Matrix<Scalar>& enc_out,
                                     const DecoderBlockParams<Scalar>& p) {
  detail::require_finite(y, "decoder input");
  detail::require_finite(enc_out, "encoder output");
  const Mask mask = causal_mask(y.rows());
  const Matrix<Scalar> h1 =
      layer_norm<Scalar>(y + multi_head_attention(y, y, p.self_attn, &mask), p.norm1);
  const Matrix<Scalar> h2 =
      layer_norm<Scalar>(h1 + multi_head_attention(h1, enc_out, p.cross_attn), p.norm2);
  Matrix<Scalar> out = layer_norm<Scalar>(h2 + feed_forward(h2, p.ffn), p.norm3);
  detail::require_finite(out, "decoder block output");
  return out;
}

}  // namespace hrsim
