#include "hrsim/asr.hpp"

#include <cmath>

namespace hrsim {

void ToyAsrConfig::validate() const {
  if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0)
    throw UsageError("d_model must be a positive multiple of n_heads");
  if (n_enc_blocks < 0 || n_dec_blocks < 1) throw UsageError("need >= 0 encoder and >= 1 decoder blocks");
  if (d_ff < 1) throw UsageError("d_ff must be positive");
  if (prenet_channels.empty()) throw UsageError("PreNet needs at least one conv layer");
  for (int c : prenet_channels)
    if (c < 1) throw UsageError("PreNet channel counts must be positive");
  if (vocab_size < 2) throw UsageError("vocab_size must be >= 2 (one label plus blank)");
  if (max_decode_len < 1) throw UsageError("max_decode_len must be positive");
}

int ToyAsrConfig::min_input_frames() const {
  return (1 << (prenet_channels.size() + 1)) - 1;
}

MatrixD generated_weights(Eigen::Index rows, Eigen::Index cols, double tag) {
  MatrixD w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      const auto di = static_cast<double>(i), dj = static_cast<double>(j);
      w(i, j) = 0.1 * std::sin(tag + 13.0 * di + 7.0 * dj + di * dj);
    }
  return w;
}

MatrixD positional_encoding(Eigen::Index n, Eigen::Index d) {
  MatrixD pe(n, d);
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index k = 0; k < d; ++k) {
      const double rate = std::pow(10000.0, -static_cast<double>(k - k % 2) / static_cast<double>(d));
      pe(t, k) = k % 2 == 0 ? std::sin(t * rate) : std::cos(t * rate);
    }
  return pe;
}

namespace {

// Hands out one distinct tag per parameter tensor, in construction order.
class WeightSource {
 public:
  explicit WeightSource(std::int64_t seed_tag) : seed_(static_cast<double>(seed_tag)) {}

  MatrixD next(Eigen::Index rows, Eigen::Index cols) {
    return generated_weights(rows, cols, seed_ + 1000.0 * static_cast<double>(++count_));
  }

 private:
  double seed_;
  int count_ = 0;
};

AttentionParams<double> make_attention(WeightSource& src, int d_model, int n_heads) {
  const int d_head = d_model / n_heads;
  AttentionParams<double> p;
  for (int h = 0; h < n_heads; ++h) {
    p.w_q.push_back(src.next(d_model, d_head));
    p.w_k.push_back(src.next(d_model, d_head));
    p.w_v.push_back(src.next(d_model, d_head));
  }
  p.w_o = src.next(d_model, d_model);
  return p;
}

FeedForwardParams<double> make_ffn(WeightSource& src, int d_model, int d_ff) {
  return {src.next(d_model, d_ff), RowVector<double>::Zero(d_ff), src.next(d_ff, d_model),
          RowVector<double>::Zero(d_model)};
}

// Log-softmax of each row.
MatrixD log_softmax_rows(const MatrixD& logits) {
  MatrixD out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double peak = logits.row(i).maxCoeff();
    const double lse = peak + std::log((logits.row(i).array() - peak).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

}  // namespace

ToyAsr::ToyAsr(const ToyAsrConfig& cfg, int n_mels) : cfg_(cfg), n_mels_(n_mels) {
  cfg_.validate();
  if (n_mels < 1) throw UsageError("feature width must be positive");
  WeightSource src(cfg_.seed_tag);

  int c_in = 1;
  for (int c_out : cfg_.prenet_channels) {
    conv_.push_back(src.next(c_out, c_in * 3));
    c_in = c_out;
  }
  input_proj_ = src.next(prenet_dim(), cfg_.d_model);
  for (int b = 0; b < cfg_.n_enc_blocks; ++b) {
    EncoderBlockParams<double> p;
    p.self_attn = make_attention(src, cfg_.d_model, cfg_.n_heads);
    p.norm1 = LayerNormParams<double>::identity(cfg_.d_model);
    p.ffn = make_ffn(src, cfg_.d_model, cfg_.d_ff);
    p.norm2 = LayerNormParams<double>::identity(cfg_.d_model);
    encoder_.push_back(std::move(p));
  }
  for (int b = 0; b < cfg_.n_dec_blocks; ++b) {
    DecoderBlockParams<double> p;
    p.self_attn = make_attention(src, cfg_.d_model, cfg_.n_heads);
    p.norm1 = LayerNormParams<double>::identity(cfg_.d_model);
    p.cross_attn = make_attention(src, cfg_.d_model, cfg_.n_heads);
    p.norm2 = LayerNormParams<double>::identity(cfg_.d_model);
    p.ffn = make_ffn(src, cfg_.d_model, cfg_.d_ff);
    p.norm3 = LayerNormParams<double>::identity(cfg_.d_model);
    decoder_.push_back(std::move(p));
  }
  embedding_ = src.next(cfg_.vocab_size, cfg_.d_model);
  output_proj_ = src.next(cfg_.d_model, cfg_.vocab_size);
  ctc_proj_ = src.next(cfg_.d_model, cfg_.vocab_size);
}

Eigen::Index ToyAsr::prenet_dim() const {
  return static_cast<Eigen::Index>(cfg_.prenet_channels.back()) * n_mels_;
}

MatrixD ToyAsr::prenet(const MatrixD& features) const {
  if (features.cols() != n_mels_)
    throw UsageError("feature width " + std::to_string(features.cols()) + " does not match model (" +
                     std::to_string(n_mels_) + ")");
  if (features.rows() < cfg_.min_input_frames())
    throw DataError("input of " + std::to_string(features.rows()) +
                    " frames is shorter than the PreNet receptive field (" +
                    std::to_string(cfg_.min_input_frames()) + ")");
  if (!features.allFinite()) throw DataError("non-finite input features");

  // Layout: row t holds channel c, band f at column c * n_mels + f.
  MatrixD x = features;
  Eigen::Index c_in = 1;
  for (const MatrixD& w : conv_) {
    const Eigen::Index c_out = w.rows();
    const Eigen::Index t_in = x.rows();
    const Eigen::Index t_out = (t_in + 1) / 2;
    MatrixD y = MatrixD::Zero(t_out, c_out * n_mels_);
    for (Eigen::Index t = 0; t < t_out; ++t)
      for (Eigen::Index co = 0; co < c_out; ++co)
        for (Eigen::Index ci = 0; ci < c_in; ++ci)
          for (Eigen::Index k = 0; k < 3; ++k) {
            const Eigen::Index src = 2 * t + k - 1;
            if (src < 0 || src >= t_in) continue;
            y.row(t).segment(co * n_mels_, n_mels_) +=
                w(co, ci * 3 + k) * x.row(src).segment(ci * n_mels_, n_mels_);
          }
    x = y.cwiseMax(0.0);
    c_in = c_out;
  }
  return x;
}

MatrixD ToyAsr::encode(const MatrixD& prenet_out) const {
  MatrixD h = prenet_out * input_proj_ + positional_encoding(prenet_out.rows(), cfg_.d_model);
  for (const auto& block : encoder_) h = encoder_block_forward(h, block);
  return h;
}

MatrixD ToyAsr::decode_prefix(const std::vector<int>& tokens, const MatrixD& enc_out) const {
  const auto n = static_cast<Eigen::Index>(tokens.size());
  MatrixD y(n, cfg_.d_model);
  for (Eigen::Index u = 0; u < n; ++u) {
    if (tokens[u] < 0 || tokens[u] >= cfg_.vocab_size) throw UsageError("token out of range");
    y.row(u) = embedding_.row(tokens[u]);
  }
  y += positional_encoding(n, cfg_.d_model);
  for (const auto& block : decoder_) y = decoder_block_forward(y, enc_out, block);
  return y;
}

ToyForwardResult ToyAsr::forward(const MatrixD& features) const {
  ToyForwardResult r;
  r.pre = prenet(features);
  r.enc = encode(r.pre);
  r.ctc_log_probs = log_softmax_rows(r.enc * ctc_proj_);

  const int end = cfg_.end_token();
  std::vector<int> prefix{end};
  std::vector<RowVector<double>> steps;
  for (int step = 0; step < cfg_.max_decode_len; ++step) {
    const MatrixD out = decode_prefix(prefix, r.enc);
    const RowVector<double> h = out.row(out.rows() - 1);
    const RowVector<double> logits = h * output_proj_;
    // At least one step is emitted, so the end token is barred at step 0.
    int best = -1;
    for (int v = 0; v < cfg_.vocab_size; ++v) {
      if (step == 0 && v == end) continue;
      if (best < 0 || logits(v) > logits(best)) best = v;
    }
    if (best == end) break;
    steps.push_back(h);
    r.tokens.push_back(best);
    prefix.push_back(best);
  }
  r.dec.resize(static_cast<Eigen::Index>(steps.size()), cfg_.d_model);
  for (std::size_t u = 0; u < steps.size(); ++u) r.dec.row(static_cast<Eigen::Index>(u)) = steps[u];
  return r;
}

LevelReps toy_forward(const RepSequence& features, const ToyAsr& model) {
  features.validate();
  if (features.level != Level::Input)
    throw UsageError("toy_forward takes input-level features, got " + std::string(to_string(features.level)));
  const ToyForwardResult r = model.forward(features.data.cast<double>());
  LevelReps out;
  auto pack = [&](RepSequence& rep, const MatrixD& m, Level level) {
    rep.data = m.cast<float>();
    rep.level = level;
    rep.channel = features.channel;
    rep.signal_id = features.signal_id;
  };
  pack(out.pre, r.pre, Level::Pre);
  pack(out.enc, r.enc, Level::Enc);
  pack(out.dec, r.dec, Level::Dec);
  return out;
}

LevelReps toy_forward(const RepSequence& features, const ToyAsrConfig& cfg) {
  return toy_forward(features, ToyAsr(cfg, static_cast<int>(features.dim())));
}

}  // namespace hrsim
