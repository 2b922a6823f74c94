#pragma once

#include <cstdint>
#include <vector>

#include "hrsim/attention.hpp"
#include "hrsim/repr.hpp"

namespace hrsim {

/// Per-step widths of the full-size recogniser's PreNet, encoder and decoder
/// outputs. Kept for reference; the toy model is much smaller.
struct ReferenceModelDims {
  static constexpr int prenet = 10240;
  static constexpr int encoder = 768;
  static constexpr int decoder = 768;
  static constexpr int conv_layers = 3;
  static constexpr int encoder_blocks = 12;
  static constexpr int decoder_blocks = 6;
};

struct ToyAsrConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_enc_blocks = 2;
  int n_dec_blocks = 2;
  int d_ff = 256;
  std::vector<int> prenet_channels{8, 8};
  int vocab_size = 32;  ///< index 0 is the CTC blank, vocab_size-1 is start/end
  int max_decode_len = 32;
  std::int64_t seed_tag = 0;

  void validate() const;
  /// Minimum input length: receptive field of the stride-2, width-3 conv stack.
  int min_input_frames() const;
  int end_token() const { return vocab_size - 1; }
};

/// Deterministic weight matrix: W(i, j) = 0.1 * sin(tag + 13 i + 7 j + i j).
/// The i j term keeps the matrix full rank; without it every W is rank 2.
MatrixD generated_weights(Eigen::Index rows, Eigen::Index cols, double tag);

struct ToyForwardResult {
  MatrixD pre;   ///< T_pre x (channels * n_mels), post-ReLU conv features
  MatrixD enc;   ///< T_pre x d_model, last encoder block
  MatrixD dec;   ///< U x d_model, last decoder block per emitted token
  MatrixD ctc_log_probs;  ///< T_pre x vocab, log-softmax of the CTC head
  std::vector<int> tokens;  ///< greedy output, end token excluded
};

/// Forward-only transformer recogniser with closed-form weights. Immutable
/// after construction, so one instance can serve many threads.
class ToyAsr {
 public:
  ToyAsr(const ToyAsrConfig& cfg, int n_mels);

  const ToyAsrConfig& config() const { return cfg_; }
  int n_mels() const { return n_mels_; }
  Eigen::Index prenet_dim() const;

  MatrixD prenet(const MatrixD& features) const;
  MatrixD encode(const MatrixD& prenet_out) const;
  ToyForwardResult forward(const MatrixD& features) const;

  /// Runs the decoder stack over a token prefix (teacher-forced); row u is the
  /// last block's output at position u.
  MatrixD decode_prefix(const std::vector<int>& tokens, const MatrixD& enc_out) const;

 private:
  ToyAsrConfig cfg_;
  int n_mels_;
  std::vector<MatrixD> conv_;  // per layer: C_out x (C_in * 3)
  MatrixD input_proj_;
  std::vector<EncoderBlockParams<double>> encoder_;
  std::vector<DecoderBlockParams<double>> decoder_;
  MatrixD embedding_;
  MatrixD output_proj_;
  MatrixD ctc_proj_;
};

/// Sinusoidal position encoding, n x d.
MatrixD positional_encoding(Eigen::Index n, Eigen::Index d);

struct LevelReps {
  RepSequence pre, enc, dec;
};

/// Runs the toy model on one channel's input features and packages the three
/// representation levels with the input's channel and signal id.
LevelReps toy_forward(const RepSequence& features, const ToyAsr& model);
LevelReps toy_forward(const RepSequence& features, const ToyAsrConfig& cfg);

}  // namespace hrsim
