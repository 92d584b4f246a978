#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "salgate/core.hpp"
#include "salgate/nn.hpp"

namespace salgate {

/// Small U-shaped saliency network. Level l runs at input_size / 2^(l+1) with
/// base_channels * 2^l channels and one residual block; the decoder mirrors
/// the encoder with skip concatenation. This is a reduced stand-in for a
/// nested residual-U design: one residual block per level instead of nested
/// U-blocks.
struct SaliencyNetConfig {
  int input_size = 256;
  int depth = 3;
  int base_channels = 16;
  bool deep_supervision = true;

  void validate() const;
  int channels(int level) const { return base_channels << level; }
  int num_outputs() const { return deep_supervision ? depth : 1; }
};

template <class T>
class SaliencyNet {
 public:
  explicit SaliencyNet(const SaliencyNetConfig& cfg);

  void init(uint64_t seed);
  void zero_parameters();

  struct Trace {
    nn::Tensor<T> input;
    std::vector<nn::Tensor<T>> x;    // level entry activation
    std::vector<nn::Tensor<T>> mid;  // residual block inner activation
    std::vector<nn::Tensor<T>> enc;  // residual block output
    std::vector<nn::Tensor<T>> cat;  // decoder input (upsampled deeper level ++ skip)
    std::vector<nn::Tensor<T>> dec;  // decoder output per level; dec[depth-1] == enc[depth-1]
    // Full-resolution logits: [0] final map, [1..] deep-supervision side outputs.
    std::vector<nn::Tensor<T>> logits;
    std::vector<nn::Tensor<T>> side_low;  // side logits at native level resolution
  };

  Trace forward(const nn::Tensor<T>& input) const;

  /// `grad_logits[i]` is dL/d(trace.logits[i]); missing or empty entries mean zero.
  void backward(const Trace& trace, std::span<const nn::Tensor<T>> grad_logits);

  /// Mean per-pixel BCE averaged over supervised outputs; accumulates gradients.
  T loss_and_backward(const nn::Tensor<T>& input, const SaliencyMap& truth);

  std::vector<nn::Param<T>*> params();
  const SaliencyNetConfig& config() const noexcept { return cfg_; }

 private:
  SaliencyNetConfig cfg_;
  nn::Conv2d<T> stem_;
  std::vector<nn::Conv2d<T>> down_;  // down_[l] for l >= 1; down_[0] unused
  std::vector<nn::Conv2d<T>> res_a_, res_b_;
  std::vector<nn::Conv2d<T>> dec_;   // dec_[l] for l < depth-1
  std::vector<nn::Conv2d<T>> side_;
};

/// BCE-with-logits summed into `grad` (scaled by `scale`) and returned as a mean.
template <class T>
T bce_with_logits_mean(const nn::Tensor<T>& logits, const SaliencyMap& truth, nn::Tensor<T>* grad,
                       T scale);

/// Map of sigmoid(logits); logits are clamped so values stay strictly inside (0,1).
template <class T>
SaliencyMap logits_to_map(const nn::Tensor<T>& logits);

/// Full-resolution saliency of an input-size image.
SaliencyMap saliency_forward(const SaliencyNet<float>& net, const ImageBuffer& image);

/// Final map followed by each deep-supervision side output.
std::vector<SaliencyMap> saliency_outputs(const SaliencyNet<float>& net, const ImageBuffer& image);

/// Mean per-pixel binary cross-entropy averaged over the given outputs.
double saliency_loss(std::span<const SaliencyMap> preds, const SaliencyMap& truth_mask);

extern template class SaliencyNet<float>;
extern template class SaliencyNet<double>;

}  // namespace salgate
