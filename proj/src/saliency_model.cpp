#include "salgate/saliency_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "salgate/detector.hpp"

namespace salgate {

void SaliencyNetConfig::validate() const {
  if (depth < 1) throw Error(ErrorKind::ConfigMismatch, "saliency depth must be >= 1");
  if (base_channels <= 0) throw Error(ErrorKind::ConfigMismatch, "base_channels must be positive");
  if (input_size <= 0 || input_size % (1 << depth) != 0) {
    throw Error(ErrorKind::ConfigMismatch, "saliency input_size must be divisible by 2^depth");
  }
}

template <class T>
SaliencyNet<T>::SaliencyNet(const SaliencyNetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int D = cfg_.depth;
  stem_ = nn::Conv2d<T>("saliency.stem", 3, cfg_.channels(0), 3, 2);
  for (int l = 0; l < D; ++l) {
    const std::string p = "saliency.level" + std::to_string(l);
    if (l == 0) {
      down_.emplace_back();
    } else {
      down_.emplace_back(p + ".down", cfg_.channels(l - 1), cfg_.channels(l), 3, 2);
    }
    res_a_.emplace_back(p + ".res_a", cfg_.channels(l), cfg_.channels(l), 3, 1);
    res_b_.emplace_back(p + ".res_b", cfg_.channels(l), cfg_.channels(l), 3, 1);
    if (l < D - 1) {
      dec_.emplace_back(p + ".dec", cfg_.channels(l + 1) + cfg_.channels(l), cfg_.channels(l), 3, 1);
    }
    side_.emplace_back(p + ".side", cfg_.channels(l), 1, 1, 1);
  }
}

template <class T>
void SaliencyNet<T>::init(uint64_t seed) {
  std::mt19937_64 rng(seed);
  stem_.init_he(rng);
  for (int l = 0; l < cfg_.depth; ++l) {
    if (l > 0) down_[l].init_he(rng);
    res_a_[l].init_he(rng);
    res_b_[l].init_he(rng, 0.5);
    if (l < cfg_.depth - 1) dec_[l].init_he(rng);
    side_[l].init_he(rng, 0.1);
  }
}

template <class T>
void SaliencyNet<T>::zero_parameters() {
  for (auto* p : params()) p->value.zero();
}

namespace {

template <class T>
nn::Tensor<T> conv_act(const nn::Conv2d<T>& conv, const nn::Tensor<T>& x) {
  nn::Tensor<T> y = conv.forward(x);
  nn::leaky_relu_inplace(y);
  return y;
}

}  // namespace

template <class T>
typename SaliencyNet<T>::Trace SaliencyNet<T>::forward(const nn::Tensor<T>& input) const {
  const int D = cfg_.depth, S = cfg_.input_size;
  if (input.c != 3 || input.h != S || input.w != S) {
    throw Error(ErrorKind::ConfigMismatch,
                "saliency input must be 3x" + std::to_string(S) + "x" + std::to_string(S));
  }
  Trace t;
  t.input = input;
  for (int l = 0; l < D; ++l) {
    t.x.push_back(l == 0 ? conv_act(stem_, input) : conv_act(down_[l], t.enc[l - 1]));
    t.mid.push_back(conv_act(res_a_[l], t.x[l]));
    nn::Tensor<T> e = res_b_[l].forward(t.mid[l]);
    nn::add_inplace(e, t.x[l]);
    nn::leaky_relu_inplace(e);
    t.enc.push_back(std::move(e));
  }
  t.dec.resize(D);
  t.cat.resize(D);
  t.dec[D - 1] = t.enc[D - 1];
  for (int l = D - 2; l >= 0; --l) {
    t.cat[l] = nn::concat_channels(nn::upsample_nearest2(t.dec[l + 1]), t.enc[l]);
    t.dec[l] = conv_act(dec_[l], t.cat[l]);
  }
  for (int o = 0; o < cfg_.num_outputs(); ++o) {
    t.side_low.push_back(side_[o].forward(t.dec[o]));
    t.logits.push_back(nn::resize_bilinear(t.side_low[o], S, S));
  }
  return t;
}

template <class T>
void SaliencyNet<T>::backward(const Trace& t, std::span<const nn::Tensor<T>> grad_logits) {
  const int D = cfg_.depth;
  std::vector<nn::Tensor<T>> g_dec(D);
  auto accumulate = [](nn::Tensor<T>& dst, nn::Tensor<T>&& src) {
    if (dst.size() == 0) {
      dst = std::move(src);
    } else {
      nn::add_inplace(dst, src);
    }
  };
  for (int o = 0; o < cfg_.num_outputs() && o < static_cast<int>(grad_logits.size()); ++o) {
    if (grad_logits[o].size() == 0) continue;
    const nn::Tensor<T> g_low = nn::resize_bilinear_backward(grad_logits[o], t.side_low[o].h, t.side_low[o].w);
    accumulate(g_dec[o], side_[o].backward(t.dec[o], g_low, true));
  }
  std::vector<nn::Tensor<T>> g_enc(D);
  for (int l = 0; l < D - 1; ++l) {
    if (g_dec[l].size() == 0) continue;
    nn::leaky_relu_backward_inplace(g_dec[l], t.dec[l]);
    const nn::Tensor<T> g_cat = dec_[l].backward(t.cat[l], g_dec[l], true);
    auto [g_up, g_skip] = nn::split_channels(g_cat, cfg_.channels(l + 1));
    accumulate(g_dec[l + 1], nn::upsample_nearest2_backward(g_up));
    accumulate(g_enc[l], std::move(g_skip));
  }
  if (g_dec[D - 1].size() != 0) accumulate(g_enc[D - 1], std::move(g_dec[D - 1]));
  for (int l = D - 1; l >= 0; --l) {
    if (g_enc[l].size() == 0) continue;
    nn::Tensor<T> g = std::move(g_enc[l]);
    nn::leaky_relu_backward_inplace(g, t.enc[l]);
    nn::Tensor<T> g_x = g;  // identity branch of the residual block
    nn::Tensor<T> g_mid = res_b_[l].backward(t.mid[l], g, true);
    nn::leaky_relu_backward_inplace(g_mid, t.mid[l]);
    nn::add_inplace(g_x, res_a_[l].backward(t.x[l], g_mid, true));
    nn::leaky_relu_backward_inplace(g_x, t.x[l]);
    if (l == 0) {
      stem_.backward(t.input, g_x, false);
    } else {
      accumulate(g_enc[l - 1], down_[l].backward(t.enc[l - 1], g_x, true));
    }
  }
}

template <class T>
T bce_with_logits_mean(const nn::Tensor<T>& logits, const SaliencyMap& truth, nn::Tensor<T>* grad,
                       T scale) {
  if (logits.c != 1 || logits.h != truth.height() || logits.w != truth.width()) {
    throw Error(ErrorKind::ShapeMismatch, "saliency logits and truth mask are not aligned");
  }
  const auto y = truth.values();
  const T n = static_cast<T>(logits.size());
  T sum = T(0);
  for (size_t i = 0; i < logits.size(); ++i) {
    const T z = logits.data[i];
    const T yi = static_cast<T>(y[i]);
    sum += nn::softplus(z) - yi * z;
    if (grad) grad->data[i] += scale * (nn::sigmoid(z) - yi) / n;
  }
  return sum / n;
}

template float bce_with_logits_mean<float>(const nn::Tensor<float>&, const SaliencyMap&,
                                           nn::Tensor<float>*, float);
template double bce_with_logits_mean<double>(const nn::Tensor<double>&, const SaliencyMap&,
                                             nn::Tensor<double>*, double);

template <class T>
T SaliencyNet<T>::loss_and_backward(const nn::Tensor<T>& input, const SaliencyMap& truth) {
  const Trace t = forward(input);
  const int outputs = cfg_.num_outputs();
  std::vector<nn::Tensor<T>> grads;
  T total = T(0);
  for (int o = 0; o < outputs; ++o) {
    grads.emplace_back(1, t.logits[o].h, t.logits[o].w);
    total += bce_with_logits_mean<T>(t.logits[o], truth, &grads.back(), T(1) / T(outputs));
  }
  backward(t, grads);
  return total / T(outputs);
}

template <class T>
std::vector<nn::Param<T>*> SaliencyNet<T>::params() {
  std::vector<nn::Param<T>*> out{&stem_.weight(), &stem_.bias()};
  for (int l = 0; l < cfg_.depth; ++l) {
    if (l > 0) {
      out.push_back(&down_[l].weight());
      out.push_back(&down_[l].bias());
    }
    out.push_back(&res_a_[l].weight());
    out.push_back(&res_a_[l].bias());
    out.push_back(&res_b_[l].weight());
    out.push_back(&res_b_[l].bias());
    if (l < cfg_.depth - 1) {
      out.push_back(&dec_[l].weight());
      out.push_back(&dec_[l].bias());
    }
    out.push_back(&side_[l].weight());
    out.push_back(&side_[l].bias());
  }
  return out;
}

template class SaliencyNet<float>;
template class SaliencyNet<double>;

template <class T>
SaliencyMap logits_to_map(const nn::Tensor<T>& logits) {
  std::vector<float> values(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    const double z = std::clamp(static_cast<double>(logits.data[i]), -15.0, 15.0);
    values[i] = static_cast<float>(nn::sigmoid(z));
  }
  return SaliencyMap(logits.w, logits.h, std::move(values));
}

template SaliencyMap logits_to_map<float>(const nn::Tensor<float>&);
template SaliencyMap logits_to_map<double>(const nn::Tensor<double>&);

std::vector<SaliencyMap> saliency_outputs(const SaliencyNet<float>& net, const ImageBuffer& image) {
  check_input_size(image, net.config().input_size);
  const auto trace = net.forward(image_to_tensor<float>(image));
  std::vector<SaliencyMap> maps;
  for (const auto& z : trace.logits) maps.push_back(logits_to_map(z));
  return maps;
}

SaliencyMap saliency_forward(const SaliencyNet<float>& net, const ImageBuffer& image) {
  return saliency_outputs(net, image).front();
}

double saliency_loss(std::span<const SaliencyMap> preds, const SaliencyMap& truth_mask) {
  if (preds.empty()) throw Error(ErrorKind::ShapeMismatch, "no saliency outputs given");
  constexpr double kEps = 1e-12;
  double total = 0.0;
  for (const auto& p : preds) {
    if (p.width() != truth_mask.width() || p.height() != truth_mask.height()) {
      throw Error(ErrorKind::ShapeMismatch, "saliency prediction and truth mask are not aligned");
    }
    const auto pv = p.values();
    const auto yv = truth_mask.values();
    double sum = 0.0;
    for (size_t i = 0; i < pv.size(); ++i) {
      const double q = std::clamp(static_cast<double>(pv[i]), kEps, 1.0 - kEps);
      const double y = yv[i];
      sum -= y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
    }
    total += sum / static_cast<double>(pv.size());
  }
  return total / static_cast<double>(preds.size());
}

}  // namespace salgate
