#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "funet/ops.hpp"
#include "funet/rng.hpp"
#include "funet/wavelet.hpp"

namespace funet {

struct ModelConfig {
  int depth = 4;
  int base_channels = 16;
  bool use_wa = true;  // wavelet-attention downsampling (else max pooling)
  bool use_ds = true;  // depthwise separable convs (else standard)
  bool head_minutia = true;
  bool head_orientation = true;  // the enhancement head always exists
  int input_h = 64;
  int input_w = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (depth < 1) throw Error("ModelConfig: depth must be >= 1");
    if (base_channels < 1) throw Error("ModelConfig: base_channels must be >= 1");
    const int div = 1 << depth;
    if (input_h % div != 0)
      throw Error("ModelConfig: input height " + std::to_string(input_h) +
                  " not divisible by 2^depth = " + std::to_string(div));
    if (input_w % div != 0)
      throw Error("ModelConfig: input width " + std::to_string(input_w) +
                  " not divisible by 2^depth = " + std::to_string(div));
  }

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

template <class T>
struct TaskOutputsT {
  TensorPtr<T> enhanced;     // (n,1,H,W) in [0,1]
  TensorPtr<T> minutia_map;  // (n,1,H,W) in [0,1], null when head disabled
  TensorPtr<T> orientation;  // (n,2,H,W) in [-1,1], null when head disabled
};

using TaskOutputs = TaskOutputsT<Scalar>;

// conv (standard or depthwise separable, 3x3 same) -> batch norm -> relu
template <class T>
struct ConvBlockT {
  bool ds = false;
  TensorPtr<T> w, b;        // standard path: (c_out,c_in,3,3), (c_out)
  TensorPtr<T> dw, pw, pb;  // ds path: (c_in,1,3,3), (c_out,c_in,1,1), (c_out)
  BatchNormStateT<T> bn;

  void init(int c_in, int c_out, bool use_ds, Rng& rng) {
    ds = use_ds;
    const auto he_uniform = [&rng](const Shape& s, int fan_in) {
      auto t = zeros<T>(s, true);
      const double bound = std::sqrt(6.0 / double(fan_in));
      for (auto& v : t->data) v = T(rng.uniform(-bound, bound));
      return t;
    };
    if (ds) {
      dw = he_uniform(Shape{c_in, 1, 3, 3}, 9);
      pw = he_uniform(Shape{c_out, c_in, 1, 1}, c_in);
      pb = zeros<T>(Shape{c_out}, true);
    } else {
      w = he_uniform(Shape{c_out, c_in, 3, 3}, c_in * 9);
      b = zeros<T>(Shape{c_out}, true);
    }
    bn = BatchNormStateT<T>(c_out);
  }

  TensorPtr<T> forward(const TensorPtr<T>& x, Mode mode) {
    auto y = ds ? depthwise_separable_conv2d(x, dw, pw, pb) : conv2d(x, w, b, 1, 1);
    return relu(batch_norm2d(y, bn, mode));
  }

  void register_params(const std::string& prefix,
                       std::vector<std::pair<std::string, TensorPtr<T>>>& out) {
    if (ds) {
      out.emplace_back(prefix + ".dw", dw);
      out.emplace_back(prefix + ".pw", pw);
      out.emplace_back(prefix + ".pb", pb);
    } else {
      out.emplace_back(prefix + ".w", w);
      out.emplace_back(prefix + ".b", b);
    }
    out.emplace_back(prefix + ".gamma", bn.gamma);
    out.emplace_back(prefix + ".beta", bn.beta);
  }
};

// Shared encoder, two conv blocks per level, WA or max-pool downsampling,
// two-block bottleneck, and one decoder per enabled task head. Decoder
// levels upsample by zero-detail inverse DWT, concatenate the matching
// encoder skip, then run two conv blocks. Heads project to 1 channel
// (sigmoid) or 2 channels (tanh, doubled-angle sin/cos).
template <class T>
class FingerUNetT {
 public:
  explicit FingerUNetT(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    const auto ch = [&](int level) { return cfg_.base_channels << level; };

    enc_.resize(size_t(cfg_.depth) * 2);
    for (int l = 0; l < cfg_.depth; ++l) {
      const int cin = l == 0 ? 1 : ch(l - 1);
      enc_[size_t(2 * l)].init(cin, ch(l), cfg_.use_ds, rng);
      enc_[size_t(2 * l + 1)].init(ch(l), ch(l), cfg_.use_ds, rng);
    }
    const int cb = ch(cfg_.depth);
    bottleneck_[0].init(ch(cfg_.depth - 1), cb, cfg_.use_ds, rng);
    bottleneck_[1].init(cb, cb, cfg_.use_ds, rng);

    init_decoder(dec_enh_, head_enh_w_, head_enh_b_, 1, rng);
    if (cfg_.head_minutia) init_decoder(dec_min_, head_min_w_, head_min_b_, 1, rng);
    if (cfg_.head_orientation) init_decoder(dec_ori_, head_ori_w_, head_ori_b_, 2, rng);

    for (int l = 0; l < cfg_.depth; ++l) {
      enc_[size_t(2 * l)].register_params("enc" + std::to_string(l) + "a", params_);
      enc_[size_t(2 * l + 1)].register_params("enc" + std::to_string(l) + "b", params_);
    }
    bottleneck_[0].register_params("bot_a", params_);
    bottleneck_[1].register_params("bot_b", params_);
    register_decoder("dec_enh", dec_enh_, head_enh_w_, head_enh_b_);
    if (cfg_.head_minutia) register_decoder("dec_min", dec_min_, head_min_w_, head_min_b_);
    if (cfg_.head_orientation) register_decoder("dec_ori", dec_ori_, head_ori_w_, head_ori_b_);
  }

  const ModelConfig& config() const { return cfg_; }

  TaskOutputsT<T> forward(const TensorPtr<T>& x, Mode mode) {
    if (x->shape.rank() != 4 || x->shape.c() != 1)
      throw Error("forward: expected (n,1,h,w) input, got " + x->shape.str());
    if (x->shape.h() != cfg_.input_h || x->shape.w() != cfg_.input_w)
      throw Error("forward: input " + x->shape.str() + " does not match configured " +
                  std::to_string(cfg_.input_h) + "x" + std::to_string(cfg_.input_w));
    std::vector<TensorPtr<T>> skips;
    auto cur = x;
    for (int l = 0; l < cfg_.depth; ++l) {
      cur = enc_[size_t(2 * l)].forward(cur, mode);
      cur = enc_[size_t(2 * l + 1)].forward(cur, mode);
      skips.push_back(cur);
      cur = cfg_.use_wa ? wavelet_attention(cur) : max_pool2d(cur);
    }
    cur = bottleneck_[0].forward(cur, mode);
    cur = bottleneck_[1].forward(cur, mode);

    TaskOutputsT<T> out;
    out.enhanced = run_decoder(dec_enh_, head_enh_w_, head_enh_b_, Act::sigmoid, cur, skips, mode);
    if (cfg_.head_minutia)
      out.minutia_map = run_decoder(dec_min_, head_min_w_, head_min_b_, Act::sigmoid, cur, skips, mode);
    if (cfg_.head_orientation)
      out.orientation = run_decoder(dec_ori_, head_ori_w_, head_ori_b_, Act::tanh, cur, skips, mode);
    return out;
  }

  // Trainable tensors only; batch-norm running stats are buffers.
  const std::vector<std::pair<std::string, TensorPtr<T>>>& named_params() const { return params_; }

  std::int64_t param_count() const {
    std::int64_t total = 0;
    for (const auto& [name, p] : params_) total += p->numel();
    return total;
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p->zero_grad();
  }

  // Running batch-norm statistics, checkpointed alongside the parameters.
  std::vector<std::pair<std::string, std::vector<T>*>> named_buffers() {
    std::vector<std::pair<std::string, std::vector<T>*>> out;
    const auto add_block = [&out](const std::string& prefix, ConvBlockT<T>& blk) {
      out.emplace_back(prefix + ".running_mean", &blk.bn.running_mean);
      out.emplace_back(prefix + ".running_var", &blk.bn.running_var);
    };
    for (int l = 0; l < cfg_.depth; ++l) {
      add_block("enc" + std::to_string(l) + "a", enc_[size_t(2 * l)]);
      add_block("enc" + std::to_string(l) + "b", enc_[size_t(2 * l + 1)]);
    }
    add_block("bot_a", bottleneck_[0]);
    add_block("bot_b", bottleneck_[1]);
    const auto add_dec = [&](const std::string& prefix, std::vector<ConvBlockT<T>>& dec) {
      for (size_t i = 0; i < dec.size(); ++i)
        add_block(prefix + std::to_string(i / 2) + (i % 2 ? "b" : "a"), dec[i]);
    };
    add_dec("dec_enh", dec_enh_);
    if (cfg_.head_minutia) add_dec("dec_min", dec_min_);
    if (cfg_.head_orientation) add_dec("dec_ori", dec_ori_);
    return out;
  }

 private:
  void init_decoder(std::vector<ConvBlockT<T>>& dec, TensorPtr<T>& head_w, TensorPtr<T>& head_b,
                    int head_channels, Rng& rng) {
    const auto ch = [&](int level) { return cfg_.base_channels << level; };
    dec.resize(size_t(cfg_.depth) * 2);
    int cur = ch(cfg_.depth);
    for (int l = cfg_.depth - 1; l >= 0; --l) {
      const size_t i = size_t(cfg_.depth - 1 - l) * 2;
      dec[i].init(cur + ch(l), ch(l), cfg_.use_ds, rng);
      dec[i + 1].init(ch(l), ch(l), cfg_.use_ds, rng);
      cur = ch(l);
    }
    head_w = zeros<T>(Shape{head_channels, cur, 1, 1}, true);
    const double bound = std::sqrt(6.0 / double(cur));
    for (auto& v : head_w->data) v = T(rng.uniform(-bound, bound));
    head_b = zeros<T>(Shape{head_channels}, true);
  }

  void register_decoder(const std::string& prefix, std::vector<ConvBlockT<T>>& dec,
                        const TensorPtr<T>& head_w, const TensorPtr<T>& head_b) {
    for (size_t i = 0; i < dec.size(); ++i)
      dec[i].register_params(prefix + std::to_string(i / 2) + (i % 2 ? "b" : "a"), params_);
    params_.emplace_back(prefix + ".head_w", head_w);
    params_.emplace_back(prefix + ".head_b", head_b);
  }

  TensorPtr<T> run_decoder(std::vector<ConvBlockT<T>>& dec, const TensorPtr<T>& head_w,
                           const TensorPtr<T>& head_b, Act head_act, const TensorPtr<T>& bottom,
                           const std::vector<TensorPtr<T>>& skips, Mode mode) {
    auto cur = bottom;
    for (int l = cfg_.depth - 1; l >= 0; --l) {
      const size_t i = size_t(cfg_.depth - 1 - l) * 2;
      cur = idwt_upsample(cur);
      cur = concat_channels(cur, skips[size_t(l)]);
      cur = dec[i].forward(cur, mode);
      cur = dec[i + 1].forward(cur, mode);
    }
    return activation(head_act, conv2d(cur, head_w, head_b, 1, 0));
  }

  ModelConfig cfg_;
  std::vector<ConvBlockT<T>> enc_;
  ConvBlockT<T> bottleneck_[2];
  std::vector<ConvBlockT<T>> dec_enh_, dec_min_, dec_ori_;
  TensorPtr<T> head_enh_w_, head_enh_b_, head_min_w_, head_min_b_, head_ori_w_, head_ori_b_;
  std::vector<std::pair<std::string, TensorPtr<T>>> params_;
};

using FingerUNet = FingerUNetT<Scalar>;

}  // namespace funet
