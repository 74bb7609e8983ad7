#pragma once

#include <cmath>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "vrap/rng.hpp"
#include "vrap/tensor.hpp"
#include "vrap/types.hpp"

namespace vrap {

// A compact convolutional classifier for desk-scale experiments:
// conv3x3/s2 -> relu -> conv3x3/s2 -> relu -> fc -> relu -> fc -> logits.
// Double precision throughout; all inference paths are const and
// allocation-local, so concurrent read-only use is safe.
//
// Conv weights are stored as [kh][kw][in_c][out_c] so the innermost
// accumulation runs over contiguous output channels.
class SmallConvNet {
 public:
  struct Dims {
    int in_h = 32, in_w = 32, in_c = 3;
    int classes = 10;
    int conv1_c = 8, conv2_c = 16;
    int hidden = 32;
  };

  SmallConvNet() : SmallConvNet(Dims{}, 0) {}

  SmallConvNet(const Dims& dims, std::uint64_t init_seed) : d_(dims) {
    h1_ = conv_out(d_.in_h);
    w1_ = conv_out(d_.in_w);
    h2_ = conv_out(h1_);
    w2_ = conv_out(w1_);
    if (h2_ < 1 || w2_ < 1)
      throw DomainError("SmallConvNet: input too small for two stride-2 stages");
    flat_ = h2_ * w2_ * d_.conv2_c;

    conv1_w_.assign(static_cast<std::size_t>(9) * d_.in_c * d_.conv1_c, 0.0);
    conv1_b_.assign(d_.conv1_c, 0.0);
    conv2_w_.assign(static_cast<std::size_t>(9) * d_.conv1_c * d_.conv2_c, 0.0);
    conv2_b_.assign(d_.conv2_c, 0.0);
    fc1_w_.assign(static_cast<std::size_t>(flat_) * d_.hidden, 0.0);
    fc1_b_.assign(d_.hidden, 0.0);
    fc2_w_.assign(static_cast<std::size_t>(d_.hidden) * d_.classes, 0.0);
    fc2_b_.assign(d_.classes, 0.0);

    Rng rng(init_seed);
    he_init(conv1_w_, 9 * d_.in_c, rng);
    he_init(conv2_w_, 9 * d_.conv1_c, rng);
    he_init(fc1_w_, flat_, rng);
    he_init(fc2_w_, d_.hidden, rng);
  }

  const Dims& dims() const { return d_; }
  int conv2_h() const { return h2_; }
  int conv2_w() const { return w2_; }

  // Intermediate activations kept for the backward pass.
  struct Trace {
    std::vector<double> a1;      // post-relu conv1, h1*w1*c1
    std::vector<double> a2;      // post-relu conv2, h2*w2*c2 (flattened input of fc1)
    std::vector<double> a3;      // post-relu fc1 hidden
    std::vector<double> logits;  // classes
  };

  std::vector<double> forward(const Tensor& x, Trace* trace = nullptr) const {
    check_input(x);
    std::vector<double> a1(static_cast<std::size_t>(h1_) * w1_ * d_.conv1_c);
    conv_forward(x.data(), d_.in_h, d_.in_w, d_.in_c, conv1_w_.data(),
                 conv1_b_.data(), d_.conv1_c, a1.data(), h1_, w1_);
    relu(a1);
    std::vector<double> a2(static_cast<std::size_t>(h2_) * w2_ * d_.conv2_c);
    conv_forward(a1.data(), h1_, w1_, d_.conv1_c, conv2_w_.data(), conv2_b_.data(),
                 d_.conv2_c, a2.data(), h2_, w2_);
    relu(a2);
    std::vector<double> a3(d_.hidden);
    fc_forward(a2.data(), flat_, fc1_w_.data(), fc1_b_.data(), d_.hidden, a3.data());
    relu(a3);
    std::vector<double> logits(d_.classes);
    fc_forward(a3.data(), d_.hidden, fc2_w_.data(), fc2_b_.data(), d_.classes,
               logits.data());
    if (trace) {
      trace->a1 = std::move(a1);
      trace->a2 = std::move(a2);
      trace->a3 = std::move(a3);
      trace->logits = logits;
    }
    return logits;
  }

  // Mirrors the parameter layout; used by the trainer.
  struct Gradients {
    std::vector<double> conv1_w, conv1_b, conv2_w, conv2_b;
    std::vector<double> fc1_w, fc1_b, fc2_w, fc2_b;

    explicit Gradients(const SmallConvNet& net)
        : conv1_w(net.conv1_w_.size(), 0.0), conv1_b(net.conv1_b_.size(), 0.0),
          conv2_w(net.conv2_w_.size(), 0.0), conv2_b(net.conv2_b_.size(), 0.0),
          fc1_w(net.fc1_w_.size(), 0.0), fc1_b(net.fc1_b_.size(), 0.0),
          fc2_w(net.fc2_w_.size(), 0.0), fc2_b(net.fc2_b_.size(), 0.0) {}

    void scale(double s) {
      for (auto* v : {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc1_w, &fc1_b,
                      &fc2_w, &fc2_b})
        for (double& g : *v) g *= s;
    }
  };

  // Backpropagates d loss / d logits. Fills the input gradient when
  // `input_grad` is non-null and accumulates parameter gradients when
  // `param_grads` is non-null.
  void backward(const Tensor& x, const Trace& trace,
                const std::vector<double>& dlogits, Tensor* input_grad,
                Gradients* param_grads) const {
    std::vector<double> da3(d_.hidden, 0.0);
    fc_backward(trace.a3.data(), d_.hidden, fc2_w_.data(), d_.classes,
                dlogits.data(), da3.data(),
                param_grads ? param_grads->fc2_w.data() : nullptr,
                param_grads ? param_grads->fc2_b.data() : nullptr);
    relu_backward(trace.a3, da3);

    std::vector<double> da2(static_cast<std::size_t>(flat_), 0.0);
    fc_backward(trace.a2.data(), flat_, fc1_w_.data(), d_.hidden, da3.data(),
                da2.data(), param_grads ? param_grads->fc1_w.data() : nullptr,
                param_grads ? param_grads->fc1_b.data() : nullptr);
    relu_backward(trace.a2, da2);

    std::vector<double> da1(static_cast<std::size_t>(h1_) * w1_ * d_.conv1_c, 0.0);
    conv_backward(trace.a1.data(), h1_, w1_, d_.conv1_c, conv2_w_.data(),
                  d_.conv2_c, h2_, w2_, da2.data(), da1.data(),
                  param_grads ? param_grads->conv2_w.data() : nullptr,
                  param_grads ? param_grads->conv2_b.data() : nullptr);
    relu_backward(trace.a1, da1);

    if (input_grad) {
      *input_grad = Tensor(d_.in_h, d_.in_w, d_.in_c);
      conv_backward(x.data(), d_.in_h, d_.in_w, d_.in_c, conv1_w_.data(),
                    d_.conv1_c, h1_, w1_, da1.data(), input_grad->data(),
                    param_grads ? param_grads->conv1_w.data() : nullptr,
                    param_grads ? param_grads->conv1_b.data() : nullptr);
    } else if (param_grads) {
      conv_backward(x.data(), d_.in_h, d_.in_w, d_.in_c, conv1_w_.data(),
                    d_.conv1_c, h1_, w1_, da1.data(), nullptr,
                    param_grads->conv1_w.data(), param_grads->conv1_b.data());
    }
  }

  // Gradient of the target-class logit with respect to the post-relu conv2
  // activations, for class activation mapping.
  void conv2_score_gradient(const Trace& trace, int target_class,
                            std::vector<double>* dconv2) const {
    std::vector<double> dlogits(d_.classes, 0.0);
    dlogits[target_class] = 1.0;
    std::vector<double> da3(d_.hidden, 0.0);
    fc_backward(trace.a3.data(), d_.hidden, fc2_w_.data(), d_.classes,
                dlogits.data(), da3.data(), nullptr, nullptr);
    relu_backward(trace.a3, da3);
    dconv2->assign(static_cast<std::size_t>(flat_), 0.0);
    fc_backward(trace.a2.data(), flat_, fc1_w_.data(), d_.hidden, da3.data(),
                dconv2->data(), nullptr, nullptr);
  }

  void sgd_step(const Gradients& g, std::vector<double>& momentum, double lr,
                double mu, double weight_decay) {
    std::vector<double>* params[] = {&conv1_w_, &conv1_b_, &conv2_w_, &conv2_b_,
                                     &fc1_w_, &fc1_b_, &fc2_w_, &fc2_b_};
    const std::vector<double>* grads[] = {&g.conv1_w, &g.conv1_b, &g.conv2_w,
                                          &g.conv2_b, &g.fc1_w, &g.fc1_b,
                                          &g.fc2_w, &g.fc2_b};
    if (momentum.empty()) momentum.assign(parameter_count(), 0.0);
    std::size_t offset = 0;
    for (int layer = 0; layer < 8; ++layer) {
      auto& p = *params[layer];
      const auto& gr = *grads[layer];
      const bool decay = layer % 2 == 0;  // weights only, not biases
      for (std::size_t idx = 0; idx < p.size(); ++idx) {
        double g_val = gr[idx] + (decay ? weight_decay * p[idx] : 0.0);
        double& m = momentum[offset + idx];
        m = mu * m + g_val;
        p[idx] -= lr * m;
      }
      offset += p.size();
    }
  }

  std::size_t parameter_count() const {
    return conv1_w_.size() + conv1_b_.size() + conv2_w_.size() + conv2_b_.size() +
           fc1_w_.size() + fc1_b_.size() + fc2_w_.size() + fc2_b_.size();
  }

  // Flat parameter access in a fixed layer order, for serialization.
  std::vector<std::pair<std::string, std::vector<double>*>> parameter_table() {
    return {{"conv1_w", &conv1_w_}, {"conv1_b", &conv1_b_},
            {"conv2_w", &conv2_w_}, {"conv2_b", &conv2_b_},
            {"fc1_w", &fc1_w_},     {"fc1_b", &fc1_b_},
            {"fc2_w", &fc2_w_},     {"fc2_b", &fc2_b_}};
  }
  std::vector<std::pair<std::string, const std::vector<double>*>> parameter_table()
      const {
    return {{"conv1_w", &conv1_w_}, {"conv1_b", &conv1_b_},
            {"conv2_w", &conv2_w_}, {"conv2_b", &conv2_b_},
            {"fc1_w", &fc1_w_},     {"fc1_b", &fc1_b_},
            {"fc2_w", &fc2_w_},     {"fc2_b", &fc2_b_}};
  }

 private:
  static int conv_out(int in) { return (in + 2 * 1 - 3) / 2 + 1; }

  void check_input(const Tensor& x) const {
    if (x.height() != d_.in_h || x.width() != d_.in_w || x.channels() != d_.in_c)
      throw ShapeMismatchError("SmallConvNet: input shape mismatch");
  }

  static void relu(std::vector<double>& v) {
    for (double& x : v)
      if (x < 0.0) x = 0.0;
  }
  // Gates the gradient by the saved post-relu activation (> 0 iff pre > 0).
  static void relu_backward(const std::vector<double>& post, std::vector<double>& g) {
    for (std::size_t idx = 0; idx < g.size(); ++idx)
      if (post[idx] <= 0.0) g[idx] = 0.0;
  }

  // 3x3, stride 2, pad 1 convolution. Weight layout [kh][kw][ci][co].
  static void conv_forward(const double* in, int ih, int iw, int ic,
                           const double* w, const double* b, int oc, double* out,
                           int oh, int ow) {
    for (int oi = 0; oi < oh; ++oi)
      for (int oj = 0; oj < ow; ++oj) {
        double* out_px = out + (static_cast<std::size_t>(oi) * ow + oj) * oc;
        std::memcpy(out_px, b, sizeof(double) * oc);
        const int base_i = oi * 2 - 1;
        const int base_j = oj * 2 - 1;
        for (int kh = 0; kh < 3; ++kh) {
          const int ii = base_i + kh;
          if (ii < 0 || ii >= ih) continue;
          for (int kw = 0; kw < 3; ++kw) {
            const int jj = base_j + kw;
            if (jj < 0 || jj >= iw) continue;
            const double* in_px = in + (static_cast<std::size_t>(ii) * iw + jj) * ic;
            const double* w_cell =
                w + (static_cast<std::size_t>(kh) * 3 + kw) * ic * oc;
            for (int ci = 0; ci < ic; ++ci) {
              const double v = in_px[ci];
              const double* w_row = w_cell + static_cast<std::size_t>(ci) * oc;
              for (int co = 0; co < oc; ++co) out_px[co] += v * w_row[co];
            }
          }
        }
      }
  }

  // Backward pass of the same convolution. Any of the three output buffers
  // may be null.
  static void conv_backward(const double* in, int ih, int iw, int ic,
                            const double* w, int oc, int oh, int ow,
                            const double* d_out, double* d_in, double* d_w,
                            double* d_b) {
    for (int oi = 0; oi < oh; ++oi)
      for (int oj = 0; oj < ow; ++oj) {
        const double* g_px = d_out + (static_cast<std::size_t>(oi) * ow + oj) * oc;
        if (d_b)
          for (int co = 0; co < oc; ++co) d_b[co] += g_px[co];
        const int base_i = oi * 2 - 1;
        const int base_j = oj * 2 - 1;
        for (int kh = 0; kh < 3; ++kh) {
          const int ii = base_i + kh;
          if (ii < 0 || ii >= ih) continue;
          for (int kw = 0; kw < 3; ++kw) {
            const int jj = base_j + kw;
            if (jj < 0 || jj >= iw) continue;
            const std::size_t in_off = (static_cast<std::size_t>(ii) * iw + jj) * ic;
            const std::size_t w_off =
                (static_cast<std::size_t>(kh) * 3 + kw) * ic * oc;
            for (int ci = 0; ci < ic; ++ci) {
              const double* w_row = w + w_off + static_cast<std::size_t>(ci) * oc;
              if (d_in) {
                double acc = 0.0;
                for (int co = 0; co < oc; ++co) acc += g_px[co] * w_row[co];
                d_in[in_off + ci] += acc;
              }
              if (d_w) {
                const double v = in[in_off + ci];
                double* gw_row = d_w + w_off + static_cast<std::size_t>(ci) * oc;
                for (int co = 0; co < oc; ++co) gw_row[co] += v * g_px[co];
              }
            }
          }
        }
      }
  }

  // Dense layer; weight layout [in][out].
  static void fc_forward(const double* in, int in_dim, const double* w,
                         const double* b, int out_dim, double* out) {
    std::memcpy(out, b, sizeof(double) * out_dim);
    for (int i = 0; i < in_dim; ++i) {
      const double v = in[i];
      const double* w_row = w + static_cast<std::size_t>(i) * out_dim;
      for (int o = 0; o < out_dim; ++o) out[o] += v * w_row[o];
    }
  }

  static void fc_backward(const double* in, int in_dim, const double* w,
                          int out_dim, const double* d_out, double* d_in,
                          double* d_w, double* d_b) {
    if (d_b)
      for (int o = 0; o < out_dim; ++o) d_b[o] += d_out[o];
    for (int i = 0; i < in_dim; ++i) {
      const double* w_row = w + static_cast<std::size_t>(i) * out_dim;
      double acc = 0.0;
      for (int o = 0; o < out_dim; ++o) acc += d_out[o] * w_row[o];
      if (d_in) d_in[i] += acc;
      if (d_w) {
        const double v = in[i];
        double* gw_row = d_w + static_cast<std::size_t>(i) * out_dim;
        for (int o = 0; o < out_dim; ++o) gw_row[o] += v * d_out[o];
      }
    }
  }

  static void he_init(std::vector<double>& w, int fan_in, Rng& rng) {
    const double stddev = std::sqrt(2.0 / fan_in);
    for (double& v : w) v = rng.normal(0.0, stddev);
  }

  Dims d_;
  int h1_ = 0, w1_ = 0, h2_ = 0, w2_ = 0, flat_ = 0;
  std::vector<double> conv1_w_, conv1_b_, conv2_w_, conv2_b_;
  std::vector<double> fc1_w_, fc1_b_, fc2_w_, fc2_b_;
};

// Numerically stable softmax cross-entropy on logits.
inline double cross_entropy(const std::vector<double>& logits, int label,
                            std::vector<double>* dlogits = nullptr) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - peak);
  const double log_z = peak + std::log(sum);
  if (dlogits) {
    dlogits->resize(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c)
      (*dlogits)[c] = std::exp(logits[c] - log_z);
    (*dlogits)[label] -= 1.0;
  }
  return log_z - logits[label];
}

}  // namespace vrap
