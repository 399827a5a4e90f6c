#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gxplain/rng.hpp"

namespace gxplain::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Fully connected net with ReLU between layers and a linear last layer.
// Dropout, when enabled, applies to hidden activations (inverted scaling),
// so the expected forward pass matches the mask-free one.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<int>& dims, Rng& rng);

  int in_dim() const { return W.empty() ? 0 : int(W.front().cols()); }
  int out_dim() const { return W.empty() ? 0 : int(W.back().rows()); }
  int n_layers() const { return int(W.size()); }

  Vec forward(const Vec& x) const;
  // Dropout masks drawn from rng; pass p = 0 for a deterministic pass.
  Vec forward_dropout(const Vec& x, double p, Rng& rng) const;

  struct Cache {
    std::vector<Vec> input;  // per layer
    std::vector<Vec> pre;    // pre-activation per layer
    std::vector<Vec> mask;   // dropout mask per hidden layer (may be empty)
  };
  Vec forward_cache(const Vec& x, double dropout_p, Rng* rng, Cache& cache) const;

  struct Grads {
    std::vector<Mat> dW;
    std::vector<Vec> db;
    void init_like(const Mlp& m);
    void zero();
  };
  // Backpropagates grad_out (d loss / d output) through the cached pass,
  // accumulating into grads; returns d loss / d input.
  Vec backward(const Cache& cache, const Vec& grad_out, Grads& grads) const;

  std::vector<Mat> W;
  std::vector<Vec> b;
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<Mat> mW, vW;
  std::vector<Vec> mb, vb;
  void init_like(const Mlp& m);
  void step(Mlp& m, const Mlp::Grads& g);
};

// Numerically stable softmax.
Vec softmax(const Vec& logits);

// Cross-entropy of softmax(logits) against a class index, with gradient on
// the logits.
double softmax_xent(const Vec& logits, int label, Vec* grad_logits);

}  // namespace gxplain::nn
