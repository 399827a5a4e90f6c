#include "gxplain/nn.hpp"

#include <cmath>

namespace gxplain::nn {

Mlp::Mlp(const std::vector<int>& dims, Rng& rng) {
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Mat w(dims[l + 1], dims[l]);
    const double scale = std::sqrt(2.0 / double(dims[l]));
    for (long i = 0; i < w.rows(); ++i) {
      for (long j = 0; j < w.cols(); ++j) w(i, j) = scale * rng.normal();
    }
    W.push_back(std::move(w));
    b.push_back(Vec::Zero(dims[l + 1]));
  }
}

Vec Mlp::forward(const Vec& x) const {
  Vec h = x;
  for (std::size_t l = 0; l < W.size(); ++l) {
    h = W[l] * h + b[l];
    if (l + 1 < W.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

Vec Mlp::forward_dropout(const Vec& x, double p, Rng& rng) const {
  Cache c;
  return forward_cache(x, p, &rng, c);
}

Vec Mlp::forward_cache(const Vec& x, double dropout_p, Rng* rng, Cache& cache) const {
  cache.input.clear();
  cache.pre.clear();
  cache.mask.clear();
  Vec h = x;
  for (std::size_t l = 0; l < W.size(); ++l) {
    cache.input.push_back(h);
    Vec z = W[l] * h + b[l];
    cache.pre.push_back(z);
    if (l + 1 < W.size()) {
      h = z.cwiseMax(0.0);
      if (dropout_p > 0.0 && rng) {
        Vec mask(h.size());
        const double keep = 1.0 - dropout_p;
        for (long i = 0; i < h.size(); ++i) {
          mask(i) = rng->bernoulli(dropout_p) ? 0.0 : 1.0 / keep;
        }
        h = h.cwiseProduct(mask);
        cache.mask.push_back(std::move(mask));
      } else {
        cache.mask.push_back(Vec());
      }
    } else {
      h = z;
    }
  }
  return h;
}

void Mlp::Grads::init_like(const Mlp& m) {
  dW.clear();
  db.clear();
  for (std::size_t l = 0; l < m.W.size(); ++l) {
    dW.push_back(Mat::Zero(m.W[l].rows(), m.W[l].cols()));
    db.push_back(Vec::Zero(m.b[l].size()));
  }
}

void Mlp::Grads::zero() {
  for (auto& m : dW) m.setZero();
  for (auto& v : db) v.setZero();
}

Vec Mlp::backward(const Cache& cache, const Vec& grad_out, Grads& grads) const {
  Vec g = grad_out;
  for (int l = int(W.size()) - 1; l >= 0; --l) {
    if (l + 1 < int(W.size())) {
      // Through dropout then ReLU.
      if (cache.mask[l].size()) g = g.cwiseProduct(cache.mask[l]);
      for (long i = 0; i < g.size(); ++i) {
        if (cache.pre[l](i) <= 0.0) g(i) = 0.0;
      }
    }
    grads.dW[l] += g * cache.input[l].transpose();
    grads.db[l] += g;
    g = W[l].transpose() * g;
  }
  return g;
}

void Adam::init_like(const Mlp& m) {
  t = 0;
  mW.clear();
  vW.clear();
  mb.clear();
  vb.clear();
  for (std::size_t l = 0; l < m.W.size(); ++l) {
    mW.push_back(Mat::Zero(m.W[l].rows(), m.W[l].cols()));
    vW.push_back(Mat::Zero(m.W[l].rows(), m.W[l].cols()));
    mb.push_back(Vec::Zero(m.b[l].size()));
    vb.push_back(Vec::Zero(m.b[l].size()));
  }
}

void Adam::step(Mlp& m, const Mlp::Grads& g) {
  ++t;
  const double c1 = 1.0 - std::pow(beta1, double(t));
  const double c2 = 1.0 - std::pow(beta2, double(t));
  for (std::size_t l = 0; l < m.W.size(); ++l) {
    mW[l] = beta1 * mW[l] + (1.0 - beta1) * g.dW[l];
    vW[l] = beta2 * vW[l] + (1.0 - beta2) * g.dW[l].cwiseProduct(g.dW[l]);
    m.W[l] -= (lr / c1) * mW[l].cwiseQuotient(((vW[l] / c2).cwiseSqrt().array() + eps).matrix());
    mb[l] = beta1 * mb[l] + (1.0 - beta1) * g.db[l];
    vb[l] = beta2 * vb[l] + (1.0 - beta2) * g.db[l].cwiseProduct(g.db[l]);
    m.b[l] -= (lr / c1) * mb[l].cwiseQuotient(((vb[l] / c2).cwiseSqrt().array() + eps).matrix());
  }
}

Vec softmax(const Vec& logits) {
  const double m = logits.maxCoeff();
  Vec e = (logits.array() - m).exp();
  return e / e.sum();
}

double softmax_xent(const Vec& logits, int label, Vec* grad_logits) {
  const Vec p = softmax(logits);
  const double loss = -std::log(std::max(p(label), 1e-300));
  if (grad_logits) {
    *grad_logits = p;
    (*grad_logits)(label) -= 1.0;
  }
  return loss;
}

}  // namespace gxplain::nn
