/* Copyright 2026 The SepConv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "sepconv/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sepconv/random.hpp"

namespace sepconv {

using detail::Overloaded;

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be a finite non-negative number");
  }
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw std::invalid_argument("split_fraction must lie in (0, 1)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig parse_train_config(std::istream& in, TrainConfig cfg) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "learning_rate") {
        cfg.learning_rate = std::stod(value);
      } else if (key == "epochs") {
        cfg.epochs = std::stoull(value);
      } else if (key == "batch_size") {
        cfg.batch_size = std::stoull(value);
      } else if (key == "seed") {
        cfg.seed = std::stoull(value);
      } else if (key == "split_fraction") {
        cfg.split_fraction = std::stod(value);
      } else if (key == "activation") {
        cfg.activation = parse_activation(value);
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::out_of_range&) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": value out of range");
    }
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Forward with caches

namespace {

struct LayerCache {
  Tensor3 input;
  Tensor3 pre;  // pre-activation output of conv layers
  SeparatedStages<double> stages;
  Tensor3 output;
};

struct SampleTrace {
  std::vector<LayerCache> layers;
  double loss = 0.0;
  std::size_t prediction = 0;
};

double log_sum_exp(std::span<const double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - top);
  return top + std::log(s);
}

SampleTrace forward_trace(const Network& net, const Tensor3& image, std::uint32_t label) {
  if (image.shape() != net.input) {
    throw DimensionError("image shape " + to_string(image.shape()) + " does not match network input " +
                         to_string(net.input));
  }
  SampleTrace tr;
  tr.layers.resize(net.layers.size());
  Tensor3 x = image;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& c = tr.layers[i];
    c.input = x;
    std::visit(Overloaded{
                   [&](const ClassicConvLayer& l) {
                     c.pre = conv2d_matrix(x, l, true);
                     c.output = apply_activation(c.pre, l.activation);
                   },
                   [&](const SeparatedConvParams& p) {
                     c.stages = sep_forward_stages(x, p);
                     c.pre = c.stages.fused;
                     c.output = apply_activation(c.pre, p.activation);
                   },
                   [&](const DenseLayer& l) { c.output = layer_forward(l, x); },
                   [&](const SoftmaxLayer&) {
                     const auto z = x.data();
                     if (label >= z.size()) throw DimensionError("label outside the network's classes");
                     tr.loss = log_sum_exp(z) - z[label];
                     tr.prediction = argmax(z);
                     c.output = Tensor3(x.shape(), softmax(z));
                   },
               },
               net.layers[i]);
    x = c.output;
  }
  return tr;
}

Tensor3 activation_backward(const Tensor3& pre, const Tensor3& dy, Activation kind) {
  Tensor3 dz(pre.shape());
  const auto p = pre.data();
  const auto g = dy.data();
  auto out = dz.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = g[i] * activation_derivative(p[i], kind);
  return dz;
}

void add_into(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor3 classic_backward(const ClassicConvLayer& l, const LayerCache& c, const Tensor3& dy, ClassicConvLayer& g,
                         bool need_dx) {
  const auto& f = l.filters;
  const Matrix2 dz = to_matrix(activation_backward(c.pre, dy, l.activation));  // P x L
  const Matrix2 cols = im2col_lower(c.input, f.kh, f.kw);                       // P x KKC
  add_into(g.filters.weights, matmul(transpose(dz), cols).data());
  for (std::size_t p = 0; p < dz.rows(); ++p) add_into(g.bias, dz.row(p));
  if (!need_dx) return {};
  return col2im_accumulate(matmul(dz, filter_matrix(f)), c.input.shape(), f.kh, f.kw);
}

Tensor3 separated_backward(const SeparatedConvParams& p, const LayerCache& c, const Tensor3& dy,
                           SeparatedConvParams& g, bool need_dx) {
  const std::size_t L = p.count;
  const std::size_t K = p.k;
  const Shape3 out_shape = c.pre.shape();
  const Shape3 v_shape = c.stages.vertical.shape();

  // Fusion: fused = S2 * A^T + b.
  const Matrix2 dz = to_matrix(activation_backward(c.pre, dy, p.activation));  // P x L
  const Matrix2 s2 = to_matrix(Tensor3(c.stages.horizontal));
  add_into(g.fusion, matmul(transpose(dz), s2).data());
  for (std::size_t r = 0; r < dz.rows(); ++r) add_into(g.bias, dz.row(r));
  const Tensor3 ds2 = to_tensor(matmul(dz, Matrix2(L, L, p.fusion)), out_shape);

  // Horizontal taps: S2(y, x, g) = sum_t h(g, t) * S1(y, x + t, g).
  Tensor3 ds1(v_shape);
  const auto& s1 = c.stages.vertical;
  for (std::size_t y = 0; y < out_shape.height; ++y) {
    for (std::size_t x = 0; x < out_shape.width; ++x) {
      for (std::size_t t = 0; t < K; ++t) {
        for (std::size_t grp = 0; grp < L; ++grp) {
          const double d = ds2(y, x, grp);
          g.h(grp, t) += d * s1(y, x + t, grp);
          ds1(y, x + t, grp) += d * p.h(grp, t);
        }
      }
    }
  }

  // Vertical: S1 = im2col(I, K, 1) * V^T.
  const Matrix2 ds1_mat = to_matrix(std::move(ds1));
  const Matrix2 cols = im2col_lower(c.input, K, 1);
  add_into(g.vertical, matmul(transpose(ds1_mat), cols).data());
  if (!need_dx) return {};
  const Matrix2 v_mat(L, K * p.in_channels, p.vertical);
  return col2im_accumulate(matmul(ds1_mat, v_mat), c.input.shape(), K, 1);
}

Tensor3 dense_backward(const DenseLayer& l, const LayerCache& c, const Tensor3& dy, DenseLayer& g) {
  const auto x = c.input.data();
  const auto d = dy.data();
  Tensor3 dx(c.input.shape());
  auto dxs = dx.data();
  for (std::size_t o = 0; o < l.outputs; ++o) {
    g.bias[o] += d[o];
    double* gw = g.weights.data() + o * l.inputs;
    const double* w = l.weights.data() + o * l.inputs;
    for (std::size_t i = 0; i < l.inputs; ++i) {
      gw[i] += d[o] * x[i];
      dxs[i] += d[o] * w[i];
    }
  }
  return dx;
}

// Adds one sample's gradient into grads.
void backward_sample(const Network& net, const SampleTrace& tr, std::uint32_t label, Gradients& grads) {
  Tensor3 dy;
  for (std::size_t idx = net.layers.size(); idx-- > 0;) {
    const auto& c = tr.layers[idx];
    const bool need_dx = idx > 0;
    std::visit(Overloaded{
                   [&](const SoftmaxLayer&) {
                     // d(-log p_label)/dz = p - onehot
                     dy = c.output;
                     dy.data()[label] -= 1.0;
                   },
                   [&](const DenseLayer& l) {
                     dy = dense_backward(l, c, dy, std::get<DenseLayer>(grads.layers[idx]));
                   },
                   [&](const ClassicConvLayer& l) {
                     dy = classic_backward(l, c, dy, std::get<ClassicConvLayer>(grads.layers[idx]), need_dx);
                   },
                   [&](const SeparatedConvParams& p) {
                     dy = separated_backward(p, c, dy, std::get<SeparatedConvParams>(grads.layers[idx]), need_dx);
                   },
               },
               net.layers[idx]);
  }
}

template <typename Fn>
void for_each_array(std::vector<Layer>& layers, bool include_frozen, Fn&& fn) {
  for (auto& layer : layers) {
    std::visit(Overloaded{
                   [&](ClassicConvLayer& l) {
                     fn(std::span<double>(l.filters.weights));
                     fn(std::span<double>(l.bias));
                   },
                   [&](SeparatedConvParams& p) {
                     fn(std::span<double>(p.vertical));
                     fn(std::span<double>(p.horizontal));
                     if (include_frozen || !p.fusion_frozen) fn(std::span<double>(p.fusion));
                     fn(std::span<double>(p.bias));
                   },
                   [&](DenseLayer& l) {
                     fn(std::span<double>(l.weights));
                     fn(std::span<double>(l.bias));
                   },
                   [&](SoftmaxLayer&) {},
               },
               layer);
  }
}

// Sums per-sample losses and gradients over the batch; returns the loss sum.
double accumulate_batch(const Network& net, const Dataset& data, std::span<const std::size_t> batch, Gradients& grads,
                        std::vector<std::size_t>* predictions) {
  double loss_sum = 0.0;
  for (auto i : batch) {
    const auto tr = forward_trace(net, data.images.at(i), data.labels.at(i));
    loss_sum += tr.loss;
    if (predictions) predictions->push_back(tr.prediction);
    backward_sample(net, tr, data.labels[i], grads);
  }
  return loss_sum;
}

void scale_gradients(Gradients& g, double factor) {
  for_each_array(g.layers, true, [&](std::span<double> a) {
    for (double& v : a) v *= factor;
  });
}

}  // namespace

LossResult forward_loss(const Network& net, const Dataset& data, std::span<const std::size_t> batch) {
  LossResult r;
  r.predictions.reserve(batch.size());
  double sum = 0.0;
  for (auto i : batch) {
    const auto tr = forward_trace(net, data.images.at(i), data.labels.at(i));
    sum += tr.loss;
    r.predictions.push_back(tr.prediction);
  }
  r.loss = batch.empty() ? 0.0 : sum / static_cast<double>(batch.size());
  return r;
}

LossResult forward_loss(const Network& net, const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return forward_loss(net, data, all);
}

Gradients zero_gradients(const Network& net) {
  Gradients g{net.layers};
  for_each_array(g.layers, true, [](std::span<double> a) { std::fill(a.begin(), a.end(), 0.0); });
  return g;
}

Gradients backward(const Network& net, const Dataset& data, std::span<const std::size_t> batch) {
  net.validate();
  Gradients g = zero_gradients(net);
  accumulate_batch(net, data, batch, g, nullptr);
  if (!batch.empty()) scale_gradients(g, 1.0 / static_cast<double>(batch.size()));
  return g;
}

std::vector<std::span<double>> trainable_parameters(std::vector<Layer>& layers) {
  std::vector<std::span<double>> out;
  for_each_array(layers, false, [&](std::span<double> a) { out.push_back(a); });
  return out;
}

void sgd_step(Network& net, Gradients& grads, double learning_rate) {
  auto params = trainable_parameters(net.layers);
  auto gs = trainable_parameters(grads.layers);
  if (params.size() != gs.size()) throw DimensionError("gradient layout does not match the network");
  for (std::size_t a = 0; a < params.size(); ++a) {
    if (params[a].size() != gs[a].size()) throw DimensionError("gradient layout does not match the network");
    for (std::size_t i = 0; i < params[a].size(); ++i) params[a][i] -= learning_rate * gs[a][i];
  }
}

double evaluate_error_rate(const Network& net, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predict(net, data.images[i]) != data.labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

TrainResult sgd_train(Network net, const Dataset& train, const Dataset* test, const TrainConfig& cfg,
                      const EpochCallback& on_epoch) {
  cfg.validate();
  net.validate();
  train.validate();
  if (train.empty()) throw DatasetError("training set is empty");
  if (train.class_count > net.class_count()) throw DimensionError("dataset has more classes than the network outputs");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  TrainResult result;
  auto record = [&](EpochMetrics m) {
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  };
  {
    const auto initial = forward_loss(net, train);
    record({0, initial.loss, evaluate_error_rate(net, train), test ? evaluate_error_rate(net, *test) : nan});
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Gradients grads = zero_gradients(net);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      for_each_array(grads.layers, true, [](std::span<double> a) { std::fill(a.begin(), a.end(), 0.0); });
      const double batch_loss = accumulate_batch(net, train, batch, grads, nullptr);
      if (!std::isfinite(batch_loss)) {
        throw TrainingDiverged("non-finite loss in epoch " + std::to_string(epoch) + " at sample " +
                               std::to_string(start) + "; try a smaller learning_rate");
      }
      loss_sum += batch_loss;
      scale_gradients(grads, 1.0 / static_cast<double>(batch.size()));
      sgd_step(net, grads, cfg.learning_rate);
    }
    record({epoch, loss_sum / static_cast<double>(train.size()), evaluate_error_rate(net, train),
            test ? evaluate_error_rate(net, *test) : nan});
  }
  result.network = std::move(net);
  return result;
}

}  // namespace sepconv
