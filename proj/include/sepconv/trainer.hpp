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

#ifndef SEPCONV_TRAINER_HPP_
#define SEPCONV_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <istream>
#include <span>
#include <stdexcept>
#include <vector>

#include "sepconv/dataset.hpp"
#include "sepconv/network.hpp"

namespace sepconv {

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 15;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  double split_fraction = 0.9;
  Activation activation = Activation::rectifier;

  void validate() const;
};

/// Flat "key = value" text; '#' starts a comment. Keys: learning_rate, epochs,
/// batch_size, seed, activation, split_fraction. Missing keys keep their defaults.
TrainConfig parse_train_config(std::istream& in, TrainConfig base = {});

struct LossResult {
  double loss = 0.0;  // mean softmax cross-entropy
  std::vector<std::size_t> predictions;
};

LossResult forward_loss(const Network& net, const Dataset& data, std::span<const std::size_t> batch);
LossResult forward_loss(const Network& net, const Dataset& data);

/// Same layer layout as the network, holding d(mean loss)/d(parameter).
struct Gradients {
  std::vector<Layer> layers;
};

Gradients zero_gradients(const Network& net);
Gradients backward(const Network& net, const Dataset& data, std::span<const std::size_t> batch);

/// Views of every trainable array in a layer list (frozen fusion matrices are left out).
/// Network and Gradients produce views in the same order.
std::vector<std::span<double>> trainable_parameters(std::vector<Layer>& layers);

/// parameters -= learning_rate * gradients
void sgd_step(Network& net, Gradients& grads, double learning_rate);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_err = 0.0;
  double test_err = 0.0;
};

struct TrainResult {
  Network network;
  std::vector<EpochMetrics> history;  // row 0 describes the initialization
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Plain minibatch SGD with a fixed learning rate; minibatch order is reshuffled every
/// epoch from cfg.seed. Throws TrainingDiverged on a non-finite loss.
TrainResult sgd_train(Network net, const Dataset& train, const Dataset* test, const TrainConfig& cfg,
                      const EpochCallback& on_epoch = {});

double evaluate_error_rate(const Network& net, const Dataset& data);

}  // namespace sepconv

#endif  // SEPCONV_TRAINER_HPP_
