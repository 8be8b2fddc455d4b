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

#ifndef SEPCONV_TOOLS_CLI_HPP_
#define SEPCONV_TOOLS_CLI_HPP_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "sepconv/cost_model.hpp"
#include "sepconv/dataset.hpp"
#include "sepconv/network.hpp"
#include "sepconv/trainer.hpp"

namespace sepconv::cli {

/// Exit codes: 0 success, 1 runtime failure (I/O, divergence), 2 usage or shape error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct DataSource {
  std::string path = "synthetic";  // "synthetic", an IDX image file or a CSV file
  std::string labels;              // IDX label file
  std::string format = "auto";     // auto | idx | csv | synthetic
  std::string shape;               // HxWxC, required for CSV
  std::string resize;              // optional HxW
  std::size_t synthetic_count = 5000;
  std::uint64_t data_seed = 1;
};

Dataset load_data(const DataSource& source);

/// "14x20x1" or "14x20" (channels default to 1).
Shape3 parse_shape(const std::string& text);

struct TrainSplit {
  Dataset train;
  Dataset test;
};
/// The split every command applies: fraction and seed come from the config.
TrainSplit split_for(const Dataset& data, const TrainConfig& cfg);

Topology topology_for(const Dataset& data, const TrainConfig& cfg, std::size_t filters, std::size_t kernel);

/// make_network + sgd_train with the seed streams every command shares.
TrainResult train_structure(Structure structure, const TrainSplit& split, const TrainConfig& cfg,
                            const Topology& topology, const EpochCallback& on_epoch = {});

struct StructureRun {
  Structure structure;
  TrainResult result;
  double train_err = 0;
  double test_err = 0;
  std::uint64_t weights = 0;
  std::uint64_t multiplications = 0;  // conv layer, exact mode
};

/// Trains all three structures on one split, classic first.
std::vector<StructureRun> compare_structures(const TrainSplit& split, const TrainConfig& cfg,
                                             const Topology& topology, std::ostream* progress = nullptr);

void print_comparison(std::ostream& os, const std::vector<StructureRun>& runs, const std::string& dataset_name);

}  // namespace sepconv::cli

#endif  // SEPCONV_TOOLS_CLI_HPP_
