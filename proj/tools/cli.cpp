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

#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include "sepconv/bench.hpp"
#include "sepconv/model_io.hpp"
#include "sepconv/quantizer.hpp"
#include "sepconv/random.hpp"

namespace sepconv::cli {

namespace {

// Seed streams derived from the config seed.
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kInitStream = 2;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::vector<std::size_t> parse_dims(const std::string& text) {
  std::vector<std::size_t> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos) {
      throw UsageError("bad dimension list '" + text + "' (expected e.g. 14x20x1)");
    }
    dims.push_back(std::stoull(part));
  }
  return dims;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void add_data_options(CLI::App* cmd, DataSource& src) {
  cmd->add_option("--data", src.path, "Dataset: 'synthetic', an IDX image file or a CSV file")
      ->capture_default_str();
  cmd->add_option("--labels", src.labels, "IDX label file (IDX datasets)");
  cmd->add_option("--format", src.format, "auto | idx | csv | synthetic")
      ->check(CLI::IsMember({"auto", "idx", "csv", "synthetic"}))
      ->capture_default_str();
  cmd->add_option("--shape", src.shape, "Image shape HxWxC (CSV datasets)");
  cmd->add_option("--resize", src.resize, "Resample images to HxW");
  cmd->add_option("--synthetic-count", src.synthetic_count, "Number of synthetic samples")->capture_default_str();
  cmd->add_option("--data-seed", src.data_seed, "Seed of the synthetic generator")->capture_default_str();
}

struct ConfigFlags {
  std::string config;
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch;
  std::optional<std::uint64_t> seed;
  std::optional<double> split;
  std::optional<std::string> activation;
};

void add_config_options(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config, "Key-value config file; flags override it");
  cmd->add_option("--lr", f.lr, "learning_rate");
  cmd->add_option("--epochs", f.epochs, "epochs");
  cmd->add_option("--batch", f.batch, "batch_size");
  cmd->add_option("--seed", f.seed, "seed (data split, initialization, minibatch order)");
  cmd->add_option("--split", f.split, "split_fraction used for training");
  cmd->add_option("--activation", f.activation, "identity | rectifier | tanh");
}

TrainConfig resolve_config(const ConfigFlags& f) {
  TrainConfig cfg;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw std::runtime_error("cannot open config file " + f.config);
    cfg = parse_train_config(in, cfg);
  }
  if (f.lr) cfg.learning_rate = *f.lr;
  if (f.epochs) cfg.epochs = *f.epochs;
  if (f.batch) cfg.batch_size = *f.batch;
  if (f.seed) cfg.seed = *f.seed;
  if (f.split) cfg.split_fraction = *f.split;
  if (f.activation) cfg.activation = parse_activation(*f.activation);
  cfg.validate();
  return cfg;
}

std::string percent(double rate) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * rate;
  return os.str();
}

void write_metrics(const std::filesystem::path& path, const std::vector<EpochMetrics>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics file " + path.string());
  out << "epoch,train_loss,train_err,test_err\n" << std::setprecision(9);
  for (const auto& m : history) out << m.epoch << ',' << m.train_loss << ',' << m.train_err << ',' << m.test_err << '\n';
}

Shape3 model_input(const ModelFile& file) {
  return std::visit([](const auto& net) { return net.input; }, file.model);
}

void print_epoch(std::ostream& os, Structure s, const EpochMetrics& m) {
  os << to_string(s) << " epoch " << m.epoch << ": loss=" << std::setprecision(5) << m.train_loss
     << " train_err=" << percent(m.train_err) << "% test_err=" << percent(m.test_err) << "%\n";
}

// ---- commands ---------------------------------------------------------------

struct CostArgs {
  std::uint64_t k = 5, n = 14, m = 20, c = 1, l = 8;
  std::string mode = "exact";
};

int cmd_cost(const CostArgs& a, std::ostream& out, std::ostream& err) {
  const ConvShape shape{a.k, a.n, a.m, a.c, a.l};
  shape.validate();
  const CountingMode mode = parse_counting_mode(a.mode);
  const CostReport cl = classic_cost(shape, mode);
  const CostReport sp = separated_cost(shape, mode);
  const std::uint64_t pixels = cl.output_h * cl.output_w;

  out << "shape: K=" << a.k << " N=" << a.n << " M=" << a.m << " C=" << a.c << " L=" << a.l
      << "  counting mode: " << to_string(mode) << "\n";
  out << std::left << std::setw(30) << "" << std::right << std::setw(14) << "classic" << std::setw(14)
      << "separated" << "\n";
  auto row = [&](const std::string& name, const std::string& x, const std::string& y) {
    out << std::left << std::setw(30) << name << std::right << std::setw(14) << x << std::setw(14) << y << "\n";
  };
  row("multiplications", std::to_string(cl.multiplications), std::to_string(sp.multiplications));
  std::ostringstream per_c, per_s;
  per_c << std::setprecision(6) << static_cast<double>(cl.multiplications) / static_cast<double>(pixels);
  per_s << std::setprecision(6) << static_cast<double>(sp.multiplications) / static_cast<double>(pixels);
  row("multiplications per pixel", per_c.str(), per_s.str());
  row("additions", std::to_string(cl.additions), std::to_string(sp.additions));
  row("weights", std::to_string(cl.weights), std::to_string(sp.weights));
  row("weights (K*C*L + K*L + L)", "-", std::to_string(sp.quoted_weights));
  row("biases", std::to_string(cl.biases), std::to_string(sp.biases));
  row("output", std::to_string(cl.output_h) + "x" + std::to_string(cl.output_w),
      std::to_string(sp.output_h) + "x" + std::to_string(sp.output_w));
  out << "ratio (classic/separated multiplications): " << std::fixed << std::setprecision(4)
      << speedup_ratio(shape, mode) << "\n";
  out.unsetf(std::ios::floatfield);
  if (!separation_pays_off(shape)) {
    err << "warning: below break-even (K^2*C <= K*C + K + L); the separated layer costs more multiplications\n";
  }
  return 0;
}

struct TrainArgs {
  DataSource data;
  ConfigFlags config;
  std::string structure;
  std::string out_path;
  std::string metrics_path;
  std::string dtype = "f64";
  std::size_t filters = 8;
  std::size_t kernel = 5;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const Structure structure = parse_structure(a.structure);
  const TrainConfig cfg = resolve_config(a.config);
  const Dtype dtype = parse_dtype(a.dtype);
  if (dtype == Dtype::q16) throw UsageError("train writes f32 or f64 models; use 'quantize' for q16");
  const Dataset data = load_data(a.data);
  const TrainSplit split = split_for(data, cfg);
  const Topology topo = topology_for(data, cfg, a.filters, a.kernel);
  const TrainResult result = train_structure(structure, split, cfg, topo, [&](const EpochMetrics& m) {
    if (!a.quiet) print_epoch(out, structure, m);
  });
  const std::string path = a.out_path.empty() ? std::string(to_string(structure)) + ".sepc" : a.out_path;
  save_model(path, result.network, dtype);
  if (!a.metrics_path.empty()) write_metrics(a.metrics_path, result.history);
  const auto& last = result.history.back();
  out << "structure: " << to_string(structure) << "\n"
      << "train samples: " << split.train.size() << "  test samples: " << split.test.size() << "\n"
      << "final train_err: " << percent(last.train_err) << "%  test_err: " << percent(last.test_err) << "%\n"
      << "model: " << path << "\n";
  return 0;
}

struct EvalArgs {
  DataSource data;
  ConfigFlags config;
  std::string model;
  bool all = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const TrainConfig cfg = resolve_config(a.config);
  const ModelFile file = load_model(a.model);
  const Dataset data = load_data(a.data);
  if (!(data.shape() == model_input(file))) {
    throw DimensionError("dataset images are " + to_string(data.shape()) + " but the model expects " +
                         to_string(model_input(file)));
  }
  const Dataset eval_set = a.all ? data : split_for(data, cfg).test;
  out << "model: " << a.model << " (" << to_string(file.dtype) << ")\n";
  out << "samples: " << eval_set.size() << (a.all ? " (whole dataset)" : " (test split)") << "\n";
  if (const auto* net = std::get_if<Network>(&file.model)) {
    const LossResult lr = forward_loss(*net, eval_set);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < eval_set.size(); ++i) wrong += lr.predictions[i] != eval_set.labels[i] ? 1 : 0;
    out << "loss: " << std::setprecision(6) << lr.loss << "\n";
    out << "error_rate: " << percent(static_cast<double>(wrong) / static_cast<double>(eval_set.size())) << "%\n";
  } else {
    const auto& q = std::get<QuantizedNetwork>(file.model);
    out << "error_rate: " << percent(evaluate_error_rate(q, eval_set)) << "%\n";
  }
  return 0;
}

struct QuantizeArgs {
  DataSource data;
  ConfigFlags config;
  std::string model;
  std::string out_path;
  int bits = 16;
  std::size_t calibration = 512;
};

int cmd_quantize(const QuantizeArgs& a, std::ostream& out) {
  const TrainConfig cfg = resolve_config(a.config);
  const Network net = load_network(a.model);
  const Dataset data = load_data(a.data);
  if (!(data.shape() == net.input)) throw DimensionError("dataset shape does not match the model input");
  const TrainSplit split = split_for(data, cfg);
  const std::size_t n_cal = std::min(a.calibration, split.train.size());
  if (n_cal == 0) throw UsageError("calibration needs at least one sample");
  const std::span<const Tensor3> cal(split.train.images.data(), n_cal);
  const QuantizedNetwork q = quantize_network(net, cal, {a.bits});
  const std::string path = a.out_path.empty() ? a.model + ".q16" : a.out_path;
  save_model(path, q);
  out << "bits: " << a.bits << "  calibration samples: " << n_cal << "\n";
  out << "float error_rate: " << percent(evaluate_error_rate(net, split.test)) << "%\n";
  out << "fixed error_rate: " << percent(evaluate_error_rate(q, split.test)) << "%\n";
  out << "argmax agreement: " << percent(prediction_agreement(net, q, split.test)) << "%\n";
  out << "model: " << path << "\n";
  return 0;
}

struct BenchArgs {
  std::string model;
  std::optional<std::uint64_t> k, n, m, c, l;
  BenchOptions options;
  bool f32 = false;
  double sample_ms = 2.0;
};

int cmd_bench(BenchArgs a, std::ostream& out) {
  a.options.single_precision = a.f32;
  a.options.min_sample_ns = a.sample_ms * 1e6;
  BenchReport report;
  if (!a.model.empty()) {
    const ModelFile file = load_model(a.model);
    std::optional<Shape3> input;
    if (a.n || a.m || a.c) {
      const Shape3 in = model_input(file);
      input = Shape3{a.n.value_or(in.height), a.m.value_or(in.width), a.c.value_or(in.channels)};
    }
    report = bench_model(file, input, a.options);
  } else {
    const ConvShape shape{a.k.value_or(5), a.n.value_or(14), a.m.value_or(20), a.c.value_or(1), a.l.value_or(8)};
    report = bench_layers(shape, a.options);
  }
  print_report(out, report);
  return 0;
}

struct CompareArgs {
  DataSource data;
  ConfigFlags config;
  std::string out_dir;
  std::size_t filters = 8;
  std::size_t kernel = 5;
  bool quiet = false;
};

int cmd_compare(const CompareArgs& a, std::ostream& out, std::ostream& err) {
  const TrainConfig cfg = resolve_config(a.config);
  const Dataset data = load_data(a.data);
  const TrainSplit split = split_for(data, cfg);
  const Topology topo = topology_for(data, cfg, a.filters, a.kernel);
  const auto runs = compare_structures(split, cfg, topo, a.quiet ? nullptr : &err);
  if (!a.out_dir.empty()) {
    std::filesystem::create_directories(a.out_dir);
    for (const auto& r : runs) {
      const std::string stem = std::string(to_string(r.structure));
      save_model(std::filesystem::path(a.out_dir) / (stem + ".sepc"), r.result.network);
      write_metrics(std::filesystem::path(a.out_dir) / (stem + ".csv"), r.result.history);
    }
  }
  const std::string name = a.data.format == "synthetic" || a.data.path == "synthetic"
                               ? "synthetic digits (" + std::to_string(data.size()) + ")"
                               : std::filesystem::path(a.data.path).filename().string();
  print_comparison(out, runs, name);
  return 0;
}

struct GenArgs {
  std::size_t count = 5000;
  std::uint64_t seed = 1;
  std::string shape = "14x20x1";
  std::string prefix = "synthetic";
};

int cmd_gen_data(const GenArgs& a, std::ostream& out) {
  const Dataset data = make_synthetic_digits(a.count, a.seed, parse_shape(a.shape));
  const std::string images = a.prefix + "-images.idx";
  const std::string labels = a.prefix + "-labels.idx";
  save_idx(data, images, labels);
  out << "wrote " << data.size() << " samples: " << images << ", " << labels << "\n";
  return 0;
}

}  // namespace

Shape3 parse_shape(const std::string& text) {
  const auto dims = parse_dims(text);
  if (dims.size() != 2 && dims.size() != 3) throw UsageError("shape must be HxW or HxWxC");
  Shape3 s{dims[0], dims[1], dims.size() == 3 ? dims[2] : 1};
  if (s.size() == 0) throw UsageError("shape dimensions must be positive");
  return s;
}

Dataset load_data(const DataSource& src) {
  std::string format = src.format;
  if (format == "auto") {
    if (src.path == "synthetic") {
      format = "synthetic";
    } else if (ends_with(src.path, ".csv")) {
      format = "csv";
    } else {
      format = "idx";
    }
  }
  Dataset data;
  if (format == "synthetic") {
    Shape3 shape{14, 20, 1};
    if (!src.shape.empty()) shape = parse_shape(src.shape);
    data = make_synthetic_digits(src.synthetic_count, src.data_seed, shape);
  } else if (format == "csv") {
    if (src.shape.empty()) throw UsageError("CSV datasets need --shape HxWxC");
    data = load_csv(src.path, parse_shape(src.shape));
  } else if (format == "idx") {
    if (src.labels.empty()) throw UsageError("IDX datasets need --labels");
    data = load_idx(src.path, src.labels);
  } else {
    throw UsageError("unknown dataset format " + format);
  }
  if (!src.resize.empty()) {
    const auto dims = parse_dims(src.resize);
    if (dims.size() != 2) throw UsageError("--resize expects HxW");
    data = resize_dataset(data, dims[0], dims[1]);
  }
  if (data.empty()) throw DatasetError("dataset is empty");
  return data;
}

TrainSplit split_for(const Dataset& data, const TrainConfig& cfg) {
  auto [train, test] = split_dataset(data, cfg.split_fraction, derive_seed(cfg.seed, kSplitStream));
  return {std::move(train), std::move(test)};
}

Topology topology_for(const Dataset& data, const TrainConfig& cfg, std::size_t filters, std::size_t kernel) {
  Topology topo;
  topo.input = data.shape();
  topo.filters = filters;
  topo.kernel = kernel;
  topo.classes = data.class_count;
  topo.activation = cfg.activation;
  return topo;
}

TrainResult train_structure(Structure structure, const TrainSplit& split, const TrainConfig& cfg,
                            const Topology& topology, const EpochCallback& on_epoch) {
  Network net = make_network(structure, topology, derive_seed(cfg.seed, kInitStream));
  return sgd_train(std::move(net), split.train, &split.test, cfg, on_epoch);
}

std::vector<StructureRun> compare_structures(const TrainSplit& split, const TrainConfig& cfg,
                                             const Topology& topology, std::ostream* progress) {
  const ConvShape shape{topology.kernel, topology.input.height, topology.input.width, topology.input.channels,
                        topology.filters};
  std::vector<StructureRun> runs;
  for (Structure s : {Structure::classic, Structure::separated_nofuse, Structure::separated}) {
    StructureRun run{s, train_structure(s, split, cfg, topology, [&](const EpochMetrics& m) {
                       if (progress != nullptr) print_epoch(*progress, s, m);
                     })};
    run.train_err = run.result.history.back().train_err;
    run.test_err = run.result.history.back().test_err;
    const CostReport cost = s == Structure::classic ? classic_cost(shape, CountingMode::exact_valid)
                                                    : separated_cost(shape, CountingMode::exact_valid);
    run.multiplications = cost.multiplications;
    run.weights = cost.weights - (s == Structure::separated_nofuse ? shape.l * shape.l : 0);
    runs.push_back(std::move(run));
  }
  return runs;
}

void print_comparison(std::ostream& os, const std::vector<StructureRun>& runs, const std::string& dataset_name) {
  const int first = 30;
  const int col = 22;
  os << std::left << std::setw(first) << "test error (%)";
  for (const auto& r : runs) {
    std::string head = r.structure == Structure::classic             ? "classic CNN"
                       : r.structure == Structure::separated_nofuse ? "separated (no fusing)"
                                                                     : "separated (fusing)";
    os << std::right << std::setw(col) << head;
  }
  os << "\n";
  auto row = [&](const std::string& name, auto value) {
    os << std::left << std::setw(first) << name;
    for (const auto& r : runs) os << std::right << std::setw(col) << value(r);
    os << "\n";
  };
  row(dataset_name, [](const StructureRun& r) { return percent(r.test_err); });
  row("train error (%)", [](const StructureRun& r) { return percent(r.train_err); });
  row("trainable conv weights", [](const StructureRun& r) { return std::to_string(r.weights); });
  row("conv multiplications", [](const StructureRun& r) { return std::to_string(r.multiplications); });
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Classic and separated-filter convolutional networks: cost, training, benchmarks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  CostArgs cost;
  auto* c_cost = app.add_subcommand("cost", "Multiplication and weight counts, classic vs separated");
  c_cost->add_option("--k", cost.k, "Filter size K")->capture_default_str();
  c_cost->add_option("--n", cost.n, "Image rows N")->capture_default_str();
  c_cost->add_option("--m", cost.m, "Image columns M")->capture_default_str();
  c_cost->add_option("--c", cost.c, "Input channels C")->capture_default_str();
  c_cost->add_option("--l", cost.l, "Filters L")->capture_default_str();
  c_cost->add_option("--mode", cost.mode, "exact | paper")
      ->check(CLI::IsMember({"exact", "paper"}))
      ->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train one structure with SGD");
  add_data_options(c_train, train.data);
  add_config_options(c_train, train.config);
  c_train->add_option("--structure", train.structure, "classic | separated | separated-nofuse")->required();
  c_train->add_option("--out", train.out_path, "Model file (default <structure>.sepc)");
  c_train->add_option("--metrics", train.metrics_path, "Per-epoch CSV metrics file");
  c_train->add_option("--dtype", train.dtype, "f32 | f64")->capture_default_str();
  c_train->add_option("--filters", train.filters, "Filters L")->capture_default_str();
  c_train->add_option("--kernel", train.kernel, "Filter size K")->capture_default_str();
  c_train->add_flag("--quiet", train.quiet, "No per-epoch lines");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Error rate of a model file");
  add_data_options(c_eval, eval.data);
  add_config_options(c_eval, eval.config);
  c_eval->add_option("--model", eval.model, "Model file")->required();
  c_eval->add_flag("--all", eval.all, "Evaluate the whole dataset instead of the test split");

  QuantizeArgs quant;
  auto* c_quant = app.add_subcommand("quantize", "Convert a float model to 16-bit fixed point");
  add_data_options(c_quant, quant.data);
  add_config_options(c_quant, quant.config);
  c_quant->add_option("--model", quant.model, "Float model file")->required();
  c_quant->add_option("--out", quant.out_path, "Output model (default <model>.q16)");
  c_quant->add_option("--bits", quant.bits, "Bit width 2..16")->capture_default_str();
  c_quant->add_option("--calibration-count", quant.calibration, "Training samples used for calibration")
      ->capture_default_str();

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Forward-pass timing, classic vs separated");
  c_bench->add_option("--model", bench.model, "Model file (otherwise random layers at the given shape)");
  c_bench->add_option("--k", bench.k, "Filter size K (default 5)");
  c_bench->add_option("--n", bench.n, "Image rows N (default 14)");
  c_bench->add_option("--m", bench.m, "Image columns M (default 20)");
  c_bench->add_option("--c", bench.c, "Input channels C (default 1)");
  c_bench->add_option("--l", bench.l, "Filters L (default 8)");
  c_bench->add_option("--reps", bench.options.reps, "Timed repetitions (>= 10)")->capture_default_str();
  c_bench->add_option("--warmup", bench.options.warmup, "Discarded warmup repetitions")->capture_default_str();
  c_bench->add_option("--threads", bench.options.threads, "Concurrent forward workers")->capture_default_str();
  c_bench->add_option("--seed", bench.options.seed, "Seed of the random input and layers")->capture_default_str();
  c_bench->add_option("--sample-ms", bench.sample_ms, "Minimum duration of one timed batch")->capture_default_str();
  c_bench->add_flag("--f32", bench.f32, "Single-precision layer variants");

  CompareArgs cmp;
  auto* c_cmp = app.add_subcommand("compare", "Train all three structures and tabulate their error rates");
  add_data_options(c_cmp, cmp.data);
  add_config_options(c_cmp, cmp.config);
  c_cmp->add_option("--out-dir", cmp.out_dir, "Directory for the three models and metrics files");
  c_cmp->add_option("--filters", cmp.filters, "Filters L")->capture_default_str();
  c_cmp->add_option("--kernel", cmp.kernel, "Filter size K")->capture_default_str();
  c_cmp->add_flag("--quiet", cmp.quiet, "No per-epoch lines");

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Write the synthetic digit set as IDX files");
  c_gen->add_option("--count", gen.count, "Samples")->capture_default_str();
  c_gen->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  c_gen->add_option("--shape", gen.shape, "Image shape HxWxC")->capture_default_str();
  c_gen->add_option("--out-prefix", gen.prefix, "Writes <prefix>-images.idx and <prefix>-labels.idx")
      ->capture_default_str();

  std::vector<const char*> argv{"sepconv"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == c_cost) return cmd_cost(cost, out, err);
    if (active == c_train) return cmd_train(train, out);
    if (active == c_eval) return cmd_eval(eval, out);
    if (active == c_quant) return cmd_quantize(quant, out);
    if (active == c_bench) return cmd_bench(bench, out);
    if (active == c_cmp) return cmd_compare(cmp, out, err);
    if (active == c_gen) return cmd_gen_data(gen, out);
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n\n" << active->help();
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n\n" << active->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace sepconv::cli
