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

#include "sepconv/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <stdexcept>
#include <thread>

#include "sepconv/conv_classic.hpp"
#include "sepconv/conv_separated.hpp"
#include "sepconv/random.hpp"

namespace sepconv {

void BenchOptions::validate() const {
  if (reps < 10) throw std::invalid_argument("benchmark needs at least 10 repetitions");
  if (threads < 1) throw std::invalid_argument("benchmark needs at least one thread");
  if (!(min_sample_ns >= 0)) throw std::invalid_argument("min_sample_ns must be non-negative");
}

const VariantTiming& BenchReport::variant(const std::string& name) const {
  for (const auto& v : variants) {
    if (v.name == name) return v;
  }
  throw std::out_of_range("no benchmark variant named " + name);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

using Clock = std::chrono::steady_clock;

// Keeps forward results observable so the optimizer cannot drop them.
std::atomic<double> g_sink{0.0};

template <typename T>
void consume(const BasicTensor3<T>& t) {
  g_sink.store(static_cast<double>(t.data()[0]), std::memory_order_relaxed);
}

double time_batch(const BenchCase& c, std::size_t batch, std::size_t threads) {
  const auto start = Clock::now();
  if (threads == 1) {
    for (std::size_t i = 0; i < batch; ++i) c.run();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&c, batch] {
        for (std::size_t i = 0; i < batch; ++i) c.run();
      });
    }
  }
  const auto stop = Clock::now();
  return static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count());
}

template <typename To>
std::vector<To> cast_all(const std::vector<double>& v) {
  return std::vector<To>(v.begin(), v.end());
}

template <typename T>
BasicClassicConvLayer<T> cast_layer(const ClassicConvLayer& l) {
  BasicClassicConvLayer<T> out;
  out.filters = BasicFilterBank<T>(l.filters.kh, l.filters.kw, l.filters.in_channels, l.filters.count);
  out.filters.weights = cast_all<T>(l.filters.weights);
  out.bias = cast_all<T>(l.bias);
  out.activation = l.activation;
  return out;
}

template <typename T>
BasicSeparatedConvParams<T> cast_params(const SeparatedConvParams& p) {
  BasicSeparatedConvParams<T> out(p.k, p.in_channels, p.count);
  out.vertical = cast_all<T>(p.vertical);
  out.horizontal = cast_all<T>(p.horizontal);
  out.fusion = cast_all<T>(p.fusion);
  out.bias = cast_all<T>(p.bias);
  out.activation = p.activation;
  out.fusion_frozen = p.fusion_frozen;
  return out;
}

template <typename T>
void add_layer_cases(std::vector<BenchCase>& cases, const ClassicConvLayer& classic, const SeparatedConvParams& sep,
                     const Tensor3& image, const ConvShape& shape) {
  BasicTensor3<T> input(image.shape());
  std::copy(image.data().begin(), image.data().end(), input.data().begin());
  auto cl = cast_layer<T>(classic);
  auto sp = cast_params<T>(sep);
  cases.push_back({"classic", [input, cl] { consume(conv2d_matrix(input, cl)); },
                   classic_cost(shape, CountingMode::exact_valid).multiplications});
  cases.push_back({"separated", [input, sp] { consume(sep_forward(input, sp)); },
                   separated_cost(shape, CountingMode::exact_valid).multiplications});
}

Tensor3 random_image(const Shape3& shape, Rng& rng) {
  Tensor3 image(shape);
  for (auto& v : image.data()) v = uniform01(rng);
  return image;
}

SeparatedConvParams random_separated(const ConvShape& s, Rng& rng) {
  SeparatedConvParams p(s.k, s.c, s.l);
  for (auto* arr : {&p.vertical, &p.horizontal, &p.fusion, &p.bias}) {
    for (auto& v : *arr) v = uniform(rng, -1.0, 1.0);
  }
  return p;
}

ClassicConvLayer random_classic(const ConvShape& s, Rng& rng) {
  ClassicConvLayer l;
  l.filters = FilterBank(s.k, s.k, s.c, s.l);
  for (auto& v : l.filters.weights) v = uniform(rng, -1.0, 1.0);
  l.bias.resize(s.l);
  for (auto& v : l.bias) v = uniform(rng, -1.0, 1.0);
  return l;
}

BenchReport finish_report(const ConvShape& shape, const BenchOptions& options, std::vector<BenchCase> cases) {
  BenchReport r;
  r.shape = shape;
  r.warmup = options.warmup;
  r.reps = options.reps;
  r.threads = options.threads;
  r.precision = options.single_precision ? "f32" : "f64";
  r.classic_paper = classic_cost(shape, CountingMode::paper_asymptotic);
  r.separated_paper = separated_cost(shape, CountingMode::paper_asymptotic);
  r.classic_exact = classic_cost(shape, CountingMode::exact_valid);
  r.separated_exact = separated_cost(shape, CountingMode::exact_valid);
  r.theoretical_ratio_paper = speedup_ratio(shape, CountingMode::paper_asymptotic);
  r.theoretical_ratio_exact = speedup_ratio(shape, CountingMode::exact_valid);
  r.variants = time_cases(std::move(cases), options);
  r.measured_ratio = r.variant("separated").median_ns / r.variant("classic").median_ns;
  r.measured_speedup = 1.0 / r.measured_ratio;
  return r;
}

void add_layers(const BenchOptions& o, std::vector<BenchCase>& cases, const ClassicConvLayer& classic,
                const SeparatedConvParams& sep, const Tensor3& image, const ConvShape& shape) {
  if (o.single_precision) {
    add_layer_cases<float>(cases, classic, sep, image, shape);
  } else {
    add_layer_cases<double>(cases, classic, sep, image, shape);
  }
}

SeparatedConvParams dequantized(const QuantizedSeparatedConv& q) {
  SeparatedConvParams p(q.k, q.in_channels, q.count);
  p.vertical = dequantize(q.vertical);
  p.horizontal = dequantize(q.horizontal);
  p.fusion = dequantize(q.fusion);
  const double bias_scale = q.horizontal_scale * q.fusion.scale;
  for (std::size_t l = 0; l < q.count; ++l) p.bias[l] = static_cast<double>(q.bias[l]) * bias_scale;
  p.activation = q.activation;
  p.fusion_frozen = q.fusion_frozen;
  return p;
}

ClassicConvLayer dequantized(const QuantizedClassicConv& q) {
  ClassicConvLayer l;
  l.filters = FilterBank(q.kh, q.kw, q.in_channels, q.count);
  l.filters.weights = dequantize(q.weights);
  l.bias.resize(q.count);
  const double bias_scale = q.in_scale * q.weights.scale;
  for (std::size_t i = 0; i < q.count; ++i) l.bias[i] = static_cast<double>(q.bias[i]) * bias_scale;
  l.activation = q.activation;
  return l;
}

// Only the dimensions matter to the multiplication count.
std::vector<Layer> dequantized_layers(const QuantizedNetwork& q) {
  std::vector<Layer> out;
  for (const auto& layer : q.layers) {
    std::visit(detail::Overloaded{[&](const QuantizedClassicConv& c) { out.emplace_back(dequantized(c)); },
                          [&](const QuantizedSeparatedConv& p) { out.emplace_back(dequantized(p)); },
                          [&](const QuantizedDense& d) { out.emplace_back(DenseLayer(d.inputs, d.outputs)); },
                          [&](const SoftmaxLayer& sm) { out.emplace_back(sm); }},
               layer);
  }
  return out;
}

ConvShape shape_of(const Shape3& input, std::size_t k, std::size_t kw, std::size_t c, std::size_t l) {
  if (k != kw) throw DimensionError("benchmark needs square filters");
  ConvShape s{k, input.height, input.width, c, l};
  s.validate();
  return s;
}

// Whole-network multiplication count, convolutions counted over valid outputs only.
std::uint64_t network_multiplications(const Shape3& input, const std::vector<Layer>& layers) {
  Shape3 in = input;
  std::uint64_t total = 0;
  for (const auto& layer : layers) {
    if (const auto* c = std::get_if<ClassicConvLayer>(&layer)) {
      const Shape3 out = c->output_shape(in);
      total += out.height * out.width * c->filters.count * c->filters.filter_size();
      in = out;
    } else if (const auto* p = std::get_if<SeparatedConvParams>(&layer)) {
      total += separated_cost(ConvShape{p->k, in.height, in.width, p->in_channels, p->count}, CountingMode::exact_valid)
                   .multiplications;
      in = Shape3{in.height - p->k + 1, in.width - p->k + 1, p->count};
    } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      total += d->inputs * d->outputs;
      in = Shape3{1, 1, d->outputs};
    }
  }
  return total;
}

}  // namespace

std::vector<VariantTiming> time_cases(std::vector<BenchCase> cases, const BenchOptions& options) {
  options.validate();
  std::vector<VariantTiming> out(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    out[i].name = cases[i].name;
    out[i].multiplications = cases[i].multiplications;
    cases[i].run();
    const double once = std::max(1.0, time_batch(cases[i], 1, 1));
    out[i].batch = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(options.min_sample_ns / once)));
  }
  const double per_sample = static_cast<double>(options.threads);
  for (std::size_t round = 0; round < options.warmup + options.reps; ++round) {
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const double ns = time_batch(cases[i], out[i].batch, options.threads);
      if (round >= options.warmup) out[i].samples_ns.push_back(ns / (static_cast<double>(out[i].batch) * per_sample));
    }
  }
  for (auto& v : out) {
    v.median_ns = quantile(v.samples_ns, 0.5);
    v.q1_ns = quantile(v.samples_ns, 0.25);
    v.q3_ns = quantile(v.samples_ns, 0.75);
    v.iqr_ns = v.q3_ns - v.q1_ns;
  }
  return out;
}

BenchReport bench_layers(const ConvShape& shape, const BenchOptions& options) {
  shape.validate();
  options.validate();
  Rng rng(options.seed);
  const Tensor3 image = random_image({shape.n, shape.m, shape.c}, rng);
  const auto classic = random_classic(shape, rng);
  const auto sep = random_separated(shape, rng);
  std::vector<BenchCase> cases;
  add_layers(options, cases, classic, sep, image, shape);
  return finish_report(shape, options, std::move(cases));
}

BenchReport bench_model(const ModelFile& model, std::optional<Shape3> input, const BenchOptions& options) {
  options.validate();
  Rng rng(options.seed);
  const Shape3 model_input =
      std::visit([](const auto& net) { return net.input; }, model.model);
  if (input && !(*input == model_input)) {
    throw DimensionError("input shape " + to_string(*input) + " does not match the model input " +
                         to_string(model_input));
  }
  const Tensor3 image = random_image(model_input, rng);

  std::optional<ConvShape> shape;
  std::optional<ClassicConvLayer> classic;
  std::optional<SeparatedConvParams> sep;
  std::vector<BenchCase> extra;

  if (const auto* net = std::get_if<Network>(&model.model)) {
    for (const auto& layer : net->layers) {
      if (const auto* c = std::get_if<ClassicConvLayer>(&layer)) {
        shape = shape_of(model_input, c->filters.kh, c->filters.kw, c->filters.in_channels, c->filters.count);
        classic = *c;
        sep = random_separated(*shape, rng);
        sep->activation = c->activation;
        break;
      }
      if (const auto* p = std::get_if<SeparatedConvParams>(&layer)) {
        shape = shape_of(model_input, p->k, p->k, p->in_channels, p->count);
        sep = *p;
        classic = equivalent_classic_layer(*p);
        break;
      }
    }
    extra.push_back({"network", [n = *net, image] { g_sink.store(network_logits(n, image)[0]); },
                     network_multiplications(net->input, net->layers)});
  } else {
    const auto& q = std::get<QuantizedNetwork>(model.model);
    for (const auto& layer : q.layers) {
      if (const auto* c = std::get_if<QuantizedClassicConv>(&layer)) {
        shape = shape_of(model_input, c->kh, c->kw, c->in_channels, c->count);
        classic = dequantized(*c);
        sep = random_separated(*shape, rng);
        break;
      }
      if (const auto* p = std::get_if<QuantizedSeparatedConv>(&layer)) {
        shape = shape_of(model_input, p->k, p->k, p->in_channels, p->count);
        sep = dequantized(*p);
        classic = equivalent_classic_layer(*sep);
        break;
      }
    }
    extra.push_back({"q16", [q, image] { g_sink.store(forward_fixed(q, image).logits[0]); },
                     network_multiplications(q.input, dequantized_layers(q))});
  }
  if (!shape) throw DimensionError("model has no convolution layer to benchmark");

  std::vector<BenchCase> cases;
  add_layers(options, cases, *classic, *sep, image, *shape);
  for (auto& e : extra) cases.push_back(std::move(e));
  return finish_report(*shape, options, std::move(cases));
}

void print_report(std::ostream& os, const BenchReport& r) {
  const auto flags = os.flags();
  os << "shape: K=" << r.shape.k << " N=" << r.shape.n << " M=" << r.shape.m << " C=" << r.shape.c
     << " L=" << r.shape.l << "\n";
  os << "protocol: warmup=" << r.warmup << " reps=" << r.reps << " threads=" << r.threads
     << " precision=" << r.precision << " clock=steady\n";
  os << std::left << std::setw(12) << "variant" << std::right << std::setw(14) << "median_ns" << std::setw(14)
     << "iqr_ns" << std::setw(10) << "batch" << std::setw(16) << "mults_exact" << "\n";
  os << std::fixed << std::setprecision(1);
  for (const auto& v : r.variants) {
    os << std::left << std::setw(12) << v.name << std::right << std::setw(14) << v.median_ns << std::setw(14)
       << v.iqr_ns << std::setw(10) << v.batch << std::setw(16) << v.multiplications << "\n";
  }
  os << std::setprecision(4);
  os << "multiplications paper: classic=" << r.classic_paper.multiplications
     << " separated=" << r.separated_paper.multiplications << "\n";
  os << "multiplications exact: classic=" << r.classic_exact.multiplications
     << " separated=" << r.separated_exact.multiplications << "\n";
  os << std::left << std::setw(28) << "" << std::right << std::setw(12) << "theory" << std::setw(12) << "measured"
     << "\n";
  os << std::left << std::setw(28) << "classic/separated (paper)" << std::right << std::setw(12)
     << r.theoretical_ratio_paper << std::setw(12) << r.measured_speedup << "\n";
  os << std::left << std::setw(28) << "classic/separated (exact)" << std::right << std::setw(12)
     << r.theoretical_ratio_exact << std::setw(12) << r.measured_speedup << "\n";
  os << "separated/classic time ratio: " << r.measured_ratio << "\n";
  os.flags(flags);
}

}  // namespace sepconv
