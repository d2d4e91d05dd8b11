// SPDX-License-Identifier: Apache-2.0
#pragma once

//
// Compression training loop. Starting from a dense warm-trained model, each
// mode trains under plain SGD while shrinking the footprint toward the
// budget:
//
//   losparse                factors U, V plus sparse S per layer; smoothed
//                           gradient-weight sensitivity scores the columns
//                           of S, and a cubic schedule prunes the weakest
//                           columns globally across layers.
//   itp                     dense weights, same scores, same schedule; the
//                           baseline with no low-rank pathway.
//   lowrank_only_finetune   factors only, sparse part dropped at init.
//   lowrank_only_pruneaway  factors plus sparse at init, schedule driven to
//                           zero so the sparse part is pruned away entirely.
//
// One step (the order matters and is covered by tests): forward and loss on
// the step's batch, backward, instant sensitivity of the tracked matrices at
// their pre-update values, smoothing update, column scores, SGD update of
// every trainable tensor, then the global top-p_t prune of the updated
// matrices. Metrics are recorded after the prune.
//

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "losparse/csv.hpp"
#include "losparse/errors.hpp"
#include "losparse/factorized.hpp"
#include "losparse/importance.hpp"
#include "losparse/matrix.hpp"
#include "losparse/model.hpp"
#include "losparse/pruner.hpp"
#include "losparse/schedule.hpp"
#include "losparse/task.hpp"

namespace losparse {

// Length of the dense warm-training phase that manufactures the
// "pretrained" weights every mode starts from.
inline constexpr std::size_t kPretrainSteps = 300;

enum class TrainMode {
  kLosparse,
  kItp,
  kLowrankFinetune,
  kLowrankPruneaway,
};

inline const char* mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kLosparse: return "losparse";
    case TrainMode::kItp: return "itp";
    case TrainMode::kLowrankFinetune: return "lowrank_only_finetune";
    case TrainMode::kLowrankPruneaway: return "lowrank_only_pruneaway";
  }
  throw ConfigError("mode_name: unknown mode value");
}

inline TrainMode parse_mode(const std::string& name) {
  if (name == "losparse") return TrainMode::kLosparse;
  if (name == "itp") return TrainMode::kItp;
  if (name == "lowrank_only_finetune") return TrainMode::kLowrankFinetune;
  if (name == "lowrank_only_pruneaway") return TrainMode::kLowrankPruneaway;
  throw ConfigError("unknown mode \"" + name + "\"");
}

struct TrainConfig {
  double alpha = 0.01;
  PruneSchedule schedule;
  double beta = 0.85;
  CompressionBudget budget;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::kLosparse;
};

inline void validate_train_config(const TrainConfig& c) {
  if (!(c.alpha > 0.0) || !std::isfinite(c.alpha)) {
    throw ConfigError("train config: alpha must be positive and finite");
  }
  if (c.batch_size == 0) {
    throw ConfigError("train config: batch_size must be positive");
  }
  if (!(c.beta >= 0.0) || c.beta >= 1.0) {
    throw ConfigError("train config: beta must lie in [0, 1)");
  }
  validate_schedule(c.schedule);
  validate_budget(c.budget);
  if (c.mode == TrainMode::kItp && c.budget.lowrank_ratio != 0.0) {
    throw ConfigError(
        "train config: mode itp has no factors; lowrank_ratio must be 0");
  }
  if (c.mode == TrainMode::kLosparse && c.budget.lowrank_ratio <= 0.0) {
    throw ConfigError("train config: mode losparse needs lowrank_ratio > 0");
  }
}

struct MetricsRow {
  std::size_t step = 0;
  double loss = 0.0;
  double p_t = 1.0;
  double remaining_ratio = 0.0;
  std::vector<std::size_t> live_cols;  // one count per layer
};

struct MetricsTrace {
  std::vector<MetricsRow> rows;
};

inline void write_metrics_csv(const MetricsTrace& trace, std::ostream& out) {
  if (trace.rows.empty()) {
    throw EmptyInputError("write_metrics_csv: trace has no rows");
  }
  out << "step,loss,p_t,remaining_ratio";
  for (std::size_t l = 0; l < trace.rows.front().live_cols.size(); ++l)
    out << ",live_cols_layer" << l;
  out << "\n";
  for (const MetricsRow& r : trace.rows) {
    out << r.step << ',' << format_double(r.loss) << ','
        << format_double(r.p_t) << ',' << format_double(r.remaining_ratio);
    for (std::size_t c : r.live_cols) out << ',' << c;
    out << "\n";
  }
}

// Halved squared error averaged over every target entry.
inline double evaluate(const ToyModel& model, const Dataset& data) {
  const DenseMatrix y = forward_model(model, data.inputs);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y.data()[i] - data.targets.data()[i];
    acc += 0.5 * e * e;
  }
  return acc / static_cast<double>(y.size());
}

// One SGD update, w <- w - alpha * g.
inline void sgd_step(DenseMatrix& w, const DenseMatrix& g, double alpha) {
  axpy_inplace(w, alpha, g);
}

inline void sgd_step(std::vector<double>& w, const std::vector<double>& g,
                     double alpha) {
  if (w.size() != g.size()) {
    throw ShapeError("sgd_step: parameter count " + std::to_string(w.size()) +
                     " vs gradient count " + std::to_string(g.size()));
  }
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= alpha * g[i];
}

// Rows [start, start + count) of the dataset, wrapping around the end, so a
// global step index defines its batch with no extra state.
inline Dataset batch_at(const Dataset& data, std::size_t global_step,
                        std::size_t batch_size) {
  const std::size_t n = data.size();
  const std::size_t start = (global_step * batch_size) % n;
  Dataset b;
  b.inputs = DenseMatrix(batch_size, data.inputs.cols());
  b.targets = DenseMatrix(batch_size, data.targets.cols());
  for (std::size_t r = 0; r < batch_size; ++r) {
    const std::size_t src = (start + r) % n;
    for (std::size_t j = 0; j < data.inputs.cols(); ++j)
      b.inputs(r, j) = data.inputs(src, j);
    for (std::size_t j = 0; j < data.targets.cols(); ++j)
      b.targets(r, j) = data.targets(src, j);
  }
  return b;
}

namespace detail {

struct StepEval {
  double loss = 0.0;
  ForwardCache cache;
  DenseMatrix dy;
};

inline StepEval forward_backward_loss(const ToyModel& model, const Dataset& batch) {
  StepEval ev;
  const DenseMatrix y = forward_model(model, batch.inputs, &ev.cache);
  ev.dy = DenseMatrix(y.rows(), y.cols());
  const double inv = 1.0 / static_cast<double>(y.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y.data()[i] - batch.targets.data()[i];
    acc += 0.5 * e * e;
    ev.dy.data()[i] = e * inv;
  }
  ev.loss = acc * inv;
  return ev;
}

}  // namespace detail

// The fixed-length dense phase that plays the role of pretraining. Batches
// are indexed 0 .. steps-1; compression training continues the same stream.
inline void pretrain_dense(ToyModel& model, const Dataset& train, double alpha,
                           std::size_t batch_size,
                           std::size_t steps = kPretrainSteps) {
  for (std::size_t t = 0; t < steps; ++t) {
    const Dataset batch = batch_at(train, t, batch_size);
    detail::StepEval ev = detail::forward_backward_loss(model, batch);
    if (!std::isfinite(ev.loss)) {
      throw TrainingError("pretrain_dense: loss diverged at step " +
                          std::to_string(t), t);
    }
    const auto grads = backward_model(model, ev.cache, ev.dy);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      sgd_step(model.layers[l].weight, grads[l].dW, alpha);
      sgd_step(model.layers[l].bias, grads[l].dbias, alpha);
    }
  }
}

// Final retained fraction implied by the budget. The factors are a fixed
// cost, so the sparse pathway gets whatever the total budget leaves over;
// the dense baseline spends everything on live columns, and the prune-away
// ablation by definition ends at zero.
inline double derive_final_fraction(TrainMode mode,
                                    const CompressionBudget& budget,
                                    const ToyModel& dense_model) {
  switch (mode) {
    case TrainMode::kItp:
      return budget.total_ratio;
    case TrainMode::kLowrankFinetune:
      return 1.0;  // nothing sparse to prune
    case TrainMode::kLowrankPruneaway:
      return 0.0;
    case TrainMode::kLosparse:
      break;
  }
  double original = 0.0, uv = 0.0;
  for (const ModelLayer& layer : dense_model.layers) {
    const double d1 = static_cast<double>(layer.in_dim());
    const double d2 = static_cast<double>(layer.out_dim());
    original += d1 * d2;
    uv += static_cast<double>(rank_from_budget(
              layer.in_dim(), layer.out_dim(), budget.lowrank_ratio)) *
          (d1 + d2);
  }
  const double p = (budget.total_ratio * original - uv) / original;
  return std::min(1.0, std::max(0.0, p));
}

// Rebuild the warm-trained dense model in the representation a mode trains:
// factors plus sparse for losparse (rank from the low-rank share), factors
// sized from the whole budget for the low-rank-only ablations, a plain copy
// for the dense baseline.
inline ToyModel build_mode_model(const ToyModel& dense_model, TrainMode mode,
                                 const CompressionBudget& budget) {
  if (mode == TrainMode::kItp) {
    ToyModel m = dense_model;
    for (ModelLayer& layer : m.layers)
      layer.weight_live.assign(layer.out_dim(), 1);
    return m;
  }
  const double fraction = mode == TrainMode::kLosparse ? budget.lowrank_ratio
                                                       : budget.total_ratio;
  ToyModel m;
  for (const ModelLayer& layer : dense_model.layers) {
    if (layer.kind != LayerKind::kDense) {
      throw ConfigError("build_mode_model: expected a dense source model");
    }
    ModelLayer out;
    out.kind = LayerKind::kFactorized;
    const std::size_t r =
        rank_from_budget(layer.in_dim(), layer.out_dim(), fraction);
    out.factors = init_from_pretrained(layer.weight, r);
    out.bias = layer.bias;
    if (mode == TrainMode::kLowrankFinetune) {
      // The sparse residual is dropped outright; only the factors remain.
      out.factors.S = DenseMatrix(layer.in_dim(), layer.out_dim());
      out.factors.live_columns.assign(layer.out_dim(), 0);
    }
    m.layers.push_back(std::move(out));
  }
  return m;
}

struct TrainResult {
  ToyModel model;
  MetricsTrace trace;
  // Final-step column scores of each tracked matrix, by layer index.
  std::vector<std::pair<std::size_t, std::vector<double>>> final_scores;
};

// Run the compression phase for T steps on a warm-started model. Batches
// continue the pretraining stream (global indices kPretrainSteps onward) so
// every mode under the same seed sees identical data.
inline TrainResult train_compress(ToyModel model, const Dataset& train,
                                  const TrainConfig& config) {
  validate_train_config(config);
  const bool track_sparse = config.mode == TrainMode::kLosparse ||
                            config.mode == TrainMode::kLowrankPruneaway;
  const bool track_dense = config.mode == TrainMode::kItp;

  std::vector<std::size_t> tracked;  // layer indices with scored columns
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const bool factorized = model.layers[l].kind == LayerKind::kFactorized;
    if ((track_sparse && factorized) || (track_dense && !factorized))
      tracked.push_back(l);
  }
  std::vector<ImportanceState> states(tracked.size());

  MetricsTrace trace;
  trace.rows.reserve(config.schedule.total_steps);

  for (std::size_t t = 1; t <= config.schedule.total_steps; ++t) {
    const Dataset batch =
        batch_at(train, kPretrainSteps + t - 1, config.batch_size);
    detail::StepEval ev = detail::forward_backward_loss(model, batch);
    if (!std::isfinite(ev.loss)) {
      throw TrainingError("train_compress: loss diverged at step " +
                          std::to_string(t), t);
    }
    const auto grads = backward_model(model, ev.cache, ev.dy);
    const double p_t = remaining_fraction(config.schedule, t);

    // Sensitivity of the tracked matrices at their pre-update values.
    std::vector<std::vector<double>> scores(tracked.size());
    for (std::size_t i = 0; i < tracked.size(); ++i) {
      const std::size_t l = tracked[i];
      const ModelLayer& layer = model.layers[l];
      const DenseMatrix& w = layer.kind == LayerKind::kFactorized
                                 ? layer.factors.S : layer.weight;
      const DenseMatrix& g = layer.kind == LayerKind::kFactorized
                                 ? grads[l].fg.dS : grads[l].dW;
      ema_update(states[i], instant_sensitivity(w, g), config.beta);
      scores[i] = neuron_scores(states[i].smoothed);
    }

    // Parameter updates.
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      ModelLayer& layer = model.layers[l];
      if (layer.kind == LayerKind::kDense) {
        sgd_step(layer.weight, grads[l].dW, config.alpha);
      } else {
        sgd_step(layer.factors.U, grads[l].fg.dU, config.alpha);
        sgd_step(layer.factors.V, grads[l].fg.dV, config.alpha);
        if (config.mode != TrainMode::kLowrankFinetune)
          sgd_step(layer.factors.S, grads[l].fg.dS, config.alpha);
      }
      sgd_step(layer.bias, grads[l].dbias, config.alpha);
    }

    // Global prune of the updated matrices against the pre-update scores.
    if (!tracked.empty()) {
      RetainedSet retained;
      if (p_t > 0.0) {
        std::vector<NeuronRef> neurons;
        for (std::size_t i = 0; i < tracked.size(); ++i)
          for (std::size_t j = 0; j < scores[i].size(); ++j)
            neurons.push_back(NeuronRef{tracked[i], j, scores[i][j]});
        retained = select_retained(neurons, p_t);
      }
      for (std::size_t i = 0; i < tracked.size(); ++i) {
        ModelLayer& layer = model.layers[tracked[i]];
        if (layer.kind == LayerKind::kFactorized) {
          enforce_retained_columns(layer.factors.S, layer.factors.live_columns,
                                   retained, tracked[i]);
        } else {
          enforce_retained_columns(layer.weight, layer.weight_live, retained,
                                   tracked[i]);
        }
      }
    }

    MetricsRow row;
    row.step = t;
    row.loss = ev.loss;
    row.p_t = p_t;
    row.remaining_ratio = model_remaining_ratio(model);
    row.live_cols = live_column_counts(model);
    trace.rows.push_back(std::move(row));
  }
  TrainResult result{std::move(model), std::move(trace), {}};
  for (std::size_t i = 0; i < tracked.size(); ++i) {
    if (states[i].step_count == 0) continue;
    result.final_scores.emplace_back(tracked[i],
                                     neuron_scores(states[i].smoothed));
  }
  return result;
}

}  // namespace losparse
