// SPDX-License-Identifier: Apache-2.0
#pragma once

//
// The five user-facing commands. Each one is a plain function over streams
// and paths so tests can drive it without a process boundary; the binary in
// tools/ is a thin argument parser around these.
//

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "losparse/checkpoint.hpp"
#include "losparse/csv.hpp"
#include "losparse/errors.hpp"
#include "losparse/factorized.hpp"
#include "losparse/importance.hpp"
#include "losparse/matrix.hpp"
#include "losparse/model.hpp"
#include "losparse/run_config.hpp"
#include "losparse/svd.hpp"
#include "losparse/task.hpp"
#include "losparse/train.hpp"

namespace losparse {

// Replace every dense matrix in the input checkpoint by a rank-budgeted
// factor pair plus the exact sparse residual, reporting the rank and the
// low-rank-only reconstruction error per matrix.
inline void cmd_decompose(const std::filesystem::path& input,
                          const std::filesystem::path& output,
                          double total_ratio, double lowrank_ratio,
                          std::ostream& out) {
  if (!(total_ratio > 0.0) || total_ratio > 1.0) {
    throw ConfigError("decompose: total-ratio must lie in (0, 1]");
  }
  if (!(lowrank_ratio > 0.0) || lowrank_ratio > 2.0) {
    throw ConfigError("decompose: lowrank-ratio must lie in (0, 2]");
  }
  const ToyModel dense = load_checkpoint(input);
  ToyModel factorized;
  for (std::size_t l = 0; l < dense.layers.size(); ++l) {
    const ModelLayer& layer = dense.layers[l];
    if (layer.kind != LayerKind::kDense) {
      throw ConfigError("decompose: layer" + std::to_string(l) +
                        " is already factorized");
    }
    const std::size_t rank =
        rank_from_budget(layer.in_dim(), layer.out_dim(), lowrank_ratio);
    ModelLayer f;
    f.kind = LayerKind::kFactorized;
    f.factors = init_from_pretrained(layer.weight, rank);
    f.bias = layer.bias;
    const double residual =
        frobenius_norm(subtract(layer.weight, matmul(f.factors.U, f.factors.V)));
    out << "layer" << l << ".weight rank " << rank << " residual "
        << format_double(residual) << "\n";
    factorized.layers.push_back(std::move(f));
  }
  save_checkpoint(factorized, output);
}

// Singular-value spectrum of each layer's effective weight matrix, written
// as matrix_name,index,sigma rows in descending sigma order.
inline void cmd_spectrum(const std::filesystem::path& input,
                         const std::filesystem::path& output) {
  const ToyModel model = load_checkpoint(input);
  std::ostringstream csv;
  csv << "matrix_name,index,sigma\n";
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const ModelLayer& layer = model.layers[l];
    const bool dense = layer.kind == LayerKind::kDense;
    const DenseMatrix w = dense ? layer.weight : reconstruct(layer.factors);
    const std::string name =
        "layer" + std::to_string(l) + (dense ? ".weight" : ".reconstruction");
    const SvdResult dec = svd(w);
    for (std::size_t i = 0; i < dec.singular_values.size(); ++i) {
      csv << name << ',' << i << ','
          << format_double(dec.singular_values[i]) << "\n";
    }
  }
  detail::write_file_atomic(output, csv.str());
}

inline constexpr std::size_t kHistogramBins = 16;

inline const char* kSummaryHeader =
    "mode,total_ratio,lowrank_ratio,steps,final_train_loss,final_p_t,"
    "final_remaining_ratio,val_loss";

// Full pipeline for one run: regenerate the task, warm-train dense, switch
// to the mode's representation, run the compression phase, and write
// metrics.csv, summary.csv, the final checkpoint, and a final-step
// importance histogram per tracked layer.
inline void cmd_train(const std::filesystem::path& config_path,
                      const std::filesystem::path& output_dir,
                      std::ostream& out) {
  const RunConfig cfg = load_run_config(config_path);
  const GeneratedTask g =
      generate_task(cfg.seed, cfg.dims.front(), cfg.dims.back(),
                    cfg.planted_rank, cfg.planted_cols, cfg.noise_std,
                    cfg.n_train, cfg.n_val);
  Rng rng(cfg.seed);
  ToyModel dense = random_dense_model(cfg.dims, rng);
  pretrain_dense(dense, g.train, cfg.alpha, cfg.batch_size);

  const TrainConfig tcfg = train_config_from(cfg, dense);
  const TrainResult res = train_compress(
      build_mode_model(dense, cfg.mode, cfg.budget), g.train, tcfg);

  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) {
    throw IoError("cannot create " + output_dir.string() + ": " + ec.message());
  }

  std::ostringstream metrics;
  write_metrics_csv(res.trace, metrics);
  detail::write_file_atomic(output_dir / "metrics.csv", metrics.str());

  save_checkpoint(res.model, output_dir / "checkpoint");

  const double val_loss = evaluate(res.model, g.val);
  const MetricsRow& last = res.trace.rows.back();
  std::ostringstream summary;
  summary << kSummaryHeader << "\n"
          << mode_name(cfg.mode) << ',' << format_double(cfg.budget.total_ratio)
          << ',' << format_double(cfg.budget.lowrank_ratio) << ','
          << cfg.total_steps << ',' << format_double(last.loss) << ','
          << format_double(last.p_t) << ','
          << format_double(last.remaining_ratio) << ','
          << format_double(val_loss) << "\n";
  detail::write_file_atomic(output_dir / "summary.csv", summary.str());

  for (const auto& [layer_index, scores] : res.final_scores) {
    std::ostringstream hist;
    hist << "bin_low,bin_high,count\n";
    for (const HistogramBin& bin : export_histogram(scores, kHistogramBins)) {
      hist << format_double(bin.low) << ',' << format_double(bin.high) << ','
           << bin.count << "\n";
    }
    detail::write_file_atomic(
        output_dir / ("importance_layer" + std::to_string(layer_index) + ".csv"),
        hist.str());
  }

  out << "mode " << mode_name(cfg.mode) << " steps " << cfg.total_steps
      << " final_train_loss " << format_double(last.loss) << " val_loss "
      << format_double(val_loss) << "\n";
}

// Validation loss of a stored model on the config's task, printed with six
// decimal places.
inline void cmd_evaluate(const std::filesystem::path& checkpoint_dir,
                         const std::filesystem::path& config_path,
                         std::ostream& out) {
  const RunConfig cfg = load_run_config(config_path);
  const ToyModel model = load_checkpoint(checkpoint_dir);
  if (model.d_in() != cfg.dims.front() || model.d_out() != cfg.dims.back()) {
    throw ShapeError("evaluate: checkpoint is " + std::to_string(model.d_in()) +
                     " -> " + std::to_string(model.d_out()) +
                     " but the config task is " +
                     std::to_string(cfg.dims.front()) + " -> " +
                     std::to_string(cfg.dims.back()));
  }
  const GeneratedTask g =
      generate_task(cfg.seed, cfg.dims.front(), cfg.dims.back(),
                    cfg.planted_rank, cfg.planted_cols, cfg.noise_std,
                    cfg.n_train, cfg.n_val);
  char line[64];
  std::snprintf(line, sizeof line, "%.6f\n", evaluate(model, g.val));
  out << line;
}

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace detail

// Merge the summary rows of several run directories into one table sorted
// by (total_ratio, mode). Values are copied verbatim from the summaries.
inline void cmd_report(const std::vector<std::filesystem::path>& run_dirs,
                       const std::filesystem::path& output) {
  if (run_dirs.empty()) throw EmptyInputError("report: no run directories");

  struct Row {
    double ratio_key;
    std::string mode, total_ratio, val_loss, train_loss, remaining;
  };
  std::vector<Row> rows;
  for (const std::filesystem::path& dir : run_dirs) {
    const std::filesystem::path path = dir / "summary.csv";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kSummaryHeader) {
      throw FormatError(path.string() + ": unexpected summary header");
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const std::vector<std::string> f = detail::split_csv_row(line);
      if (f.size() != 8) {
        throw FormatError(path.string() + ": summary row needs 8 fields");
      }
      Row r;
      try {
        r.ratio_key = std::stod(f[1]);
      } catch (...) {
        throw FormatError(path.string() + ": total_ratio is not a number");
      }
      r.mode = f[0];
      r.total_ratio = f[1];
      r.train_loss = f[4];
      r.remaining = f[6];
      r.val_loss = f[7];
      rows.push_back(std::move(r));
    }
  }

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.ratio_key != b.ratio_key) return a.ratio_key < b.ratio_key;
    return a.mode < b.mode;
  });

  std::ostringstream csv;
  csv << "total_ratio,mode,val_loss,final_train_loss,final_remaining_ratio\n";
  for (const Row& r : rows) {
    csv << r.total_ratio << ',' << r.mode << ',' << r.val_loss << ','
        << r.train_loss << ',' << r.remaining << "\n";
  }
  detail::write_file_atomic(output, csv.str());
}

}  // namespace losparse
