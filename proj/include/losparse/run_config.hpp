// SPDX-License-Identifier: Apache-2.0
#pragma once

//
// Run configuration: one JSON document describing the task, the budget, the
// schedule shape, the optimizer, and the mode. Unknown keys anywhere are a
// hard error so a typo cannot silently fall back to a default.
//

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "losparse/errors.hpp"
#include "losparse/factorized.hpp"
#include "losparse/model.hpp"
#include "losparse/schedule.hpp"
#include "losparse/train.hpp"

namespace losparse {

struct RunConfig {
  // task
  std::uint64_t seed = 0;
  std::vector<std::size_t> dims;  // layer interface widths, >= 2 entries
  std::size_t planted_rank = 0;
  std::size_t planted_cols = 0;
  double noise_std = 0.0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  // budget
  CompressionBudget budget;
  // schedule shape (the final fraction is derived from mode and budget)
  std::size_t total_steps = 0;
  std::size_t warmup_steps = 0;
  std::size_t final_steps = 0;
  // optim
  double alpha = 0.0;
  std::size_t batch_size = 0;
  double beta = 0.0;

  TrainMode mode = TrainMode::kLosparse;
  bool literal_schedule_formula = false;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj,
                                const std::string& where,
                                std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("config: unknown key " + where + key);
  }
}

template <typename T>
T config_field(const nlohmann::json& obj, const std::string& where,
               const std::string& key) {
  if (!obj.contains(key)) {
    throw ConfigError("config: missing key " + where + key);
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: key " + where + key + " has the wrong type");
  }
}

inline const nlohmann::json& config_section(const nlohmann::json& obj,
                                            const std::string& key) {
  if (!obj.contains(key) || !obj.at(key).is_object()) {
    throw ConfigError("config: missing section " + key);
  }
  return obj.at(key);
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config: document must be an object");
  detail::reject_unknown_keys(doc, "", {"task", "budget", "schedule", "optim",
                                        "mode", "literal_schedule_formula"});
  RunConfig c;

  const nlohmann::json& task = detail::config_section(doc, "task");
  detail::reject_unknown_keys(task, "task.",
                              {"seed", "dims", "planted_rank", "planted_cols",
                               "noise_std", "n_train", "n_val"});
  c.seed = detail::config_field<std::uint64_t>(task, "task.", "seed");
  c.dims = detail::config_field<std::vector<std::size_t>>(task, "task.", "dims");
  c.planted_rank = detail::config_field<std::size_t>(task, "task.", "planted_rank");
  c.planted_cols = detail::config_field<std::size_t>(task, "task.", "planted_cols");
  c.noise_std = detail::config_field<double>(task, "task.", "noise_std");
  c.n_train = detail::config_field<std::size_t>(task, "task.", "n_train");
  c.n_val = detail::config_field<std::size_t>(task, "task.", "n_val");
  if (c.dims.size() < 2) {
    throw ConfigError("config: task.dims needs at least two entries");
  }

  const nlohmann::json& budget = detail::config_section(doc, "budget");
  detail::reject_unknown_keys(budget, "budget.",
                              {"total_ratio", "lowrank_ratio"});
  c.budget.total_ratio =
      detail::config_field<double>(budget, "budget.", "total_ratio");
  c.budget.lowrank_ratio =
      detail::config_field<double>(budget, "budget.", "lowrank_ratio");

  const nlohmann::json& schedule = detail::config_section(doc, "schedule");
  detail::reject_unknown_keys(schedule, "schedule.",
                              {"total_steps", "warmup_steps", "final_steps"});
  c.total_steps =
      detail::config_field<std::size_t>(schedule, "schedule.", "total_steps");
  c.warmup_steps =
      detail::config_field<std::size_t>(schedule, "schedule.", "warmup_steps");
  c.final_steps =
      detail::config_field<std::size_t>(schedule, "schedule.", "final_steps");

  const nlohmann::json& optim = detail::config_section(doc, "optim");
  detail::reject_unknown_keys(optim, "optim.", {"alpha", "batch_size", "beta"});
  c.alpha = detail::config_field<double>(optim, "optim.", "alpha");
  c.batch_size = detail::config_field<std::size_t>(optim, "optim.", "batch_size");
  c.beta = detail::config_field<double>(optim, "optim.", "beta");

  c.mode = parse_mode(detail::config_field<std::string>(doc, "", "mode"));
  if (doc.contains("literal_schedule_formula")) {
    c.literal_schedule_formula =
        detail::config_field<bool>(doc, "", "literal_schedule_formula");
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " +
                      e.what());
  }
  return parse_run_config(doc);
}

// The training configuration implied by a run config and the warm model the
// compression phase starts from (the model fixes the budget arithmetic).
inline TrainConfig train_config_from(const RunConfig& c,
                                     const ToyModel& dense_model) {
  TrainConfig t;
  t.alpha = c.alpha;
  t.beta = c.beta;
  t.batch_size = c.batch_size;
  t.budget = c.budget;
  t.seed = c.seed;
  t.mode = c.mode;
  t.schedule = PruneSchedule{
      c.total_steps, c.warmup_steps, c.final_steps,
      derive_final_fraction(c.mode, c.budget, dense_model),
      c.literal_schedule_formula};
  validate_train_config(t);
  return t;
}

}  // namespace losparse
