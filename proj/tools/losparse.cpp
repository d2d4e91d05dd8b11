// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. All real work lives in the library; this file
// only parses arguments and maps exceptions onto exit codes:
//   0 success, 2 config error, 3 numeric or training failure, 4 I/O or
//   format error, 1 anything else.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "losparse/commands.hpp"
#include "losparse/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"low-rank plus column-sparse model compression toolkit"};
  app.require_subcommand(1);

  std::string input, output, config, checkpoint;
  double total_ratio = 0.0, lowrank_ratio = 0.0;
  std::vector<std::string> run_dirs;

  CLI::App* decompose = app.add_subcommand(
      "decompose", "factorize every dense matrix of a checkpoint");
  decompose->add_option("--input", input, "input checkpoint directory")
      ->required();
  decompose->add_option("--output", output, "output checkpoint directory")
      ->required();
  decompose->add_option("--total-ratio", total_ratio, "total parameter budget")
      ->required();
  decompose
      ->add_option("--lowrank-ratio", lowrank_ratio,
                   "budget share spent on the factors")
      ->required();

  CLI::App* spectrum = app.add_subcommand(
      "spectrum", "singular-value spectrum of each stored matrix");
  spectrum->add_option("--input", input, "input checkpoint directory")
      ->required();
  spectrum->add_option("--output", output, "CSV file to write")->required();

  CLI::App* train =
      app.add_subcommand("train", "run one compression training experiment");
  train->add_option("--config", config, "run configuration file")->required();
  train->add_option("--output", output, "directory for run artifacts")
      ->required();

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "validation loss of a checkpoint on the config's task");
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint directory")
      ->required();
  evaluate->add_option("--config", config, "run configuration file")
      ->required();

  CLI::App* report = app.add_subcommand(
      "report", "merge run summaries into one comparison table");
  report->add_option("dirs", run_dirs, "run directories")->required();
  report->add_option("--output", output, "CSV file to write")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*decompose) {
      losparse::cmd_decompose(input, output, total_ratio, lowrank_ratio,
                              std::cout);
    } else if (*spectrum) {
      losparse::cmd_spectrum(input, output);
    } else if (*train) {
      losparse::cmd_train(config, output, std::cout);
    } else if (*evaluate) {
      losparse::cmd_evaluate(checkpoint, config, std::cout);
    } else if (*report) {
      std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
      losparse::cmd_report(dirs, output);
    }
  } catch (const losparse::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const losparse::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const losparse::TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const losparse::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const losparse::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
