// Copyright 2026 The ppgpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: ppgpr <consensus|gpr-train|gpr-predict|privacy-audit>.
//
// Exit status: 0 success, 1 invalid configuration or input, 2 protocol
// failure, 3 privacy audit failure.

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "ppgpr/ppgpr.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
};

ppgpr::ExperimentConfig load(const Options& o) {
  ppgpr::ExperimentConfig cfg = ppgpr::load_config(o.config);
  if (o.seed) cfg.run.seed = *o.seed;
  if (o.output) cfg.run.output = *o.output;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving distributed Gaussian process regression"};
  app.require_subcommand(1);
  Options opt;
  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", opt.config, "experiment file (INI)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("-s,--seed", opt.seed, "override [run] seed");
    sub->add_option("-o,--output", opt.output, "override [run] output directory");
    return sub;
  };
  CLI::App* consensus = add("consensus", "secure average consensus, per-round errors");
  CLI::App* train = add("gpr-train", "distributed hyperparameter optimisation");
  CLI::App* predict = add("gpr-predict", "secure prediction fusion and RMSE");
  CLI::App* audit = add("privacy-audit", "real vs simulated coalition views");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ppgpr::kExitOk : ppgpr::kExitValidation;
  }

  try {
    const ppgpr::ExperimentConfig cfg = load(opt);
    if (consensus->parsed()) ppgpr::run_consensus_experiment(cfg, std::cout);
    if (train->parsed()) ppgpr::run_train_experiment(cfg, std::cout);
    if (predict->parsed()) ppgpr::run_predict_experiment(cfg, std::cout);
    if (audit->parsed()) {
      if (!ppgpr::run_audit_experiment(cfg, std::cout).pass()) {
        return ppgpr::kExitAuditFailed;
      }
    }
  } catch (const ppgpr::ModulusTooSmall& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ppgpr::kExitValidation;
  } catch (const ppgpr::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return ppgpr::kExitProtocol;
  } catch (const ppgpr::FactorizationError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return ppgpr::kExitProtocol;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ppgpr::kExitValidation;
  } catch (const std::domain_error& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return ppgpr::kExitProtocol;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ppgpr::kExitProtocol;
  }
  return ppgpr::kExitOk;
}
