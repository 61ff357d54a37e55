#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fairenc/datamodel.hpp"
#include "fairenc/runner.hpp"

namespace fairenc::check {

struct CriterionResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// "PASS  <name>  (<seconds> s)  <detail>"
std::string format_result(const CriterionResult& r);

CriterionResult mi_oracle_equivalence(std::size_t cases = 1000, std::uint64_t seed = 101);
CriterionResult auc_oracle_equivalence(std::size_t cases = 1000, std::uint64_t seed = 202);
CriterionResult gradient_suite(std::size_t coordinates = 200, std::uint64_t seed = 303);
CriterionResult analytic_fixtures();
CriterionResult metric_invariants(std::size_t cases = 500, std::uint64_t seed = 404);
CriterionResult sampler_frequencies(std::size_t draws = 10000, std::uint64_t seed = 505);
// Trains and evaluates the same short run twice under `scratch` and compares the files byte for byte.
CriterionResult determinism(const std::filesystem::path& scratch);

// Baseline (lambda_MI = lambda_adv = lambda_txt_txt = 0) against the full
// objective on the synthetic set with race-dependent label rates.
struct DemoOptions {
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::size_t epochs = 30;
  std::size_t n_samples = 4000;
  // Further draws from the same generator stream, used only for probe evaluation.
  std::size_t held_out = 1000;
  double bias_strength = 2.0;
  std::vector<double> race_positive_rate = {0.3, 0.5, 0.7};
  std::uint64_t data_seed = 0;
  double lr_main = 1e-4;
  double lr_disc = 5e-4;
  ProbeConfig probe;
  std::ostream* progress = nullptr;
};

SyntheticSpec demo_synthetic_spec(const DemoOptions& opt);
RunConfig demo_run_config(const DemoOptions& opt, std::uint64_t seed, bool full_objective);

struct DemoArm {
  double attribute_accuracy = 0.0;  // mean over attributes
  double chance = 0.0;
  double dpd = 0.0;  // linear probe, mean over attributes
  double deodds = 0.0;
  double auc = 0.0;
};

struct DemoSeed {
  std::uint64_t seed = 0;
  DemoArm baseline;
  DemoArm full;
};

struct DemoOutcome {
  std::vector<DemoSeed> seeds;
  double mean_shift_toward_chance = 0.0;  // points, positive = closer to chance
  std::size_t dpd_decreases = 0;
  double mean_auc_gap = 0.0;  // |full - baseline| in points
  double seconds = 0.0;
};

DemoOutcome run_debiasing_demo(const DemoOptions& opt);
CriterionResult debiasing_demonstration(const DemoOptions& opt = {});

// Every criterion in order; the training-based ones only when asked.
std::vector<CriterionResult> run_suite(bool include_training, const std::filesystem::path& scratch,
                                       std::ostream* out);

}  // namespace fairenc::check
