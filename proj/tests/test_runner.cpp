#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fairenc/errors.hpp"
#include "fairenc/runner.hpp"
#include "test_util.hpp"

using namespace fairenc;
namespace fs = std::filesystem;

namespace {

const AttributeSchema& schema() {
  static const AttributeSchema s = AttributeSchema::two_attribute_default();
  return s;
}

std::vector<Sample> small_data(std::size_t n = 240, std::uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.n_samples = n;
  spec.seed = seed;
  return generate_synthetic(spec, schema());
}

RunConfig small_config() {
  RunConfig c;
  c.batch_size = 16;
  c.epochs = 1;
  c.lr_main = 1e-4;
  c.lr_disc = 5e-4;
  c.seed = 7;
  c.probe.epochs = 20;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fairenc_test_runner_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double value_of(const StepRecord& s, const std::string& name) {
  for (const auto& [n, v] : s.values) {
    if (n == name) return v;
  }
  ADD_FAILURE() << "missing " << name;
  return NAN;
}

}  // namespace

TEST(RunConfigTest, DefaultsValidateAndRoundTrip) {
  const RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.batch_size, 32u);
  EXPECT_EQ(c.codebook_size, 64u);
  EXPECT_EQ(c.lambda_txt_rimg, 10.0);
  EXPECT_EQ(RunConfig::from_json(c.to_json()), c);
  EXPECT_EQ(RunConfig::from_json(nlohmann::json::parse(c.to_json().dump())), c);
}

TEST(RunConfigTest, RejectsBadFields) {
  EXPECT_THROW(RunConfig::from_json({{"lambda_mi", -1.0}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json({{"batch_size", 1}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json({{"p_txt1", 1.5}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json({{"lr_main", 0.0}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json({{"no_such_field", 1}}), ConfigError);
  try {
    RunConfig::from_json({{"tau", -0.1}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("tau"), std::string::npos);
  }
}

TEST(RunConfigTest, HashIgnoresOutDirOnly) {
  RunConfig a, b;
  b.out_dir = "somewhere/else";
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  b.lambda_adv = 0.5;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(RunConfigTest, LoadResolvesRelativePaths) {
  const fs::path dir = scratch("load");
  std::ofstream(dir / "cfg.json") << R"({"dataset": "data/x.jsonl", "schema": "/abs/s.json"})";
  const RunConfig c = RunConfig::load(dir / "cfg.json");
  EXPECT_EQ(fs::path(c.dataset), (dir / "data/x.jsonl").lexically_normal());
  EXPECT_EQ(c.schema, "/abs/s.json");
}

TEST(RunConfigTest, DebiasAttributesBuildMask) {
  RunConfig c;
  EXPECT_EQ(c.attribute_mask(schema()), std::vector<bool>({true, true}));
  c.debias_attributes = {"gender"};
  EXPECT_EQ(c.attribute_mask(schema()), std::vector<bool>({false, true}));
  c.debias_attributes = {"height"};
  EXPECT_THROW(c.attribute_mask(schema()), ConfigError);
}

TEST(RunConfigTest, OutDirEnvironmentOverride) {
  RunConfig c;
  c.out_dir = "runs/x";
  ::unsetenv("FAIRENC_OUT_DIR");
  EXPECT_EQ(resolve_out_dir(c), fs::path("runs/x"));
  ::setenv("FAIRENC_OUT_DIR", "/tmp/elsewhere", 1);
  EXPECT_EQ(resolve_out_dir(c), fs::path("/tmp/elsewhere"));
  ::unsetenv("FAIRENC_OUT_DIR");
}

TEST(Adam, ZeroGradientWithoutDecayLeavesParams) {
  ParamStore p;
  Rng rng(1);
  p.add("w", fairenc::testing::random_matrix(rng, 3, 4));
  const ParamStore before = p;
  AdamState s = AdamState::zeros_like(p);
  adam_step(p, p.zeros_like(), s, AdamConfig{});
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.t, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore p;
  p.add("w", Matrix(1, 2, 1.0));
  ParamStore g = p.zeros_like();
  g.set("w", Matrix::from_rows({{0.5, -2.0}}));
  AdamState s = AdamState::zeros_like(p);
  adam_step(p, g, s, AdamConfig{0.1, 0.0, 0.9, 0.999, 1e-8});
  // bias-corrected m/sqrt(v) = sign(g) on the first step
  EXPECT_NEAR(p.at("w")(0, 0), 0.9, 1e-7);
  EXPECT_NEAR(p.at("w")(0, 1), 1.1, 1e-7);
}

TEST(Adam, NonFiniteGradientCannotEnterStore) {
  ParamStore p;
  p.add("a", Matrix(1, 1, 1.0));
  p.add("b", Matrix(1, 1, 1.0));
  ParamStore g = p.zeros_like();
  try {
    g.set_coordinate("b", 0, NAN);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
  EXPECT_EQ(g, p.zeros_like());
}

TEST(Checkpoint, RoundTripGivesBitExactForward) {
  const fs::path dir = scratch("ckpt");
  const Checkpoint c = initialize(small_config(), schema());
  save_checkpoint(dir / "c.json", c);
  const Checkpoint d = load_checkpoint(dir / "c.json");
  EXPECT_EQ(c, d);
  Rng rng(2);
  const Matrix x = fairenc::testing::random_matrix(rng, 5, 32);
  EXPECT_EQ(encode_image(c.model, x).vectors, encode_image(d.model, x).vectors);
  std::ofstream(dir / "bad.json") << R"({"format": "other"})";
  EXPECT_THROW(load_checkpoint(dir / "bad.json"), ConfigError);
}

TEST(Checkpoint, InitializeIsSeeded) {
  RunConfig a = small_config(), b = small_config();
  EXPECT_EQ(initialize(a, schema()), initialize(b, schema()));
  b.seed = 8;
  EXPECT_NE(initialize(a, schema()).model, initialize(b, schema()).model);
}

TEST(Training, LoggedTotalRecombinesComponents) {
  const auto data = small_data();
  const auto [tr, va] = train_validation_split(small_config(), data);
  const TrainResult r = train(small_config(), tr, va, schema(), {.out_dir = {}, .on_epoch = {}, .evaluate_epochs = false});
  ASSERT_FALSE(r.aborted) << r.abort_reason;
  ASSERT_FALSE(r.log.steps.empty());
  const RunConfig c = small_config();
  std::size_t prev = 0;
  for (const StepRecord& s : r.log.steps) {
    EXPECT_GT(s.step, prev);
    prev = s.step;
    const double align = value_of(s, "L_txt_img") + c.lambda_txt_rimg * value_of(s, "L_txt_rimg");
    EXPECT_NEAR(value_of(s, "L_align"), align, 1e-12 * std::max(1.0, std::abs(align)));
    EXPECT_NEAR(value_of(s, "L_adv"), -value_of(s, "L_att_cls"), 1e-12);
    const double total = value_of(s, "L_align") + c.lambda_txt_txt * value_of(s, "L_txt_txt") + value_of(s, "L_VQ") +
                         c.lambda_mi * value_of(s, "L_MI") + c.lambda_adv * value_of(s, "L_adv");
    EXPECT_NEAR(value_of(s, "L_total"), total, 1e-12 * std::max(1.0, std::abs(total)));
  }
}

TEST(Training, WritesLogsWithHashOnEveryRow) {
  const fs::path dir = scratch("logs");
  const auto data = small_data();
  const auto [tr, va] = train_validation_split(small_config(), data);
  const TrainResult r = train(small_config(), tr, va, schema(), {.out_dir = dir, .on_epoch = {}, .evaluate_epochs = true});
  for (const char* f : {"checkpoint.json", "train_log.csv", "epoch_reports.jsonl", "timing.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::istringstream log(slurp(dir / "train_log.csv"));
  std::string line;
  std::getline(log, line);
  EXPECT_EQ(line, "config_hash,step,epoch,loss,value");
  std::size_t rows = 0;
  while (std::getline(log, line)) {
    ++rows;
    EXPECT_EQ(line.rfind(small_config().hash() + ",", 0), 0u) << line;
  }
  EXPECT_GT(rows, 0u);
  ASSERT_EQ(r.log.epochs.size(), 1u);
  const auto report = nlohmann::json::parse(slurp(dir / "epoch_reports.jsonl"));
  EXPECT_EQ(report.at("config_hash"), small_config().hash());
  EXPECT_EQ(load_checkpoint(dir / "checkpoint.json"), r.checkpoint);
}

TEST(Training, SameSeedGivesIdenticalLog) {
  const auto data = small_data();
  const auto [tr, va] = train_validation_split(small_config(), data);
  const TrainOptions o{.out_dir = {}, .on_epoch = {}, .evaluate_epochs = false};
  const TrainResult a = train(small_config(), tr, va, schema(), o);
  const TrainResult b = train(small_config(), tr, va, schema(), o);
  EXPECT_EQ(train_log_csv(a.log), train_log_csv(b.log));
  EXPECT_EQ(a.checkpoint, b.checkpoint);
}

TEST(Training, AblationLossDecreases) {
  RunConfig c = small_config();
  c.lambda_mi = c.lambda_adv = c.lambda_txt_txt = c.lambda_txt_rimg = 0.0;
  c.epochs = 5;
  const auto data = small_data(480);
  const auto [tr, va] = train_validation_split(c, data);
  const TrainResult r = train(c, tr, va, schema(), {.out_dir = {}, .on_epoch = {}, .evaluate_epochs = false});
  ASSERT_FALSE(r.aborted);
  std::vector<double> sum(c.epochs, 0.0), count(c.epochs, 0.0);
  for (const StepRecord& s : r.log.steps) {
    ASSERT_GE(s.epoch, 1u);
    sum[s.epoch - 1] += value_of(s, "L_total");
    count[s.epoch - 1] += 1.0;
  }
  EXPECT_LT(sum.back() / count.back(), sum.front() / count.front());
}

TEST(Training, DivergenceAbortsWithCheckpoint) {
  const fs::path dir = scratch("abort");
  RunConfig c = small_config();
  c.lr_main = 1e200;
  c.epochs = 3;
  const auto data = small_data();
  const auto [tr, va] = train_validation_split(c, data);
  const TrainResult r = train(c, tr, va, schema(), {.out_dir = dir, .on_epoch = {}, .evaluate_epochs = false});
  EXPECT_TRUE(r.aborted);
  EXPECT_FALSE(r.abort_reason.empty());
  ASSERT_TRUE(fs::exists(dir / "checkpoint.json"));
  const Checkpoint saved = load_checkpoint(dir / "checkpoint.json");
  for (const auto& name : saved.model.names()) EXPECT_TRUE(saved.model.at(name).all_finite());
}

TEST(Training, RejectsUndersizedOrMismatchedData) {
  const auto data = small_data(10);
  EXPECT_THROW(train(small_config(), data, {}, schema()), ConfigError);
  RunConfig c = small_config();
  c.notes_k = 3;
  EXPECT_THROW(train(c, small_data(), {}, schema()), ConfigError);
  EXPECT_THROW(train_from_config(RunConfig{}), ConfigError);
}

TEST(ZeroShot, ScoreExamples) {
  const Matrix img = Matrix::from_rows({{1, 0}, {0, 1}, {0.3, -0.2}});
  const Matrix same = Matrix::from_rows({{1, 1}, {1, 1}});
  for (double s : zero_shot_scores(img, same, 0.07)) EXPECT_EQ(s, 0.5);
  const Matrix axes = Matrix::from_rows({{0, 1}, {1, 0}});
  const auto s = zero_shot_scores(Matrix::from_rows({{1, 0}}), axes, 1.0);
  EXPECT_NEAR(s[0], std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-12);
  EXPECT_THROW(zero_shot_scores(img, Matrix::from_rows({{1, 0}}), 1.0), ConfigError);
}

TEST(ZeroShot, ScoresInUnitInterval) {
  const Checkpoint c = initialize(small_config(), schema());
  const auto data = small_data(64);
  const PredictionSet p = zero_shot_evaluate(c, data, TemplateBank::builtin().class_prompts);
  ASSERT_EQ(p.scores.size(), data.size());
  for (double s : p.scores) {
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
  }
}

TEST(Probe, SeparableFeaturesGiveHighAuc) {
  Rng rng(3);
  Matrix x(400, 4);
  std::vector<int> y(400);
  for (std::size_t i = 0; i < 400; ++i) {
    y[i] = static_cast<int>(i % 2);
    for (std::size_t d = 0; d < 4; ++d) x(i, d) = 0.3 * rng.normal();
    x(i, 0) += y[i] ? 1.0 : -1.0;
  }
  ProbeConfig cfg;
  cfg.epochs = 50;
  cfg.lr = 1e-2;
  const LinearClassifier clf = fit_logistic(x, y, cfg, 4);
  EXPECT_GT(*auc(clf.predict(x), y), 0.99);
  EXPECT_THROW(fit_logistic(x, std::vector<int>(400, 1), cfg, 4), ConfigError);
}

TEST(Probe, LeavesModelUntouchedAndIsSeeded) {
  const Checkpoint c = initialize(small_config(), schema());
  const ParamStore before = c.model;
  const auto data = small_data();
  const auto [tr, va] = train_validation_split(small_config(), data);
  ProbeConfig cfg;
  cfg.epochs = 5;
  const PredictionSet a = linear_probe(c.model, tr, va, cfg, 9);
  const PredictionSet b = linear_probe(c.model, tr, va, cfg, 9);
  EXPECT_EQ(c.model, before);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.scores.size(), va.size());
}

TEST(Probe, AttributeProbeReportsChance) {
  const Checkpoint c = initialize(small_config(), schema());
  const auto data = small_data();
  ProbeConfig cfg;
  cfg.epochs = 5;
  const AttributeProbeResult r = attribute_probe(c.model, data, data, schema(), cfg, 1);
  ASSERT_EQ(r.accuracy.size(), 2u);
  for (std::size_t m = 0; m < 2; ++m) {
    EXPECT_GE(r.accuracy[m], 0.0);
    EXPECT_LE(r.accuracy[m], 1.0);
    EXPECT_GT(r.chance[m], 1.0 / static_cast<double>(schema().group_count(m)) - 0.1);
  }
}

TEST(EvaluateCheckpoint, ProtocolsAndFiles) {
  const fs::path dir = scratch("eval");
  RunConfig cfg = small_config();
  cfg.probe.epochs = 5;
  Checkpoint c = initialize(cfg, schema());
  const auto data = small_data();
  const EvalOutput z = evaluate_checkpoint(c, data, Protocol::zero_shot);
  EXPECT_EQ(z.predictions.scores.size(), train_validation_split(cfg, data).second.size());
  EXPECT_EQ(evaluate_checkpoint(c, data, Protocol::zero_shot, true).predictions.scores.size(), data.size());
  EXPECT_THROW(evaluate_checkpoint(c, data, Protocol::probe, true), ConfigError);
  write_eval_files(dir, z);
  for (const char* f : {"report.json", "report.csv", "predictions.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(FairnessReport::from_json(nlohmann::json::parse(slurp(dir / "report.json"))), z.report);
}
