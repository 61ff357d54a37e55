#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fairenc/datamodel.hpp"
#include "fairenc/encoders.hpp"
#include "fairenc/metrics.hpp"
#include "fairenc/objective.hpp"
#include "fairenc/param_store.hpp"
#include "fairenc/schema.hpp"
#include "json.hpp"

namespace fairenc {

struct OptimizerConfig {
  double weight_decay = 6e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;

  bool operator==(const OptimizerConfig&) const = default;
};

struct ProbeConfig {
  std::size_t epochs = 1000;
  double lr = 1e-4;
  std::size_t batch_size = 64;
  double threshold = 0.5;

  bool operator==(const ProbeConfig&) const = default;
};

struct RunConfig {
  double lambda_txt_txt = 0.01;
  double lambda_adv = 1.0;
  double lambda_mi = 1.0;
  double lambda_cmt = 0.25;
  double lambda_txt_rimg = 10.0;
  double p_txt1 = 0.5;
  std::size_t codebook_size = 64;
  std::size_t batch_size = 32;
  double lr_main = 1e-5;
  double lr_disc = 5e-5;
  std::size_t epochs = 30;
  OptimizerConfig optimizer;
  double tau = 0.07;
  std::uint64_t seed = 0;
  std::size_t notes_k = 5;

  // Dataset and schema files; relative paths resolve against the config file.
  std::string dataset;
  std::string schema;  // empty: race/gender default
  std::string out_dir = "runs/default";

  // Attributes entering L_MI and L_att_cls; empty = every schema attribute.
  std::vector<std::string> debias_attributes;

  EncoderConfig encoder;
  std::vector<std::size_t> discriminator_trunk = {256, 128, 64};
  double codebook_init_scale = 0.5;
  double validation_fraction = 0.1;
  bool stop_vq_assignment_grad = false;
  ProbeConfig probe;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // The output directory is left out of checkpoints and the hash, so runs
  // that differ only in where they write stay comparable.
  nlohmann::json to_json(bool include_out_dir = true) const;
  // Missing fields keep their defaults; unknown fields are rejected.
  static RunConfig from_json(const nlohmann::json& j);
  // Relative dataset/schema paths are resolved against the file's directory.
  static RunConfig load(const std::filesystem::path& path);
  // 16 hex digits identifying every field.
  std::string hash() const;

  ObjectiveConfig objective(const AttributeSchema& schema) const;
  std::vector<bool> attribute_mask(const AttributeSchema& schema) const;

  bool operator==(const RunConfig&) const = default;
};

// FAIRENC_OUT_DIR, when set, replaces the configured output directory.
std::filesystem::path resolve_out_dir(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamStore m;
  ParamStore v;
  std::size_t t = 0;

  static AdamState zeros_like(const ParamStore& params);
};

// Bias-corrected Adam with weight decay added to the gradient. Rejects a
// non-finite gradient (NumericalError naming the group) before touching any
// parameter.
void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state, const AdamConfig& cfg);

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  RunConfig config;
  AttributeSchema schema;
  ParamStore model;          // img.*, txt.*, codebook
  ParamStore discriminator;  // disc.*
  std::size_t step = 0;

  bool operator==(const Checkpoint&) const = default;
};

// JSON container; format described in the README.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Fresh parameters for every group, seeded from cfg.seed.
Checkpoint initialize(const RunConfig& cfg, const AttributeSchema& schema);

// ---------------------------------------------------------------------------
// Training

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::vector<std::pair<std::string, double>> values;
};

struct EpochRecord {
  std::size_t epoch = 0;
  FairnessReport validation;  // zero-shot on the validation split
  double seconds = 0.0;
};

struct TrainLog {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  Checkpoint checkpoint;  // last good state
  TrainLog log;
  bool aborted = false;
  std::string abort_reason;
};

struct TrainOptions {
  // When set, writes checkpoint.json, train_log.csv, epoch_reports.jsonl and
  // timing.csv here.
  std::optional<std::filesystem::path> out_dir;
  // Called after each epoch.
  std::function<void(const EpochRecord&)> on_epoch;
  // Epoch-level validation reports; off saves time in bulk experiments.
  bool evaluate_epochs = true;
};

// Training and validation parts of the dataset for this config.
std::pair<std::vector<Sample>, std::vector<Sample>> train_validation_split(const RunConfig& cfg,
                                                                            const std::vector<Sample>& data);

TrainResult train(const RunConfig& cfg, const std::vector<Sample>& train_data, const std::vector<Sample>& validation_data,
                  const AttributeSchema& schema, const TrainOptions& options = {});

// Loads dataset and schema named in the config, splits, trains.
TrainResult train_from_config(const RunConfig& cfg, const TrainOptions& options = {});

// Text-side tensors of one batch. Pairs are drawn with `rng`.
BatchInputs assemble_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                           std::size_t vocab_dim, double p_txt1, Rng& rng);

std::string train_log_csv(const TrainLog& log);

// ---------------------------------------------------------------------------
// Evaluation

// Softmax over labels of cos(f_img, f_class)/tau; the positive-label probability.
std::vector<double> zero_shot_scores(const Matrix& image_embeddings, const Matrix& class_embeddings, double tau);

// class_notes[label]; exactly two labels.
std::vector<double> zero_shot_predict(const ParamStore& model, const Matrix& image_features,
                                      const std::vector<std::string>& class_notes, std::size_t vocab_dim, double tau);

PredictionSet zero_shot_evaluate(const Checkpoint& ckpt, const std::vector<Sample>& samples,
                                 const std::vector<std::string>& class_notes, double threshold = 0.5);

// Logistic regression on fixed features, trained by mini-batch Adam on binary
// cross-entropy.
struct LinearClassifier {
  std::vector<double> w;
  double b = 0.0;

  std::vector<double> predict(const Matrix& x) const;
};
LinearClassifier fit_logistic(const Matrix& x, const std::vector<int>& labels, const ProbeConfig& cfg,
                              std::uint64_t seed);

// Trains on frozen image embeddings of train_data, scores eval_data.
PredictionSet linear_probe(const ParamStore& model, const std::vector<Sample>& train_data,
                           const std::vector<Sample>& eval_data, const ProbeConfig& cfg, std::uint64_t seed);

// Multinomial logistic regression for one categorical target.
struct SoftmaxClassifier {
  Matrix w;  // D x K
  std::vector<double> b;

  std::vector<std::size_t> predict(const Matrix& x) const;
};
SoftmaxClassifier fit_softmax(const Matrix& x, const std::vector<std::size_t>& targets, std::size_t classes,
                              const ProbeConfig& cfg, std::uint64_t seed);

struct AttributeProbeResult {
  std::vector<double> accuracy;  // per attribute
  std::vector<double> chance;    // majority-group rate on the eval data
  double mean_accuracy = 0.0;
  double mean_chance = 0.0;
};

// Fresh softmax probes predicting each sensitive attribute from frozen image embeddings.
AttributeProbeResult attribute_probe(const ParamStore& model, const std::vector<Sample>& train_data,
                                     const std::vector<Sample>& eval_data, const AttributeSchema& schema,
                                     const ProbeConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoint evaluation as run by the command line

enum class Protocol { zero_shot, probe };

struct EvalOutput {
  PredictionSet predictions;
  FairnessReport report;
};

// Zero-shot scores the validation split (or every sample); the probe trains on
// the training split and scores the validation split.
EvalOutput evaluate_checkpoint(const Checkpoint& ckpt, const std::vector<Sample>& data, Protocol protocol,
                               bool whole_dataset = false);

// <dir>/report.json, report.csv, predictions.json
void write_eval_files(const std::filesystem::path& dir, const EvalOutput& out);

}  // namespace fairenc
