#include "fairenc/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "fairenc/errors.hpp"
#include "fairenc/fairdict.hpp"
#include "fairenc/losses.hpp"
#include "fairenc/notes.hpp"

namespace fairenc {

namespace {

constexpr std::uint64_t kInitStream = 10;
constexpr std::uint64_t kSplitStream = 11;
constexpr std::uint64_t kBatchStream = 12;
constexpr std::uint64_t kPairStream = 13;
constexpr std::uint64_t kProbeStream = 14;

constexpr const char* kCheckpointFormat = "fairenc-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void require(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw ConfigError("run config: " + field + " " + rule);
}

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

AdamConfig adam_from(double lr, const OptimizerConfig& o) {
  return AdamConfig{lr, o.weight_decay, o.beta1, o.beta2, o.eps};
}

// Adam settings for the probes: plain Adam, no weight decay.
AdamConfig probe_adam(const ProbeConfig& cfg) { return AdamConfig{cfg.lr, 0.0, 0.9, 0.999, 1e-8}; }

std::vector<std::vector<std::size_t>> probe_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch_size) {
    out.emplace_back(order.begin() + static_cast<long>(s),
                     order.begin() + static_cast<long>(std::min(n, s + batch_size)));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
  const std::pair<const char*, double> lambdas[] = {{"lambda_txt_txt", lambda_txt_txt},
                                                    {"lambda_adv", lambda_adv},
                                                    {"lambda_mi", lambda_mi},
                                                    {"lambda_cmt", lambda_cmt},
                                                    {"lambda_txt_rimg", lambda_txt_rimg}};
  for (const auto& [name, v] : lambdas) require(std::isfinite(v) && v >= 0.0, name, "must be >= 0");
  require(std::isfinite(lr_main) && lr_main > 0.0, "lr_main", "must be > 0");
  require(std::isfinite(lr_disc) && lr_disc > 0.0, "lr_disc", "must be > 0");
  require(batch_size >= 2, "batch_size", "must be >= 2");
  require(codebook_size >= 1, "codebook_size", "must be >= 1");
  require(p_txt1 >= 0.0 && p_txt1 <= 1.0, "p_txt1", "must lie in [0, 1]");
  require(std::isfinite(tau) && tau > 0.0, "tau", "must be > 0");
  require(notes_k >= 1, "notes_k", "must be >= 1");
  require(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0, "optimizer.beta1", "must lie in [0, 1)");
  require(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0, "optimizer.beta2", "must lie in [0, 1)");
  require(optimizer.eps > 0.0, "optimizer.eps", "must be > 0");
  require(optimizer.weight_decay >= 0.0, "optimizer.weight_decay", "must be >= 0");
  require(encoder.d_in >= 1 && encoder.embed_dim >= 1, "encoder", "dimensions must be >= 1");
  require(encoder.vocab_dim >= 16, "encoder.vocab_dim", "must be >= 16");
  require(!discriminator_trunk.empty(), "discriminator_trunk", "needs at least one layer");
  require(codebook_init_scale > 0.0, "codebook_init_scale", "must be > 0");
  require(validation_fraction >= 0.0 && validation_fraction < 1.0, "validation_fraction", "must lie in [0, 1)");
  require(probe.lr > 0.0, "probe.lr", "must be > 0");
  require(probe.batch_size >= 1, "probe.batch_size", "must be >= 1");
}

nlohmann::json RunConfig::to_json(bool include_out_dir) const {
  nlohmann::json j = {
      {"lambda_txt_txt", lambda_txt_txt},
      {"lambda_adv", lambda_adv},
      {"lambda_mi", lambda_mi},
      {"lambda_cmt", lambda_cmt},
      {"lambda_txt_rimg", lambda_txt_rimg},
      {"p_txt1", p_txt1},
      {"codebook_size", codebook_size},
      {"batch_size", batch_size},
      {"lr_main", lr_main},
      {"lr_disc", lr_disc},
      {"epochs", epochs},
      {"optimizer",
       {{"weight_decay", optimizer.weight_decay},
        {"beta1", optimizer.beta1},
        {"beta2", optimizer.beta2},
        {"eps", optimizer.eps}}},
      {"tau", tau},
      {"seed", seed},
      {"notes_k", notes_k},
      {"dataset", dataset},
      {"schema", schema},
      {"debias_attributes", debias_attributes},
      {"encoder",
       {{"d_in", encoder.d_in},
        {"vocab_dim", encoder.vocab_dim},
        {"hidden", encoder.hidden},
        {"embed_dim", encoder.embed_dim}}},
      {"discriminator_trunk", discriminator_trunk},
      {"codebook_init_scale", codebook_init_scale},
      {"validation_fraction", validation_fraction},
      {"stop_vq_assignment_grad", stop_vq_assignment_grad},
      {"probe",
       {{"epochs", probe.epochs}, {"lr", probe.lr}, {"batch_size", probe.batch_size}, {"threshold", probe.threshold}}},
  };
  if (include_out_dir) j["out_dir"] = out_dir;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config: expected a JSON object");
  static const std::set<std::string> known = {
      "lambda_txt_txt", "lambda_adv", "lambda_mi", "lambda_cmt", "lambda_txt_rimg", "p_txt1",
      "codebook_size", "batch_size", "lr_main", "lr_disc", "epochs", "optimizer", "tau", "seed",
      "notes_k", "dataset", "schema", "out_dir", "debias_attributes", "encoder", "discriminator_trunk",
      "codebook_init_scale", "validation_fraction", "stop_vq_assignment_grad", "probe"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("run config: unknown field '" + key + "'");
  }
  RunConfig c;
  try {
    c.lambda_txt_txt = j.value("lambda_txt_txt", c.lambda_txt_txt);
    c.lambda_adv = j.value("lambda_adv", c.lambda_adv);
    c.lambda_mi = j.value("lambda_mi", c.lambda_mi);
    c.lambda_cmt = j.value("lambda_cmt", c.lambda_cmt);
    c.lambda_txt_rimg = j.value("lambda_txt_rimg", c.lambda_txt_rimg);
    c.p_txt1 = j.value("p_txt1", c.p_txt1);
    c.codebook_size = j.value("codebook_size", c.codebook_size);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr_main = j.value("lr_main", c.lr_main);
    c.lr_disc = j.value("lr_disc", c.lr_disc);
    c.epochs = j.value("epochs", c.epochs);
    if (j.contains("optimizer")) {
      const auto& o = j["optimizer"];
      c.optimizer.weight_decay = o.value("weight_decay", c.optimizer.weight_decay);
      c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
      c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
      c.optimizer.eps = o.value("eps", c.optimizer.eps);
    }
    c.tau = j.value("tau", c.tau);
    c.seed = j.value("seed", c.seed);
    c.notes_k = j.value("notes_k", c.notes_k);
    c.dataset = j.value("dataset", c.dataset);
    c.schema = j.value("schema", c.schema);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.debias_attributes = j.value("debias_attributes", c.debias_attributes);
    if (j.contains("encoder")) {
      const auto& e = j["encoder"];
      c.encoder.d_in = e.value("d_in", c.encoder.d_in);
      c.encoder.vocab_dim = e.value("vocab_dim", c.encoder.vocab_dim);
      c.encoder.hidden = e.value("hidden", c.encoder.hidden);
      c.encoder.embed_dim = e.value("embed_dim", c.encoder.embed_dim);
    }
    c.discriminator_trunk = j.value("discriminator_trunk", c.discriminator_trunk);
    c.codebook_init_scale = j.value("codebook_init_scale", c.codebook_init_scale);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.stop_vq_assignment_grad = j.value("stop_vq_assignment_grad", c.stop_vq_assignment_grad);
    if (j.contains("probe")) {
      const auto& p = j["probe"];
      c.probe.epochs = p.value("epochs", c.probe.epochs);
      c.probe.lr = p.value("lr", c.probe.lr);
      c.probe.batch_size = p.value("batch_size", c.probe.batch_size);
      c.probe.threshold = p.value("threshold", c.probe.threshold);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  RunConfig c = from_json(read_json(path));
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.dataset);
  resolve(c.schema);
  return c;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json(false).dump())));
  return buf;
}

std::vector<bool> RunConfig::attribute_mask(const AttributeSchema& s) const {
  if (debias_attributes.empty()) return std::vector<bool>(s.size(), true);
  std::vector<bool> mask(s.size(), false);
  for (const auto& name : debias_attributes) {
    const auto m = s.attribute_index(name);
    if (!m) throw ConfigError("run config: debias_attributes names unknown attribute '" + name + "'");
    mask[*m] = true;
  }
  return mask;
}

ObjectiveConfig RunConfig::objective(const AttributeSchema& s) const {
  ObjectiveConfig o;
  o.contrastive.tau = tau;
  o.weights = LossWeights{lambda_txt_txt, lambda_mi, lambda_adv, lambda_txt_rimg};
  o.lambda_cmt = lambda_cmt;
  o.attribute_mask = attribute_mask(s);
  o.stop_vq_assignment_grad = stop_vq_assignment_grad;
  return o;
}

std::filesystem::path resolve_out_dir(const RunConfig& cfg) {
  if (const char* env = std::getenv("FAIRENC_OUT_DIR"); env && *env) return env;
  return cfg.out_dir;
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::zeros_like(const ParamStore& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state, const AdamConfig& cfg) {
  if (!params.same_layout(grads) || !params.same_layout(state.m)) {
    throw DimensionError("adam_step: parameters, gradients and state differ in layout");
  }
  for (const auto& name : grads.names()) {
    if (!grads.at(name).all_finite()) throw NumericalError("adam_step: non-finite gradient in group '" + name + "'");
  }
  const std::size_t t = state.t + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

  // Compute every group first so a failure leaves parameters and state untouched.
  std::vector<Matrix> new_p, new_m, new_v;
  for (const auto& name : params.names()) {
    Matrix p = params.at(name), m = state.m.at(name), v = state.v.at(name);
    const Matrix& g = grads.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + cfg.weight_decay * p[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      p[i] -= cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps);
    }
    if (!p.all_finite()) throw NumericalError("adam_step: update made group '" + name + "' non-finite");
    new_p.push_back(std::move(p));
    new_m.push_back(std::move(m));
    new_v.push_back(std::move(v));
  }
  const auto& names = params.names();
  for (std::size_t k = 0; k < names.size(); ++k) {
    params.set(names[k], std::move(new_p[k]));
    state.m.set(names[k], std::move(new_m[k]));
    state.v.set(names[k], std::move(new_v[k]));
  }
  state.t = t;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json groups = nlohmann::json::array();
  for (const ParamStore* store : {&ckpt.model, &ckpt.discriminator}) {
    for (const auto& name : store->names()) {
      const Matrix& m = store->at(name);
      groups.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"values", m.values()}});
    }
  }
  const Matrix& cb = ckpt.model.at(kCodebookGroup);
  nlohmann::json j = {{"format", kCheckpointFormat},
                      {"version", kCheckpointVersion},
                      {"seed", ckpt.config.seed},
                      {"step", ckpt.step},
                      {"config", ckpt.config.to_json(false)},
                      {"schema", ckpt.schema.to_json()},
                      {"codebook", {{"C", cb.rows()}, {"D", cb.cols()}, {"lambda_cmt", ckpt.config.lambda_cmt}}},
                      {"groups", groups}};
  write_text(path, j.dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const nlohmann::json j = read_json(path);
  Checkpoint c;
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw ConfigError(path.string() + ": not a checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ConfigError(path.string() + ": unsupported checkpoint version");
    }
    c.config = RunConfig::from_json(j.at("config"));
    c.schema = AttributeSchema::from_json(j.at("schema"));
    c.step = j.at("step").get<std::size_t>();
    const std::string disc_prefix = std::string(kDiscriminatorPrefix) + ".";
    for (const auto& g : j.at("groups")) {
      const auto name = g.at("name").get<std::string>();
      const auto shape = g.at("shape").get<std::vector<std::size_t>>();
      auto values = g.at("values").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] * shape[1] != values.size()) {
        throw DimensionError(path.string() + ": group '" + name + "' shape does not match its values");
      }
      Matrix m(shape[0], shape[1], std::move(values));
      (name.rfind(disc_prefix, 0) == 0 ? c.discriminator : c.model).add(name, std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!c.model.contains(kCodebookGroup)) throw ConfigError(path.string() + ": no codebook group");
  return c;
}

Checkpoint initialize(const RunConfig& cfg, const AttributeSchema& schema) {
  cfg.validate();
  Checkpoint c{cfg, schema, {}, {}, 0};
  Rng rng(mix_seed(cfg.seed, kInitStream));
  init_encoder_params(c.model, cfg.encoder, rng);
  Codebook cb = init_codebook(cfg.codebook_size, cfg.encoder.embed_dim, cfg.codebook_init_scale, cfg.lambda_cmt, rng);
  c.model.add(kCodebookGroup, std::move(cb.elements));
  std::vector<std::size_t> heads;
  for (std::size_t m = 0; m < schema.size(); ++m) heads.push_back(schema.group_count(m));
  DiscriminatorStack(cfg.encoder.embed_dim, cfg.discriminator_trunk, heads).init_params(c.discriminator, rng);
  return c;
}

// ---------------------------------------------------------------------------
// Training

std::pair<std::vector<Sample>, std::vector<Sample>> train_validation_split(const RunConfig& cfg,
                                                                            const std::vector<Sample>& data) {
  return split_samples(data, cfg.validation_fraction, mix_seed(cfg.seed, kSplitStream));
}

BatchInputs assemble_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                           std::size_t vocab_dim, double p_txt1, Rng& rng) {
  const std::size_t B = indices.size();
  if (B == 0) throw DimensionError("assemble_batch: empty batch");
  const std::size_t d_in = samples[indices[0]].image_features.size();
  BatchInputs in{Matrix(B, d_in), Matrix(B, vocab_dim), Matrix(B, vocab_dim), {}, {}};
  const SelectionConfig sel{p_txt1, 0};
  for (std::size_t r = 0; r < B; ++r) {
    const Sample& s = samples.at(indices[r]);
    if (s.image_features.size() != d_in) throw DimensionError("assemble_batch: ragged image features");
    std::copy(s.image_features.begin(), s.image_features.end(), in.image_features.row(r).begin());
    const TextPair pair = sample_text_pair(s.notes, sel, rng);
    const auto t1 = embed_tokens(s.notes.variant(pair.first), vocab_dim);
    const auto t2 = embed_tokens(s.notes.variant(pair.second), vocab_dim);
    std::copy(t1.begin(), t1.end(), in.text1_tokens.row(r).begin());
    std::copy(t2.begin(), t2.end(), in.text2_tokens.row(r).begin());
    in.ids.push_back(s.id);
    in.attributes.push_back(s.attributes);
  }
  return in;
}

std::string train_log_csv(const TrainLog& log) {
  std::ostringstream os;
  os << "config_hash,step,epoch,loss,value\n";
  for (const auto& s : log.steps) {
    for (const auto& [name, v] : s.values) {
      os << log.config_hash << ',' << s.step << ',' << s.epoch << ',' << name << ',' << fmt17(v) << '\n';
    }
  }
  return os.str();
}

TrainResult train(const RunConfig& cfg, const std::vector<Sample>& train_data,
                  const std::vector<Sample>& validation_data, const AttributeSchema& schema,
                  const TrainOptions& options) {
  cfg.validate();
  if (train_data.size() < cfg.batch_size) throw ConfigError("training split is smaller than one batch");
  for (const auto* part : {&train_data, &validation_data}) {
    for (const Sample& s : *part) {
      if (s.image_features.size() != cfg.encoder.d_in) {
        throw DimensionError("sample " + std::to_string(s.id) + ": image features do not match encoder.d_in");
      }
      if (s.notes.randomized.size() != cfg.notes_k) {
        throw ConfigError("sample " + std::to_string(s.id) + ": note variant count differs from notes_k");
      }
      schema.validate(s.attributes);
    }
  }

  TrainResult result;
  result.checkpoint = initialize(cfg, schema);
  Checkpoint& ck = result.checkpoint;
  TrainLog& log = result.log;
  log.config_hash = cfg.hash();
  log.seed = cfg.seed;

  const ObjectiveConfig ocfg = cfg.objective(schema);
  const AdamConfig main_adam = adam_from(cfg.lr_main, cfg.optimizer);
  const AdamConfig disc_adam = adam_from(cfg.lr_disc, cfg.optimizer);
  AdamState main_state = AdamState::zeros_like(ck.model);
  AdamState disc_state = AdamState::zeros_like(ck.discriminator);
  Rng pair_rng(mix_seed(cfg.seed, kPairStream));
  const std::uint64_t batch_seed = mix_seed(cfg.seed, kBatchStream);
  const auto& class_prompts = TemplateBank::builtin().class_prompts;

  std::ofstream log_out, epoch_out, timing_out;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    log_out.open(*options.out_dir / "train_log.csv", std::ios::binary | std::ios::trunc);
    epoch_out.open(*options.out_dir / "epoch_reports.jsonl", std::ios::binary | std::ios::trunc);
    timing_out.open(*options.out_dir / "timing.csv", std::ios::binary | std::ios::trunc);
    if (!log_out || !epoch_out || !timing_out) throw ConfigError("cannot write logs in " + options.out_dir->string());
    log_out << "config_hash,step,epoch,loss,value\n";
    timing_out << "config_hash,epoch,seconds\n";
  }
  auto finish = [&] {
    if (options.out_dir) save_checkpoint(*options.out_dir / "checkpoint.json", ck);
  };

  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const Batch& batch : make_batches(train_data, cfg.batch_size, mix_seed(batch_seed, epoch), true)) {
      const BatchInputs in = assemble_batch(train_data, batch.indices, cfg.encoder.vocab_dim, cfg.p_txt1, pair_rng);
      const ParamStore disc_before = ck.discriminator;
      const AdamState disc_state_before = disc_state;
      try {
        // Discriminator step on detached image embeddings.
        const Matrix f = encode_image(ck.model, in.image_features).vectors;
        const DiscriminatorEvaluation de = evaluate_discriminator(ck.discriminator, f, in.attributes,
                                                                  ocfg.attribute_mask);
        if (!std::isfinite(de.att_cls)) throw NumericalError("discriminator L_att_cls is not finite");
        adam_step(ck.discriminator, de.grad, disc_state, disc_adam);

        // Main step with the discriminators frozen.
        const LossBundle lb = evaluate_objective(ck.model, ck.discriminator, in, schema, ocfg);
        adam_step(ck.model, lb.model_grad, main_state, main_adam);

        ++step;
        StepRecord rec{step, epoch, lb.named()};
        for (std::size_t m = 0; m < schema.size(); ++m) {
          rec.values.emplace_back("L_MI[" + schema[m].name + "]", lb.mi_per_attribute[m]);
          rec.values.emplace_back("L_att_cls[" + schema[m].name + "]", lb.att_cls_per_attribute[m]);
        }
        rec.values.emplace_back("L_disc", de.att_cls);
        if (options.out_dir) {
          for (const auto& [name, v] : rec.values) {
            log_out << log.config_hash << ',' << step << ',' << epoch << ',' << name << ',' << fmt17(v) << '\n';
          }
        }
        log.steps.push_back(std::move(rec));
      } catch (const NumericalError& e) {
        ck.discriminator = disc_before;
        disc_state = disc_state_before;
        ck.step = step;
        result.aborted = true;
        result.abort_reason = "step " + std::to_string(step + 1) + ": " + e.what();
        finish();
        return result;
      }
    }
    ck.step = step;

    EpochRecord er;
    er.epoch = epoch;
    if (options.evaluate_epochs && !validation_data.empty()) {
      er.validation = build_report(zero_shot_evaluate(ck, validation_data, class_prompts, cfg.probe.threshold), schema);
    }
    er.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (options.out_dir) {
      nlohmann::json row = {{"config_hash", log.config_hash}, {"seed", cfg.seed}, {"epoch", epoch}, {"step", step}};
      if (options.evaluate_epochs && !validation_data.empty()) row["validation"] = er.validation.to_json();
      epoch_out << row.dump() << '\n';
      epoch_out.flush();
      log_out.flush();
      timing_out << log.config_hash << ',' << epoch << ',' << fmt17(er.seconds) << '\n';
    }
    if (options.on_epoch) options.on_epoch(er);
    log.epochs.push_back(std::move(er));
  }
  finish();
  return result;
}

TrainResult train_from_config(const RunConfig& cfg, const TrainOptions& options) {
  if (cfg.dataset.empty()) throw ConfigError("run config: dataset path is empty");
  const AttributeSchema schema =
      cfg.schema.empty() ? AttributeSchema::two_attribute_default() : AttributeSchema::load(cfg.schema);
  const auto data = load_dataset(cfg.dataset, schema);
  const auto [train_part, validation_part] = train_validation_split(cfg, data);
  return train(cfg, train_part, validation_part, schema, options);
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<double> zero_shot_scores(const Matrix& image_embeddings, const Matrix& class_embeddings, double tau) {
  if (class_embeddings.rows() != 2) throw ConfigError("zero-shot: need exactly one class note per label (2)");
  if (class_embeddings.cols() != image_embeddings.cols()) throw DimensionError("zero-shot: embedding dims differ");
  if (!(tau > 0.0)) throw ConfigError("zero-shot: tau must be > 0");
  auto unit = [](std::span<const double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    std::vector<double> out(v.begin(), v.end());
    if (n > 1e-12) {
      for (double& x : out) x /= n;
    }
    return out;
  };
  const auto c0 = unit(class_embeddings.row(0)), c1 = unit(class_embeddings.row(1));
  std::vector<double> scores;
  scores.reserve(image_embeddings.rows());
  for (std::size_t i = 0; i < image_embeddings.rows(); ++i) {
    const auto f = unit(image_embeddings.row(i));
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t d = 0; d < f.size(); ++d) {
      s0 += f[d] * c0[d];
      s1 += f[d] * c1[d];
    }
    // softmax over two logits = sigmoid of their difference
    scores.push_back(sigmoid((s1 - s0) / tau));
  }
  return scores;
}

std::vector<double> zero_shot_predict(const ParamStore& model, const Matrix& image_features,
                                      const std::vector<std::string>& class_notes, std::size_t vocab_dim,
                                      double tau) {
  if (class_notes.size() != 2) throw ConfigError("zero-shot: need exactly one class note per label (2)");
  Matrix tokens(2, vocab_dim);
  for (std::size_t c = 0; c < 2; ++c) {
    if (class_notes[c].empty()) throw ConfigError("zero-shot: class note for label " + std::to_string(c) + " is empty");
    const auto t = embed_tokens(class_notes[c], vocab_dim);
    std::copy(t.begin(), t.end(), tokens.row(c).begin());
  }
  const Matrix classes = encode_text(model, tokens, Provenance::text1).vectors;
  return zero_shot_scores(encode_image(model, image_features).vectors, classes, tau);
}

PredictionSet zero_shot_evaluate(const Checkpoint& ckpt, const std::vector<Sample>& samples,
                                 const std::vector<std::string>& class_notes, double threshold) {
  std::vector<int> labels;
  std::vector<GroupIndices> attrs;
  for (const Sample& s : samples) {
    labels.push_back(s.label);
    attrs.push_back(s.attributes);
  }
  auto scores = zero_shot_predict(ckpt.model, feature_matrix(samples), class_notes, ckpt.config.encoder.vocab_dim,
                                  ckpt.config.tau);
  return PredictionSet::from_scores(std::move(scores), std::move(labels), std::move(attrs), threshold);
}

std::vector<double> LinearClassifier::predict(const Matrix& x) const {
  if (x.cols() != w.size()) throw DimensionError("linear classifier: feature width");
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double z = b;
    for (std::size_t d = 0; d < w.size(); ++d) z += x(i, d) * w[d];
    out[i] = sigmoid(z);
  }
  return out;
}

LinearClassifier fit_logistic(const Matrix& x, const std::vector<int>& labels, const ProbeConfig& cfg,
                              std::uint64_t seed) {
  if (x.rows() != labels.size()) throw DimensionError("fit_logistic: features and labels differ in length");
  std::size_t pos = 0;
  for (int y : labels) pos += y == 1;
  if (pos == 0 || pos == labels.size()) throw ConfigError("linear probe: training split has a single class");
  const std::size_t D = x.cols();
  ParamStore params;
  params.add("w", Matrix(D, 1));
  params.add("b", Matrix(1, 1));
  AdamState state = AdamState::zeros_like(params);
  const AdamConfig adam = probe_adam(cfg);
  Rng rng(seed);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& idx : probe_batches(x.rows(), cfg.batch_size, rng)) {
      const Matrix& w = params.at("w");
      const double b = params.at("b")[0];
      Matrix gw(D, 1), gb(1, 1);
      const double inv = 1.0 / static_cast<double>(idx.size());
      for (std::size_t i : idx) {
        double z = b;
        for (std::size_t d = 0; d < D; ++d) z += x(i, d) * w[d];
        const double r = (sigmoid(z) - labels[i]) * inv;
        for (std::size_t d = 0; d < D; ++d) gw[d] += r * x(i, d);
        gb[0] += r;
      }
      ParamStore grads = params.zeros_like();
      grads.set("w", std::move(gw));
      grads.set("b", std::move(gb));
      adam_step(params, grads, state, adam);
    }
  }
  const auto& w = params.at("w").values();
  return LinearClassifier{{w.begin(), w.end()}, params.at("b")[0]};
}

PredictionSet linear_probe(const ParamStore& model, const std::vector<Sample>& train_data,
                           const std::vector<Sample>& eval_data, const ProbeConfig& cfg, std::uint64_t seed) {
  std::vector<int> train_labels;
  for (const Sample& s : train_data) train_labels.push_back(s.label);
  const Matrix train_f = encode_image(model, feature_matrix(train_data)).vectors;
  const LinearClassifier clf = fit_logistic(train_f, train_labels, cfg, seed);

  std::vector<int> labels;
  std::vector<GroupIndices> attrs;
  for (const Sample& s : eval_data) {
    labels.push_back(s.label);
    attrs.push_back(s.attributes);
  }
  auto scores = clf.predict(encode_image(model, feature_matrix(eval_data)).vectors);
  return PredictionSet::from_scores(std::move(scores), std::move(labels), std::move(attrs), cfg.threshold);
}

std::vector<std::size_t> SoftmaxClassifier::predict(const Matrix& x) const {
  if (x.cols() != w.rows()) throw DimensionError("softmax classifier: feature width");
  std::vector<std::size_t> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::size_t best = 0;
    double best_z = 0.0;
    for (std::size_t k = 0; k < w.cols(); ++k) {
      double z = b[k];
      for (std::size_t d = 0; d < w.rows(); ++d) z += x(i, d) * w(d, k);
      if (k == 0 || z > best_z) {
        best = k;
        best_z = z;
      }
    }
    out[i] = best;
  }
  return out;
}

SoftmaxClassifier fit_softmax(const Matrix& x, const std::vector<std::size_t>& targets, std::size_t classes,
                              const ProbeConfig& cfg, std::uint64_t seed) {
  if (x.rows() != targets.size()) throw DimensionError("fit_softmax: features and targets differ in length");
  if (classes < 2) throw ConfigError("fit_softmax: need at least two classes");
  const std::size_t D = x.cols();
  ParamStore params;
  params.add("w", Matrix(D, classes));
  params.add("b", Matrix(1, classes));
  AdamState state = AdamState::zeros_like(params);
  const AdamConfig adam = probe_adam(cfg);
  Rng rng(seed);
  std::vector<double> z(classes);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& idx : probe_batches(x.rows(), cfg.batch_size, rng)) {
      const Matrix& w = params.at("w");
      const Matrix& b = params.at("b");
      Matrix gw(D, classes), gb(1, classes);
      const double inv = 1.0 / static_cast<double>(idx.size());
      for (std::size_t i : idx) {
        if (targets[i] >= classes) throw DomainError("fit_softmax: target out of range");
        double zmax = 0.0;
        for (std::size_t k = 0; k < classes; ++k) {
          z[k] = b[k];
          for (std::size_t d = 0; d < D; ++d) z[k] += x(i, d) * w(d, k);
          zmax = k == 0 ? z[k] : std::max(zmax, z[k]);
        }
        double sum = 0.0;
        for (double& v : z) sum += (v = std::exp(v - zmax));
        for (std::size_t k = 0; k < classes; ++k) {
          const double r = (z[k] / sum - (targets[i] == k ? 1.0 : 0.0)) * inv;
          for (std::size_t d = 0; d < D; ++d) gw(d, k) += r * x(i, d);
          gb[k] += r;
        }
      }
      ParamStore grads = params.zeros_like();
      grads.set("w", std::move(gw));
      grads.set("b", std::move(gb));
      adam_step(params, grads, state, adam);
    }
  }
  const auto& b = params.at("b").values();
  return SoftmaxClassifier{params.at("w"), {b.begin(), b.end()}};
}

AttributeProbeResult attribute_probe(const ParamStore& model, const std::vector<Sample>& train_data,
                                     const std::vector<Sample>& eval_data, const AttributeSchema& schema,
                                     const ProbeConfig& cfg, std::uint64_t seed) {
  if (eval_data.empty()) throw ConfigError("attribute probe: empty evaluation data");
  const Matrix train_f = encode_image(model, feature_matrix(train_data)).vectors;
  const Matrix eval_f = encode_image(model, feature_matrix(eval_data)).vectors;
  AttributeProbeResult r;
  for (std::size_t m = 0; m < schema.size(); ++m) {
    std::vector<std::size_t> targets;
    for (const Sample& s : train_data) targets.push_back(s.attributes[m]);
    const SoftmaxClassifier clf = fit_softmax(train_f, targets, schema.group_count(m), cfg, mix_seed(seed, m));
    const auto pred = clf.predict(eval_f);
    std::vector<std::size_t> freq(schema.group_count(m), 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < eval_data.size(); ++i) {
      correct += pred[i] == eval_data[i].attributes[m];
      ++freq[eval_data[i].attributes[m]];
    }
    const auto n = static_cast<double>(eval_data.size());
    r.accuracy.push_back(static_cast<double>(correct) / n);
    r.chance.push_back(static_cast<double>(*std::max_element(freq.begin(), freq.end())) / n);
  }
  for (std::size_t m = 0; m < schema.size(); ++m) {
    r.mean_accuracy += r.accuracy[m] / static_cast<double>(schema.size());
    r.mean_chance += r.chance[m] / static_cast<double>(schema.size());
  }
  return r;
}

EvalOutput evaluate_checkpoint(const Checkpoint& ckpt, const std::vector<Sample>& data, Protocol protocol,
                               bool whole_dataset) {
  const auto [train_part, validation_part] = train_validation_split(ckpt.config, data);
  EvalOutput out;
  if (protocol == Protocol::zero_shot) {
    const auto& scored = whole_dataset ? data : validation_part;
    out.predictions = zero_shot_evaluate(ckpt, scored, TemplateBank::builtin().class_prompts, ckpt.config.probe.threshold);
  } else {
    if (whole_dataset) throw ConfigError("probe protocol needs a held-out split; whole-dataset scoring is zero-shot only");
    out.predictions = linear_probe(ckpt.model, train_part, validation_part, ckpt.config.probe,
                                   mix_seed(ckpt.config.seed, kProbeStream));
  }
  if (out.predictions.size() == 0) throw ConfigError("evaluation split is empty");
  out.report = build_report(out.predictions, ckpt.schema);
  return out;
}

void write_eval_files(const std::filesystem::path& dir, const EvalOutput& out) {
  write_text(dir / "report.json", out.report.to_json().dump(2) + "\n");
  write_text(dir / "report.csv", out.report.to_csv());
  write_text(dir / "predictions.json", out.predictions.to_json().dump() + "\n");
}

}  // namespace fairenc
