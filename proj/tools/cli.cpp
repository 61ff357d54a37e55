#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "fairenc/check/criteria.hpp"
#include "fairenc/datamodel.hpp"
#include "fairenc/errors.hpp"
#include "fairenc/metrics.hpp"
#include "fairenc/runner.hpp"
#include "json.hpp"

namespace fairenc::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

json parse_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw ParseError(p.string() + ": " + e.what(), 0);
  }
}

AttributeSchema schema_or_default(const std::string& path) {
  return path.empty() ? AttributeSchema::two_attribute_default() : AttributeSchema::load(path);
}

std::string fmt(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// --- report ----------------------------------------------------------------

struct LogSummary {
  std::vector<std::size_t> epochs;
  std::vector<std::string> losses;  // first-seen order
  std::map<std::pair<std::string, std::size_t>, std::pair<double, std::size_t>> sums;
};

LogSummary summarize_log(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "config_hash,step,epoch,loss,value") {
    throw ParseError(path.string() + ": not a training log (unexpected header)", 1);
  }
  LogSummary s;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 5) throw ParseError(path.string() + ": expected 5 fields", lineno);
    const std::size_t epoch = std::stoul(f[2]);
    if (s.epochs.empty() || s.epochs.back() != epoch) s.epochs.push_back(epoch);
    if (std::find(s.losses.begin(), s.losses.end(), f[3]) == s.losses.end()) s.losses.push_back(f[3]);
    auto& acc = s.sums[{f[3], epoch}];
    acc.first += std::stod(f[4]);
    ++acc.second;
  }
  return s;
}

void report_logs(const std::vector<std::string>& inputs, const std::string& csv, std::ostream& out) {
  std::ostringstream csv_out;
  csv_out << "log,epoch,loss,mean\n";
  for (const auto& input : inputs) {
    const LogSummary s = summarize_log(input);
    out << input << " (per-epoch mean of step values)\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-24s", "loss");
    out << line;
    for (std::size_t e : s.epochs) {
      std::snprintf(line, sizeof line, " %11s", ("epoch " + std::to_string(e)).c_str());
      out << line;
    }
    out << '\n';
    for (const auto& loss : s.losses) {
      std::snprintf(line, sizeof line, "%-24s", loss.c_str());
      out << line;
      for (std::size_t e : s.epochs) {
        const auto it = s.sums.find({loss, e});
        const double mean = it == s.sums.end() ? 0.0 : it->second.first / static_cast<double>(it->second.second);
        std::snprintf(line, sizeof line, " %11.5f", mean);
        out << line;
        csv_out << input << ',' << e << ',' << loss << ',' << fmt(mean, "%.12g") << '\n';
      }
      out << '\n';
    }
    out << '\n';
  }
  if (!csv.empty()) write_file(csv, csv_out.str());
}

FairnessReport load_report(const fs::path& path, const AttributeSchema& schema) {
  const json j = parse_json(path);
  if (j.contains("scores")) return build_report(PredictionSet::from_json(j), schema);
  return FairnessReport::from_json(j);
}

std::string mean_std_cell(const std::vector<std::optional<double>>& values) {
  std::vector<double> defined;
  for (const auto& v : values) {
    if (v) defined.push_back(100.0 * *v);
  }
  if (defined.empty()) return "n/a";
  const MeanStd ms = mean_std(defined);
  std::string cell = fmt(ms.mean, "%.2f");
  if (defined.size() > 1) cell += "+-" + fmt(ms.std, "%.2f");
  if (defined.size() != values.size()) cell += "(" + std::to_string(defined.size()) + ")";
  return cell;
}

void report_runs(const std::vector<FairnessReport>& reports, const std::vector<std::string>& names,
                 const std::string& csv, std::ostream& out) {
  if (reports.size() == 1) {
    out << reports[0].to_table();
    if (!csv.empty()) write_file(csv, reports[0].to_csv());
    return;
  }
  const FairnessReport& first = reports[0];
  for (const auto& r : reports) {
    if (r.attributes.size() != first.attributes.size()) throw SchemaError("reports have different attribute sets");
    for (std::size_t m = 0; m < r.attributes.size(); ++m) {
      if (r.attributes[m].attribute != first.attributes[m].attribute) {
        throw SchemaError("reports have different attribute sets");
      }
    }
  }
  auto column = [&](auto getter) {
    std::vector<std::optional<double>> v;
    for (const auto& r : reports) v.push_back(getter(r));
    return v;
  };
  std::ostringstream csv_out;
  csv_out << "attribute,metric,group,value,flag\n";
  auto emit_csv = [&](const std::string& attr, const std::string& metric, const std::string& group,
                      const std::vector<std::optional<double>>& v) {
    std::vector<double> d;
    for (const auto& x : v) {
      if (x) d.push_back(*x);
    }
    if (d.empty()) {
      csv_out << attr << ',' << metric << ',' << group << ",,undefined\n";
      return;
    }
    const MeanStd ms = mean_std(d);
    csv_out << attr << ',' << metric << "_mean," << group << ',' << fmt(ms.mean, "%.12g") << ",\n";
    csv_out << attr << ',' << metric << "_std," << group << ',' << fmt(ms.std, "%.12g") << ",\n";
  };

  out << reports.size() << " runs:";
  for (const auto& n : names) out << ' ' << n;
  out << "\nmean +- sample std over runs (values x100); (k) marks metrics defined in only k runs\n\n";
  const auto auc_col = column([](const FairnessReport& r) { return r.auc; });
  const auto f1_col = column([](const FairnessReport& r) { return std::optional<double>(r.weighted_f1); });
  out << "AUC " << mean_std_cell(auc_col) << "   weighted F1 " << mean_std_cell(f1_col) << "\n\n";
  emit_csv("", "auc", "", auc_col);
  emit_csv("", "weighted_f1", "", f1_col);

  char line[512];
  std::snprintf(line, sizeof line, "%-12s %14s %14s %14s %14s  %s\n", "attribute", "DPD", "DEOdds", "ES-AUC",
                "worst AUC", "group-wise AUC");
  out << line;
  for (std::size_t m = 0; m < first.attributes.size(); ++m) {
    const std::string& name = first.attributes[m].attribute;
    const auto dpd_col = column([m](const FairnessReport& r) { return r.attributes[m].dpd; });
    const auto eo_col = column([m](const FairnessReport& r) { return r.attributes[m].deodds; });
    const auto es_col = column([m](const FairnessReport& r) { return r.attributes[m].es_auc; });
    const auto worst_col = column([m](const FairnessReport& r) { return r.attributes[m].worst_group_auc; });
    std::string groups;
    for (const auto& g : first.attributes[m].groups) {
      const auto gcol = column([&](const FairnessReport& r) -> std::optional<double> {
        for (const auto& h : r.attributes[m].groups) {
          if (h.group == g.group) return h.auc;
        }
        return std::nullopt;
      });
      groups += g.group + "=" + mean_std_cell(gcol) + " ";
      emit_csv(name, "group_auc", g.group, gcol);
    }
    std::snprintf(line, sizeof line, "%-12s %14s %14s %14s %14s  %s\n", name.c_str(), mean_std_cell(dpd_col).c_str(),
                  mean_std_cell(eo_col).c_str(), mean_std_cell(es_col).c_str(), mean_std_cell(worst_col).c_str(),
                  groups.c_str());
    out << line;
    emit_csv(name, "dpd", "", dpd_col);
    emit_csv(name, "deodds", "", eo_col);
    emit_csv(name, "es_auc", "", es_col);
    emit_csv(name, "worst_group_auc", "", worst_col);
  }
  if (!csv.empty()) write_file(csv, csv_out.str());
}

// ---------------------------------------------------------------------------

struct Options {
  // gen-data
  std::string spec_path, schema_path, data_out;
  std::optional<std::uint64_t> data_seed;
  std::optional<std::size_t> n_samples;
  // train
  std::string config_path, train_out, train_data;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  // eval
  std::string checkpoint, eval_data, protocol = "zero-shot", split = "validation", eval_out;
  // report
  std::vector<std::string> inputs;
  std::string report_csv, report_schema;
  // selfcheck
  bool all = false;
  std::string scratch = "selfcheck_scratch";
};

int gen_data(const Options& o, std::ostream& out) {
  const AttributeSchema schema = schema_or_default(o.schema_path);
  SyntheticSpec spec = o.spec_path.empty() ? SyntheticSpec{} : SyntheticSpec::from_json(parse_json(o.spec_path), schema);
  if (o.data_seed) spec.seed = *o.data_seed;
  if (o.n_samples) spec.n_samples = *o.n_samples;
  const auto samples = generate_synthetic(spec, schema);
  if (fs::path(o.data_out).has_parent_path()) fs::create_directories(fs::path(o.data_out).parent_path());
  save_dataset(o.data_out, samples, schema);
  out << "wrote " << samples.size() << " samples to " << o.data_out << "\n";
  return 0;
}

int train_cmd(const Options& o, std::ostream& out) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : RunConfig::load(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (!o.train_data.empty()) cfg.dataset = o.train_data;
  if (!o.train_out.empty()) cfg.out_dir = o.train_out;
  cfg.validate();
  const fs::path dir = o.train_out.empty() ? resolve_out_dir(cfg) : fs::path(o.train_out);
  TrainOptions opts;
  opts.out_dir = dir;
  opts.on_epoch = [&out](const EpochRecord& e) {
    out << "epoch " << e.epoch << "  validation zero-shot AUC "
        << (e.validation.auc ? fmt(100.0 * *e.validation.auc, "%.2f") : std::string("n/a"));
    for (const auto& a : e.validation.attributes) {
      out << "  " << a.attribute << " DPD " << (a.dpd ? fmt(100.0 * *a.dpd, "%.2f") : std::string("n/a"));
    }
    out << "  (" << fmt(e.seconds, "%.1f") << " s)\n";
    out.flush();
  };
  out << "config " << cfg.hash() << "  seed " << cfg.seed << "  -> " << dir.string() << "\n";
  const TrainResult r = train_from_config(cfg, opts);
  if (r.aborted) {
    out << "training aborted: " << r.abort_reason << "; last good checkpoint at step " << r.checkpoint.step << "\n";
    return 3;
  }
  out << "done: " << r.checkpoint.step << " steps, checkpoint " << (dir / "checkpoint.json").string() << "\n";
  return 0;
}

int eval_cmd(const Options& o, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  const std::string data_path = o.eval_data.empty() ? ckpt.config.dataset : o.eval_data;
  if (data_path.empty()) throw ConfigError("eval: no dataset given and the checkpoint config has none");
  const auto data = load_dataset(data_path, ckpt.schema);
  const Protocol protocol = o.protocol == "zero-shot" ? Protocol::zero_shot : Protocol::probe;
  const EvalOutput res = evaluate_checkpoint(ckpt, data, protocol, o.split == "all");
  const fs::path dir = o.eval_out.empty() ? fs::path(o.checkpoint).parent_path() / ("eval_" + o.protocol)
                                          : fs::path(o.eval_out);
  write_eval_files(dir, res);
  out << o.protocol << " on " << (o.split == "all" ? "all samples" : "the validation split") << "\n"
      << res.report.to_table() << "wrote " << (dir / "report.json").string() << "\n";
  return 0;
}

int report_cmd(const Options& o, std::ostream& out) {
  bool logs = false, reports = false;
  for (const auto& in : o.inputs) (fs::path(in).extension() == ".csv" ? logs : reports) = true;
  if (logs && reports) throw ConfigError("report: pass either training logs (.csv) or reports (.json), not both");
  if (logs) {
    report_logs(o.inputs, o.report_csv, out);
    return 0;
  }
  const AttributeSchema schema = schema_or_default(o.report_schema);
  std::vector<FairnessReport> rs;
  for (const auto& in : o.inputs) rs.push_back(load_report(in, schema));
  report_runs(rs, o.inputs, o.report_csv, out);
  return 0;
}

int selfcheck_cmd(const Options& o, std::ostream& out) {
  const auto results = check::run_suite(o.all, o.scratch, &out);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.passed ? 1 : 0;
  out << passed << "/" << results.size() << " criteria passed\n";
  return passed == results.size() ? 0 : 1;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"FairEnc: fair multimodal pretraining at toy scale", "fairenc"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset (JSON lines)");
  gen->add_option("--spec", o.spec_path, "SyntheticSpec JSON (defaults when omitted)")->check(CLI::ExistingFile);
  gen->add_option("--schema", o.schema_path, "attribute schema JSON (race/gender when omitted)")
      ->check(CLI::ExistingFile);
  gen->add_option("--out", o.data_out, "output dataset path")->required();
  gen->add_option("--seed", o.data_seed, "override the spec seed");
  gen->add_option("--n", o.n_samples, "override the sample count");

  auto* tr = app.add_subcommand("train", "train from a RunConfig; writes checkpoint and logs");
  tr->add_option("--config", o.config_path, "RunConfig JSON")->check(CLI::ExistingFile);
  tr->add_option("--seed", o.seed, "override the config seed");
  tr->add_option("--epochs", o.epochs, "override the epoch count");
  tr->add_option("--data", o.train_data, "override the dataset path");
  tr->add_option("--out", o.train_out, "output directory (else FAIRENC_OUT_DIR, else config out_dir)");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint; writes report.json, report.csv, predictions.json");
  ev->add_option("--checkpoint", o.checkpoint, "checkpoint.json")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", o.eval_data, "dataset (defaults to the one in the checkpoint config)");
  ev->add_option("--protocol", o.protocol, "zero-shot or probe")->check(CLI::IsMember({"zero-shot", "probe"}));
  ev->add_option("--split", o.split, "validation or all (zero-shot only)")
      ->check(CLI::IsMember({"validation", "all"}));
  ev->add_option("--out", o.eval_out, "output directory (default: next to the checkpoint)");

  auto* rep = app.add_subcommand("report", "tabulate reports, predictions or training logs");
  rep->add_option("inputs", o.inputs, "report.json / predictions.json files, or train_log.csv files")
      ->required()
      ->check(CLI::ExistingFile);
  rep->add_option("--csv", o.report_csv, "also write a CSV");
  rep->add_option("--schema", o.report_schema, "schema for predictions files")->check(CLI::ExistingFile);

  auto* sc = app.add_subcommand("selfcheck", "run the oracle, gradient and property suites");
  sc->add_flag("--all", o.all, "include the training-based criteria (several minutes)");
  sc->add_option("--scratch", o.scratch, "scratch directory for --all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (gen->parsed()) return gen_data(o, out);
    if (tr->parsed()) return train_cmd(o, out);
    if (ev->parsed()) return eval_cmd(o, out);
    if (rep->parsed()) return report_cmd(o, out);
    return selfcheck_cmd(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fairenc::cli
