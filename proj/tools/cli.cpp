#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <algorithm>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ccmt/baselines.hpp"
#include "ccmt/dataset.hpp"
#include "ccmt/error.hpp"
#include "ccmt/model.hpp"
#include "ccmt/random.hpp"
#include "ccmt/synthetic.hpp"
#include "ccmt/train.hpp"

namespace ccmt::cli {

namespace {

using nlohmann::json;

// Resolution order: explicit flag, then --config file, then default.
class Settings {
 public:
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    try {
      file_ = json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError(std::string("config file '") + path + "': " + e.what(), 0);
    }
    if (!file_.is_object()) throw ValidationError("config file must hold a JSON object");
  }

  template <class T>
  T get(const std::optional<T>& flag, const std::string& key, T fallback) {
    T v = fallback;
    if (flag) {
      v = *flag;
    } else if (file_.contains(key)) {
      try {
        v = file_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw ValidationError("config key '" + key + "': " + e.what());
      }
    }
    resolved_[key] = v;
    return v;
  }

  bool flag(bool given, const std::string& key) {
    bool v = given;
    if (!given && file_.contains(key)) v = file_.at(key).get<bool>();
    resolved_[key] = v;
    return v;
  }

  const json& resolved() const { return resolved_; }

 private:
  json file_ = json::object();
  json resolved_ = json::object();
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("CCMT_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ValidationError("CCMT_SEED must be an unsigned integer");
    }
  }
  return 0;
}

std::string join_args(const std::vector<std::string>& args) {
  std::string s;
  for (const auto& a : args) {
    if (!s.empty()) s += ' ';
    s += a;
  }
  return s;
}

struct ModelFlags {
  std::optional<std::size_t> k, d, heads, head_dim, l1, l2, d_ff, mlp_hidden;
  std::optional<std::string> residual, query_modality, activation;
  std::optional<double> init_std;
  bool input_projection = false;
  bool pair_mode = false;
};

void add_model_flags(CLI::App* app, ModelFlags& f) {
  app->add_option("--k", f.k, "Tokens per modality");
  app->add_option("--d", f.d, "Token width (default: dataset width)");
  app->add_option("--heads", f.heads, "Attention heads per block");
  app->add_option("--head-dim", f.head_dim, "Per-head width d_h");
  app->add_option("--l1", f.l1, "Text-fusion block depth");
  app->add_option("--l2", f.l2, "Audio-fusion block depth");
  app->add_option("--d-ff", f.d_ff, "Feed-forward hidden width (default 4*d)");
  app->add_option("--mlp-hidden", f.mlp_hidden, "Classification head hidden width (default d)");
  app->add_option("--residual", f.residual, "Residual mode: literal, kv or query")
      ->check(CLI::IsMember({"literal", "kv", "query"}));
  app->add_option("--query-modality", f.query_modality,
                  "Text modality supplying block-1 queries: text_translated or text_original");
  app->add_option("--activation", f.activation, "Feed-forward activation: gelu or relu");
  app->add_option("--init-std", f.init_std, "Weight initialization std");
  app->add_flag("--input-projection", f.input_projection, "Add a learned projection over input tokens");
  app->add_flag("--pair-mode", f.pair_mode, "Skip block 1: kv text modality fuses with audio directly");
}

CCMTConfig resolve_model(Settings& s, const ModelFlags& f, const CCMTConfig& base) {
  CCMTConfig c = base;
  c.k = s.get(f.k, "k", c.k);
  c.d = s.get(f.d, "d", c.d);
  c.heads = s.get(f.heads, "heads", c.heads);
  c.d_head = s.get(f.head_dim, "head-dim", c.d_head);
  c.l1 = s.get(f.l1, "l1", c.l1);
  c.l2 = s.get(f.l2, "l2", c.l2);
  c.d_ff = s.get(f.d_ff, "d-ff", c.d_ff);
  c.mlp_hidden = s.get(f.mlp_hidden, "mlp-hidden", c.mlp_hidden);
  c.residual_mode = parse_residual_mode(s.get(f.residual, "residual", to_string(c.residual_mode)));
  c.query_modality = parse_modality(s.get(f.query_modality, "query-modality", to_string(c.query_modality)));
  const auto act = s.get(f.activation, "activation", std::string(c.activation == Activation::Gelu ? "gelu" : "relu"));
  if (act != "gelu" && act != "relu") throw ValidationError("--activation must be gelu or relu");
  c.activation = act == "gelu" ? Activation::Gelu : Activation::Relu;
  c.init_std = s.get(f.init_std, "init-std", c.init_std);
  c.input_projection = s.flag(f.input_projection, "input-projection");
  c.pair_mode = s.flag(f.pair_mode, "pair-mode");
  return c;
}

struct TrainFlags {
  std::optional<double> lr, dev_fraction, test_fraction;
  std::optional<std::size_t> batch, epochs, repeats, eval_every;
  std::optional<std::string> metric;
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--lr", f.lr, "Adam learning rate (default 1e-4)");
  app->add_option("--batch", f.batch, "Mini-batch size (default 32)");
  app->add_option("--epochs", f.epochs, "Training epochs (default 30)");
  app->add_option("--repeats", f.repeats, "Independent runs with seeds seed, seed+1, ...");
  app->add_option("--metric", f.metric, "Checkpoint selection metric: uar, acc or f1")
      ->check(CLI::IsMember({"uar", "acc", "f1"}));
  app->add_option("--eval-every", f.eval_every, "Epochs between dev evaluations");
  app->add_option("--dev-fraction", f.dev_fraction, "Fraction of --data held out as dev (default 0.2)");
  app->add_option("--test-fraction", f.test_fraction,
                  "Fraction of --data held out as test (default 0; exclusive with --eval-data)");
}

TrainConfig resolve_train(Settings& s, const TrainFlags& f, std::uint64_t seed) {
  TrainConfig t;
  t.seed = seed;
  t.lr = s.get(f.lr, "lr", t.lr);
  t.batch_size = s.get(f.batch, "batch", t.batch_size);
  t.epochs = s.get(f.epochs, "epochs", t.epochs);
  t.eval_every = s.get(f.eval_every, "eval-every", t.eval_every);
  t.metric = parse_selection_metric(s.get(f.metric, "metric", to_string(t.metric)));
  t.validate();
  return t;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

struct Manifest {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  json j = json::object();

  void write(const std::string& path, const std::string& command_line, const std::string& command,
             const json& resolved) {
    j["command_line"] = command_line;
    j["command"] = command;
    j["config"] = resolved;
    j["format_versions"] = {{"model", kModelFormatVersion}, {"dataset", kDatasetFormatVersion}};
    j["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(path, j);
  }
};

DatasetFormat format_of(bool jsonl) { return jsonl ? DatasetFormat::JsonLines : DatasetFormat::Binary; }

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Tiny CCMT plus one synthetic sample for the gradient check.
struct GradCheckCase {
  CCMTConfig config;
  UniformTokenSet sample;
};

GradCheckCase make_gradcheck_case(const CCMTConfig& config, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.samples = 4;
  spec.d = config.d;
  spec.num_classes = config.num_classes;
  // One text modality longer than k, one shorter, to exercise both paths.
  spec.k_range = {{{config.k + 2, config.k + 4}, {1, config.k}, {config.k, config.k + 3}}};
  spec.seed = seed;
  auto ds = gen_synthetic(spec).dataset;
  return {config, assemble(ds.records[0], config.k, seed, true)};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cascaded cross-modal transformer: synthetic data, training, evaluation and checks", "ccmt"};
  app.require_subcommand(1);
  std::optional<std::string> config_path;
  app.add_option("--config", config_path, "JSON file of settings (keys = long flag names)");
  // Global options may also follow the subcommand.
  app.fallthrough();

  const std::uint64_t env_seed = default_seed();
  std::optional<std::uint64_t> seed_flag;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic CCMTEMB dataset");
  std::optional<std::string> synth_task, synth_out;
  std::optional<std::size_t> synth_samples, synth_d, synth_classes, synth_min, synth_max, synth_amin,
      synth_amax, synth_variants;
  std::optional<double> synth_noise, synth_cue;
  bool synth_jsonl = false;
  synth->add_option("--task", synth_task, "separable or xor")->check(CLI::IsMember({"separable", "xor"}));
  synth->add_option("--samples", synth_samples, "Number of samples");
  synth->add_option("--d", synth_d, "Token width");
  synth->add_option("--classes", synth_classes, "Number of classes (xor: 2)");
  synth->add_option("--min-tokens", synth_min, "Minimum text token count");
  synth->add_option("--max-tokens", synth_max, "Maximum text token count");
  synth->add_option("--min-audio-tokens", synth_amin, "Minimum audio token count");
  synth->add_option("--max-audio-tokens", synth_amax, "Maximum audio token count");
  synth->add_option("--variants", synth_variants, "Variants per text modality");
  synth->add_option("--noise", synth_noise, "Token noise std");
  synth->add_option("--cue", synth_cue, "Cue vector scale");
  synth->add_option("--seed", seed_flag, "Generator seed (default $CCMT_SEED or 0)");
  synth->add_option("--out", synth_out, "Output dataset path")->required();
  synth->add_flag("--jsonl", synth_jsonl, "Write the JSON-lines debug form");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train CCMT on a dataset");
  std::optional<std::string> train_data, train_out, train_eval_data;
  ModelFlags train_model;
  TrainFlags train_flags;
  bool train_jsonl = false;
  train_cmd->add_option("--data", train_data, "Training dataset")->required();
  train_cmd->add_option("--out", train_out, "Output model path")->required();
  train_cmd->add_option("--eval-data", train_eval_data, "Held-out test dataset to report on");
  train_cmd->add_option("--seed", seed_flag, "Training seed (default $CCMT_SEED or 0)");
  train_cmd->add_flag("--jsonl", train_jsonl, "Datasets are in JSON-lines form");
  add_model_flags(train_cmd, train_model);
  add_train_flags(train_cmd, train_flags);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model");
  std::optional<std::string> eval_model, eval_data, eval_out;
  bool eval_jsonl = false, eval_json = false;
  eval_cmd->add_option("--model", eval_model, "Model file")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset to evaluate on")->required();
  eval_cmd->add_option("--out", eval_out, "Write metrics JSON here (plus a manifest)");
  eval_cmd->add_option("--seed", seed_flag, "Evaluation token seed (default $CCMT_SEED or 0)");
  eval_cmd->add_flag("--jsonl", eval_jsonl, "Dataset is in JSON-lines form");
  eval_cmd->add_flag("--json", eval_json, "Print metrics as JSON instead of a table");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of a tiny CCMT");
  ModelFlags gc_model;
  std::optional<double> gc_tol;
  std::optional<std::string> gc_out;
  gc->add_option("--seed", seed_flag, "Model and sample seed (default $CCMT_SEED or 0)");
  gc->add_option("--tolerance", gc_tol, "Maximum relative error (default 1e-4)");
  gc->add_option("--out", gc_out, "Write the JSON report here (plus a manifest)");
  add_model_flags(gc, gc_model);

  // baseline
  auto* base = app.add_subcommand("baseline", "Train and evaluate a fusion baseline");
  std::optional<std::string> base_fusion, base_data, base_out, base_eval_data;
  std::optional<std::size_t> base_layers;
  ModelFlags base_model;
  TrainFlags base_flags;
  bool base_jsonl = false;
  base->add_option("--fusion", base_fusion, "vote, mlp or transformer")
      ->check(CLI::IsMember({"vote", "mlp", "transformer"}))
      ->required();
  base->add_option("--data", base_data, "Training dataset")->required();
  base->add_option("--eval-data", base_eval_data, "Held-out test dataset to report on");
  base->add_option("--out", base_out, "Write metrics JSON here (plus a manifest)");
  base->add_option("--layers", base_layers, "Vanilla transformer depth (default 8)");
  base->add_option("--seed", seed_flag, "Training seed (default $CCMT_SEED or 0)");
  base->add_flag("--jsonl", base_jsonl, "Datasets are in JSON-lines form");
  add_model_flags(base, base_model);
  add_train_flags(base, base_flags);

  // export-cls
  auto* exp = app.add_subcommand("export-cls", "Export final class-token embeddings as TSV");
  std::optional<std::string> exp_model, exp_data, exp_out;
  bool exp_jsonl = false;
  exp->add_option("--model", exp_model, "Model file")->required();
  exp->add_option("--data", exp_data, "Dataset")->required();
  exp->add_option("--out", exp_out, "Output TSV")->required();
  exp->add_option("--seed", seed_flag, "Evaluation token seed (default $CCMT_SEED or 0)");
  exp->add_flag("--jsonl", exp_jsonl, "Dataset is in JSON-lines form");

  // validate
  auto* val = app.add_subcommand("validate", "Check a CCMTEMB file");
  std::optional<std::string> val_data;
  bool val_jsonl = false;
  val->add_option("--data", val_data, "Dataset file")->required();
  val->add_flag("--jsonl", val_jsonl, "File is in JSON-lines form");

  std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  const std::string command_line = join_args(args);
  try {
    Settings s;
    if (config_path) s.load_file(*config_path);
    const std::uint64_t seed = s.get(seed_flag, "seed", env_seed);
    Manifest manifest;

    if (*synth) {
      SyntheticSpec spec;
      spec.seed = seed;
      spec.task = parse_synthetic_task(s.get(synth_task, "task", to_string(spec.task)));
      spec.samples = s.get(synth_samples, "samples", spec.samples);
      spec.d = s.get(synth_d, "d", spec.d);
      spec.num_classes = s.get(synth_classes, "classes", spec.num_classes);
      const auto lo = s.get(synth_min, "min-tokens", spec.k_range[0].first);
      const auto hi = s.get(synth_max, "max-tokens", spec.k_range[0].second);
      const auto alo = s.get(synth_amin, "min-audio-tokens", spec.k_range[2].first);
      const auto ahi = s.get(synth_amax, "max-audio-tokens", spec.k_range[2].second);
      spec.k_range = {{{lo, hi}, {lo, hi}, {alo, ahi}}};
      spec.text_variants = s.get(synth_variants, "variants", spec.text_variants);
      spec.noise_std = s.get(synth_noise, "noise", spec.noise_std);
      spec.cue_scale = s.get(synth_cue, "cue", spec.cue_scale);
      const bool jsonl = s.flag(synth_jsonl, "jsonl");
      const auto ds = gen_synthetic(spec).dataset;
      write_dataset(ds, *synth_out, format_of(jsonl));
      manifest.j["artifacts"] = {{"dataset", *synth_out}};
      manifest.j["seeds"] = {{"generator", seed}};
      manifest.write(*synth_out + ".manifest.json", command_line, "synth", s.resolved());
      out << "wrote " << ds.records.size() << " samples to " << *synth_out << "\n";
      return kExitOk;
    }

    if (*val) {
      const auto ds = read_dataset(*val_data, format_of(val_jsonl));
      std::size_t variants = 0;
      for (const auto& r : ds.records)
        for (auto m : kAllModalities) variants += r.variants(m).size();
      out << "ok: " << ds.records.size() << " samples, " << ds.header.num_classes << " classes, widths "
          << ds.header.widths[0] << "/" << ds.header.widths[1] << "/" << ds.header.widths[2] << ", "
          << variants << " variant matrices\n";
      return kExitOk;
    }

    if (*eval_cmd) {
      auto model = load_model(*eval_model);
      const auto ds = read_dataset(*eval_data, format_of(eval_jsonl));
      const auto ids = ds.ids();
      const auto report = evaluate(*model, ds, ids, seed);
      if (eval_json)
        out << to_json(report).dump(2) << "\n";
      else
        out << format_table(report, ds.header.label_names);
      if (eval_out) {
        write_json(*eval_out, to_json(report));
        manifest.j["artifacts"] = {{"metrics", *eval_out}, {"model", *eval_model}, {"data", *eval_data}};
        manifest.j["seeds"] = {{"eval", seed}};
        manifest.write(*eval_out + ".manifest.json", command_line, "eval", s.resolved());
      }
      return kExitOk;
    }

    if (*exp) {
      auto model = load_model(*exp_model);
      const auto ds = read_dataset(*exp_data, format_of(exp_jsonl));
      export_class_embeddings(*model, ds, *exp_out, seed);
      manifest.j["artifacts"] = {{"embeddings", *exp_out}, {"model", *exp_model}, {"data", *exp_data}};
      manifest.j["seeds"] = {{"eval", seed}};
      manifest.write(*exp_out + ".manifest.json", command_line, "export-cls", s.resolved());
      out << "wrote " << ds.records.size() << " rows to " << *exp_out << "\n";
      return kExitOk;
    }

    if (*gc) {
      CCMTConfig tiny;
      tiny.k = 4;
      tiny.d = 8;
      tiny.d_head = 8;
      tiny.heads = 2;
      tiny.l1 = 1;
      tiny.l2 = 1;
      tiny.num_classes = 2;
      GradCheckOptions opts;
      opts.tolerance = s.get(gc_tol, "tolerance", opts.tolerance);
      std::vector<ResidualMode> modes;
      if (gc_model.residual) {
        modes.push_back(parse_residual_mode(*gc_model.residual));
      } else {
        modes = {ResidualMode::Literal, ResidualMode::KvResidual, ResidualMode::QueryResidual};
      }
      CCMTConfig cfg = resolve_model(s, gc_model, tiny);
      bool all_passed = true;
      json reports = json::array();
      for (auto mode : modes) {
        cfg.residual_mode = mode;
        auto model = build_model(cfg, seed);
        const auto gcase = make_gradcheck_case(cfg, seed);
        const auto report = grad_check_model(*model, gcase.sample, opts);
        all_passed = all_passed && report.passed;
        char line[256];
        std::snprintf(line, sizeof line, "%-8s %s  max_rel_error=%.3e  worst=%s  scalars=%zu\n",
                      to_string(mode).c_str(), report.passed ? "PASS" : "FAIL", report.max_relative_error,
                      report.worst_parameter.c_str(), report.scalar_count);
        out << line;
        for (const auto& name : report.failing) out << "  failing: " << name << "\n";
        auto rj = to_json(report);
        rj["residual"] = to_string(mode);
        reports.push_back(std::move(rj));
      }
      if (gc_out) {
        write_json(*gc_out, reports);
        manifest.j["artifacts"] = {{"report", *gc_out}};
        manifest.j["seeds"] = {{"model", seed}};
        manifest.write(*gc_out + ".manifest.json", command_line, "gradcheck", s.resolved());
      }
      return all_passed ? kExitOk : kExitFailure;
    }

    // train and baseline share dataset loading and splitting.
    const bool is_train = static_cast<bool>(*train_cmd);
    const auto& data_path = is_train ? *train_data : *base_data;
    const auto& eval_path = is_train ? train_eval_data : base_eval_data;
    const bool jsonl = is_train ? train_jsonl : base_jsonl;
    const auto& tflags = is_train ? train_flags : base_flags;
    const auto& mflags = is_train ? train_model : base_model;

    const auto ds = read_dataset(data_path, format_of(jsonl));
    std::optional<Dataset> test_ds;
    if (eval_path) test_ds = read_dataset(*eval_path, format_of(jsonl));
    const double dev_fraction = s.get(tflags.dev_fraction, "dev-fraction", 0.2);
    const std::size_t repeats = s.get(tflags.repeats, "repeats", std::size_t{1});
    if (repeats == 0) throw ValidationError("--repeats must be positive");
    const double test_fraction = s.get(tflags.test_fraction, "test-fraction", 0.0);
    if (test_ds && test_fraction > 0.0)
      throw ValidationError("--test-fraction and --eval-data are mutually exclusive");
    const auto split = make_split_fractions(ds.ids(), dev_fraction, test_fraction, seed);
    const Dataset* test_src = test_ds ? &*test_ds : (split.test.empty() ? nullptr : &ds);
    const std::vector<std::uint64_t> test_ids = test_ds ? test_ds->ids() : split.test;
    TrainConfig tcfg = resolve_train(s, tflags, seed);

    CCMTConfig mcfg;
    mcfg.d = ds.header.widths[0];
    mcfg.num_classes = ds.header.num_classes;
    mcfg = resolve_model(s, mflags, mcfg);
    for (std::size_t m = 0; m < kNumModalities; ++m) mcfg.input_widths[m] = ds.header.widths[m];

    std::vector<double> dev_metric, test_metric;
    json runs = json::array();
    std::ofstream history;
    const std::string out_base = is_train ? *train_out : base_out.value_or("");
    if (!out_base.empty()) {
      history.open(out_base + ".history.jsonl", std::ios::trunc);
      if (!history) throw IoError("cannot open '" + out_base + ".history.jsonl' for writing");
    }
    json artifacts = json::object();
    for (std::size_t r = 0; r < repeats; ++r) {
      TrainConfig rc = tcfg;
      rc.seed = seed + r;
      json run{{"repeat", r}, {"seed", rc.seed}};
      std::optional<MetricsReport> dev_report, test_report;
      if (is_train) {
        auto model = build_model(mcfg, rc.seed);
        const auto result = train(*model, ds, split, rc);
        for (const auto& e : result.history) {
          auto ej = to_json(e);
          ej["repeat"] = r;
          if (history.is_open()) history << ej.dump() << "\n";
        }
        dev_report = evaluate(*model, ds, split.dev, rc.eval_seed);
        if (test_src) test_report = evaluate(*model, *test_src, test_ids, rc.eval_seed);
        const std::string path = r == 0 ? *train_out : *train_out + ".repeat" + std::to_string(r);
        save_model(*model, path);
        artifacts["model" + (r == 0 ? std::string() : std::to_string(r))] = path;
        run["best_epoch"] = result.best_epoch;
      } else {
        BaselineConfig bc;
        bc.k = mcfg.k;
        bc.d = mcfg.d;
        bc.input_widths = mcfg.input_widths;
        bc.num_classes = mcfg.num_classes;
        bc.hidden = mcfg.mlp_hidden;
        bc.heads = mcfg.heads;
        bc.d_head = mcfg.d_head;
        bc.d_ff = mcfg.d_ff;
        bc.activation = mcfg.activation;
        bc.init_std = mcfg.init_std;
        bc.layers = s.get(base_layers, "layers", bc.layers);
        const auto kind = parse_fusion_kind(*base_fusion);
        auto log_history = [&](const TrainResult& result, const std::string& member) {
          for (const auto& e : result.history) {
            auto ej = to_json(e);
            ej["repeat"] = r;
            if (!member.empty()) ej["member"] = member;
            if (history.is_open()) history << ej.dump() << "\n";
          }
        };
        if (kind == FusionKind::MajorityVote) {
          MajorityVoteEnsemble ens(bc, rc.seed);
          for (auto& m : ens.members()) log_history(train(*m, ds, split, rc), m->kind());
          auto pred = [&](const UniformTokenSet& x) { return ens.predict(x); };
          dev_report = evaluate(pred, bc.k, ds, split.dev, rc.eval_seed);
          if (test_src) test_report = evaluate(pred, bc.k, *test_src, test_ids, rc.eval_seed);
        } else {
          std::unique_ptr<Classifier> model;
          if (kind == FusionKind::MlpFusion)
            model = std::make_unique<MlpFusion>(bc, rc.seed);
          else
            model = std::make_unique<VanillaTransformer>(bc, rc.seed);
          log_history(train(*model, ds, split, rc), "");
          dev_report = evaluate(*model, ds, split.dev, rc.eval_seed);
          if (test_src) test_report = evaluate(*model, *test_src, test_ids, rc.eval_seed);
        }
      }
      dev_metric.push_back(metric_value(*dev_report, tcfg.metric));
      run["dev"] = to_json(*dev_report);
      if (test_report) {
        test_metric.push_back(metric_value(*test_report, tcfg.metric));
        run["test"] = to_json(*test_report);
      }
      runs.push_back(std::move(run));
    }

    const std::string label = is_train ? "ccmt" : *base_fusion;
    char line[256];
    std::snprintf(line, sizeof line, "%s dev %s: %.4f +- %.4f over %zu run(s)\n", label.c_str(),
                  to_string(tcfg.metric).c_str(), mean_of(dev_metric), std_of(dev_metric), repeats);
    out << line;
    if (!test_metric.empty()) {
      std::snprintf(line, sizeof line, "%s test %s: %.4f +- %.4f\n", label.c_str(),
                    to_string(tcfg.metric).c_str(), mean_of(test_metric), std_of(test_metric));
      out << line;
    }
    json summary{{"fusion", label},
                 {"metric", to_string(tcfg.metric)},
                 {"runs", runs},
                 {"dev_mean", mean_of(dev_metric)},
                 {"dev_std", std_of(dev_metric)}};
    if (!test_metric.empty()) {
      summary["test_mean"] = mean_of(test_metric);
      summary["test_std"] = std_of(test_metric);
    }
    if (!out_base.empty()) {
      const std::string metrics_path = out_base + ".metrics.json";
      write_json(metrics_path, summary);
      artifacts["metrics"] = metrics_path;
      artifacts["history"] = out_base + ".history.jsonl";
      manifest.j["artifacts"] = artifacts;
      manifest.j["seeds"] = {{"base", seed}, {"split", seed}, {"eval", tcfg.eval_seed}};
      manifest.j["model_config"] = to_json(mcfg);
      manifest.write(out_base + ".manifest.json", command_line, is_train ? "train" : "baseline",
                     s.resolved());
    }
    return kExitOk;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kExitFailure;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DimensionError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace ccmt::cli
