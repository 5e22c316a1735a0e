#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "mirror/checkpoint.hpp"
#include "mirror/nifti.hpp"
#include "mirror/preprocess.hpp"
#include "mirror/report.hpp"
#include "mirror/training.hpp"

namespace mirror::cli {

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove(item.begin(), item.end(), ' '), item.end());
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<uint64_t> parse_seeds(const std::string& text) {
  std::vector<uint64_t> seeds;
  for (const auto& s : split_list(text)) {
    try {
      size_t pos = 0;
      seeds.push_back(std::stoull(s, &pos));
      if (pos != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError("invalid seed '" + s + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  return seeds;
}

Modality parse_modality(const std::string& text) {
  if (text == "petct") return Modality::petct;
  if (text == "brain") return Modality::brain;
  throw ConfigError("unknown modality '" + text + "' (expected petct|brain)");
}

/// --config, --preset and every schema key as a --key=value override.
struct ConfigOptions {
  std::string config_path;
  std::string preset = "full";
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "TOML-style config file");
    app->add_option("--preset", preset, "starting defaults: full|desk");
    for (const auto& k : config_keys()) {
      app->add_option_function<std::string>(
          "--" + k.key, [this, key = k.key](const std::string& v) { overrides[key] = v; }, k.help);
    }
  }

  [[nodiscard]] TrainConfig resolve() const {
    TrainConfig cfg;
    if (preset == "desk") {
      cfg = desk_preset();
    } else if (preset != "full") {
      throw ConfigError("unknown preset '" + preset + "' (expected full|desk)");
    }
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw ConfigError("cannot read config file " + config_path);
      std::stringstream ss;
      ss << is.rdbuf();
      apply_config(cfg, parse_config_text(ss.str()));
    }
    apply_config(cfg, overrides);
    return cfg;
  }
};

}  // namespace

ParsedCommand parse_cli(const std::vector<std::string>& args) {
  CLI::App app{"Mirror U-Net: multimodal fission networks for PET/CT and brain MRI segmentation", "mirror"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand all subcommand help");

  ParsedCommand cmd;

  auto* synth = app.add_subcommand("synth", "write a seeded phantom dataset (NIfTI + manifest.json)");
  std::string synth_kind = "petct";
  synth->add_option("--out", cmd.synth.out, "output directory")->required();
  synth->add_option("--kind", synth_kind, "petct|brain");
  synth->add_option("--count", cmd.synth.options.count, "number of cases");
  synth->add_option("--size", cmd.synth.options.size, "cube edge in voxels");
  synth->add_option("--seed", cmd.synth.options.seed, "cohort seed");
  synth->add_option("--positive-fraction", cmd.synth.options.positive_fraction, "share of lesion-bearing cases");
  synth->add_option("--max-lesions", cmd.synth.options.max_lesions, "lesions per positive case (upper bound)");

  auto* train = app.add_subcommand("train", "train one model and write its checkpoint and history");
  ConfigOptions train_cfg;
  train_cfg.attach(train);

  auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset (Dice, FPV, FNV)");
  eval->add_option("--checkpoint", cmd.eval.checkpoint, "checkpoint file")->required();
  eval->add_option("--data", cmd.eval.data, "manifest (defaults to the checkpoint's data.test)");
  eval->add_option("--out", cmd.eval.out, "per-case metrics CSV (defaults to stdout)");

  auto* infer = app.add_subcommand("infer", "predict probability and mask volumes for one case");
  infer->add_option("--checkpoint", cmd.infer.checkpoint, "checkpoint file")->required();
  infer->add_option("--a", cmd.infer.a, "CT or FLAIR volume")->required();
  infer->add_option("--b", cmd.infer.b, "PET (SUV) or T1Gd volume")->required();
  infer->add_option("--out-prefix", cmd.infer.out_prefix, "output path prefix")->required();
  infer->add_flag("--preprocessed", cmd.infer.preprocessed, "inputs are already resampled and normalised");

  auto* sweep = app.add_subcommand("sweep", "train and evaluate a grid of versions, shared sets and settings");
  ConfigOptions sweep_cfg;
  sweep_cfg.attach(sweep);
  std::string versions = "v1,v2,v3", sets = "3,4,5,6,7,4+5+6,3+4+5+6+7", corruptions = "none,noise,shuffle";
  std::string thetas, seeds = "0";
  sweep->add_option("--grid", cmd.sweep.grid, "table2|custom");
  sweep->add_option("--versions", versions, "custom grid: versions");
  sweep->add_option("--sets", sets, "custom grid: shared sets, e.g. 4,5,4+5+6");
  sweep->add_option("--corruptions", corruptions, "custom grid: none,noise,shuffle");
  sweep->add_option("--thetas", thetas, "custom grid: theta values or 'learnable'");
  sweep->add_option("--seeds", seeds, "seeds, e.g. 0,1,2");
  sweep->add_option("--out", cmd.sweep.out, "sweep CSV (defaults to <output.dir>/sweep.csv)");
  sweep->add_flag("--dry-run", cmd.sweep.dry_run, "list the cells without training");

  auto* report = app.add_subcommand("report", "emit box-plot/line/theta CSVs, ordering summary and SVG plots");
  report->add_option("--sweep", cmd.report.sweep, "sweep CSV")->required();
  report->add_option("--out", cmd.report.out, "report directory")->required();
  report->add_option("--epsilon", cmd.report.epsilon, "version-ordering tolerance in Dice units");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    cmd.help = app.help();
    return cmd;
  } catch (const CLI::CallForAllHelp&) {
    cmd.help = app.help("", CLI::AppFormatMode::All);
    return cmd;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  const auto* chosen = app.get_subcommands().front();
  cmd.command = chosen->get_name();
  if (cmd.command == "synth") {
    cmd.synth.options.modality = parse_modality(synth_kind);
    if (cmd.synth.options.count < 1) throw ConfigError("--count must be >= 1");
    if (!(cmd.synth.options.positive_fraction >= 0.0 && cmd.synth.options.positive_fraction <= 1.0)) {
      throw ConfigError("--positive-fraction must lie in [0, 1]");
    }
  } else if (cmd.command == "train") {
    cmd.config = train_cfg.resolve();
    cmd.config.validate();
    if (cmd.config.train_manifest.empty()) throw ConfigError("missing required path data.train");
  } else if (cmd.command == "sweep") {
    cmd.config = sweep_cfg.resolve();
    const auto seed_list = parse_seeds(seeds);
    if (cmd.sweep.grid == "table2") {
      cmd.sweep.cells = table2_grid(seed_list);
    } else if (cmd.sweep.grid == "custom") {
      std::vector<Version> vs;
      for (const auto& v : split_list(versions)) vs.push_back(parse_version(v));
      std::vector<StageIndexSet> ls;
      for (const auto& l : split_list(sets)) ls.push_back(StageIndexSet::parse(l));
      std::vector<Corruption> cs;
      for (const auto& c : split_list(corruptions)) cs.push_back(parse_corruption(c));
      std::vector<Theta> ts;
      for (const auto& t : split_list(thetas)) ts.push_back(Theta::parse(t));
      cmd.sweep.cells = custom_grid(vs, ls, cs, ts, seed_list);
    } else {
      throw ConfigError("unknown grid '" + cmd.sweep.grid + "' (expected table2|custom)");
    }
    // Validate every runnable cell up front so a bad base config fails fast.
    for (const auto& cell : cmd.sweep.cells.cells) cell_config(cmd.config, cell).validate();
    if (!cmd.sweep.dry_run && cmd.config.train_manifest.empty()) throw ConfigError("missing required path data.train");
    if (!cmd.sweep.dry_run && cmd.config.test_manifest.empty()) throw ConfigError("missing required path data.test");
  } else if (cmd.command == "report") {
    if (!(cmd.report.epsilon >= 0.0)) throw ConfigError("--epsilon must be >= 0");
  }
  return cmd;
}

namespace {

std::vector<MultimodalSample> load_optional(const std::string& manifest) {
  if (manifest.empty()) return {};
  return load_dataset(manifest);
}

int run_command(const ParsedCommand& cmd, std::ostream& out, std::ostream& err) {
  if (cmd.command == "synth") {
    const auto manifest = synthesize_dataset(resolve_output_path(cmd.synth.out), cmd.synth.options);
    out << manifest.string() << '\n';
  } else if (cmd.command == "train") {
    const auto& cfg = cmd.config;
    const auto train_set = load_dataset(cfg.train_manifest);
    const auto val_set = load_optional(cfg.val_manifest);
    const auto dir = resolve_output_path(cfg.output_dir);
    std::filesystem::create_directories(dir);
    {
      std::ofstream os(dir / "config.toml");
      os << to_config_text(cfg);
    }
    const auto result = train_model(cfg, train_set, val_set);
    save_checkpoint(result.checkpoint, dir / "model.ckpt");
    result.history.write_steps_csv(dir / "steps.csv");
    result.history.write_epochs_csv(dir / "epochs.csv");
    out << "trained " << cfg.model_name() << " for " << result.history.steps.size() << " steps -> "
        << (dir / "model.ckpt").string() << '\n';
    if (!cfg.test_manifest.empty()) {
      const auto eval = evaluate_model(result.checkpoint, load_dataset(cfg.test_manifest));
      write_metrics_csv((dir / "metrics.csv").string(), eval.cases);
      out << "test dice=" << eval.mean.dice << " fpv_ml=" << eval.mean.fpv_ml << " fnv_ml=" << eval.mean.fnv_ml << '\n';
    }
  } else if (cmd.command == "eval") {
    const auto ck = load_checkpoint(cmd.eval.checkpoint);
    const auto data = cmd.eval.data.empty() ? std::filesystem::path(ck.config.test_manifest) : cmd.eval.data;
    if (data.empty()) throw ConfigError("missing required path --data (checkpoint has no data.test)");
    const auto eval = evaluate_model(ck, load_dataset(data));
    if (cmd.eval.out.empty()) {
      write_metrics_csv(out, eval.cases);
    } else {
      const auto path = resolve_output_path(cmd.eval.out);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      write_metrics_csv(path.string(), eval.cases);
      out << "mean dice=" << eval.mean.dice << " fpv_ml=" << eval.mean.fpv_ml << " fnv_ml=" << eval.mean.fnv_ml << '\n';
    }
  } else if (cmd.command == "infer") {
    const auto ck = load_checkpoint(cmd.infer.checkpoint);
    const bool brain = !ck.config.baseline && is_brain(ck.config.model.version);
    auto a = load_volume(cmd.infer.a);
    auto b = load_volume(cmd.infer.b);
    if (!cmd.infer.preprocessed) {
      if (brain) {
        a = preprocess_mri(a);
        b = preprocess_mri(b);
      } else {
        std::tie(a, b) = preprocess_autopet(a, b);
      }
    }
    if (a.spacing() != ck.spacing) throw ConfigError("spacing mismatch between the input and the checkpoint");
    const auto probs = sliding_window_predict(make_predictor(ck.network, ck.config), a, b, ck.config.window());
    const auto mask = final_mask(ck.config, probs);
    const auto prefix = resolve_output_path(cmd.infer.out_prefix).string();
    if (std::filesystem::path(prefix).has_parent_path()) {
      std::filesystem::create_directories(std::filesystem::path(prefix).parent_path());
    }
    for (size_t c = 0; c < probs.size(); ++c) {
      save_volume(probs[c], prefix + (probs.size() == 1 ? "_prob.nii.gz" : "_prob" + std::to_string(c) + ".nii.gz"));
    }
    save_mask(mask, prefix + "_mask.nii.gz");
    out << "wrote " << prefix << "_mask.nii.gz (" << count_nonzero(mask) << " foreground voxels)\n";
  } else if (cmd.command == "sweep") {
    const auto& grid = cmd.sweep.cells;
    if (cmd.sweep.dry_run) {
      out << grid.cells.size() << " cells, " << grid.skipped.size() << " skipped\n";
      for (const auto& c : grid.cells) {
        out << to_string(c.version) << " L=" << c.shared.to_string() << " setting=" << c.setting() << " seed=" << c.seed
            << '\n';
      }
      for (const auto& s : grid.skipped) {
        out << "skip " << to_string(s.cell.version) << " L=" << s.cell.shared.to_string()
            << " setting=" << s.cell.setting() << ": " << s.reason << '\n';
      }
      return 0;
    }
    const auto& cfg = cmd.config;
    const auto train_set = load_dataset(cfg.train_manifest);
    const auto val_set = load_optional(cfg.val_manifest);
    const auto test_set = load_dataset(cfg.test_manifest);
    const auto dir = resolve_output_path(cfg.output_dir);
    std::filesystem::create_directories(dir);
    const auto csv = cmd.sweep.out.empty() ? dir / "sweep.csv" : resolve_output_path(cmd.sweep.out);
    std::vector<SweepRow> done;
    const auto rows = run_sweep(cfg, grid, train_set, val_set, test_set, dir, [&](const SweepRow& r) {
      done.push_back(r);
      write_sweep_csv(csv, done);
      out << to_string(r.cell.version) << " L=" << r.cell.shared.to_string() << " " << r.cell.setting()
          << " seed=" << r.cell.seed << ": " << r.status;
      if (r.status == "ok") out << " dice=" << r.metrics.dice;
      if (!r.reason.empty()) out << " (" << r.reason << ")";
      out << std::endl;
    });
    write_sweep_csv(csv, rows);
    write_sweep_table(csv.parent_path() / "sweep_table.csv", rows);
    const auto failed = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.status == "failed"; });
    if (failed > 0) {
      err << failed << " sweep cells failed; see " << csv.string() << '\n';
      return static_cast<int>(ExitCode::runtime_failure);
    }
  } else if (cmd.command == "report") {
    const auto bundle = emit_report(cmd.report.sweep, resolve_output_path(cmd.report.out), {cmd.report.epsilon});
    for (const auto& o : bundle.ordering) out << o.summary() << '\n';
    if (!bundle.warnings.empty()) {
      err << "warning: " << bundle.warnings.size() << " expected cells missing or unfinished (see warnings.txt)\n";
    }
    out << "wrote " << bundle.files.size() << " files to " << resolve_output_path(cmd.report.out).string() << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const auto cmd = parse_cli(args);
    if (cmd.help) {
      out << *cmd.help;
      return static_cast<int>(ExitCode::ok);
    }
    return run_command(cmd, out, err);
  } catch (const std::invalid_argument& e) {
    // ConfigError derives from std::invalid_argument.
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::config_error);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::runtime_failure);
  }
}

}  // namespace mirror::cli
