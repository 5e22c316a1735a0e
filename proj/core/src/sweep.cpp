#include "mirror/sweep.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace mirror {

std::string SweepCell::setting() const {
  if (version == Version::v4) return theta.present() ? theta.to_string() : "none";
  return std::string(to_string(corruption));
}

SweepGrid table2_grid(const std::vector<uint64_t>& seeds) {
  std::vector<Theta> thetas;
  for (double t : {0.1, 0.2, 0.3, 0.4, 0.5}) thetas.push_back(Theta{t, false});
  thetas.push_back(Theta{std::nullopt, true});
  SweepGrid grid;
  for (auto seed : seeds) {
    for (auto v : {Version::v1, Version::v2, Version::v3}) {
      for (const auto& l : table2_shared_sets()) {
        for (auto c : {Corruption::none, Corruption::noise, Corruption::shuffle}) {
          grid.cells.push_back({v, l, c, {}, seed});
        }
      }
    }
    for (const auto& l : table2_shared_sets()) {
      for (const auto& t : thetas) grid.cells.push_back({Version::v4, l, Corruption::none, t, seed});
    }
  }
  return grid;
}

SweepGrid custom_grid(const std::vector<Version>& versions, const std::vector<StageIndexSet>& sets,
                      const std::vector<Corruption>& corruptions, const std::vector<Theta>& thetas,
                      const std::vector<uint64_t>& seeds) {
  SweepGrid grid;
  const std::vector<Corruption> cs = corruptions.empty() ? std::vector<Corruption>{Corruption::none} : corruptions;
  const std::vector<Theta> ts = thetas.empty() ? std::vector<Theta>{Theta{}} : thetas;
  for (auto seed : seeds) {
    for (auto v : versions) {
      for (const auto& l : sets) {
        for (auto c : cs) {
          for (const auto& t : ts) {
            SweepCell cell{v, l, c, t, seed};
            std::string reason;
            if (v != Version::v4 && t.present()) {
              reason = "θ undefined for " + std::string(to_string(v));
            } else if (v == Version::v4 && !t.present()) {
              reason = "v4 requires θ";
            } else if ((v == Version::v4 || v == Version::v2_brain) && c != Corruption::none) {
              reason = "corruption undefined for " + std::string(to_string(v));
            }
            if (reason.empty()) {
              grid.cells.push_back(cell);
            } else {
              grid.skipped.push_back({cell, reason});
            }
          }
        }
      }
    }
  }
  return grid;
}

TrainConfig cell_config(const TrainConfig& base, const SweepCell& cell) {
  TrainConfig cfg = base;
  cfg.baseline.reset();
  cfg.model.version = cell.version;
  cfg.model.shared = cell.shared;
  cfg.model.theta = cell.theta;
  cfg.corruption.kind = cell.corruption;
  cfg.seed = cell.seed;
  return cfg;
}

namespace {

std::string run_name(const SweepCell& c) {
  return std::string(to_string(c.version)) + "_L" + c.shared.to_string() + "_" + c.setting() + "_s" +
         std::to_string(c.seed);
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  out.push_back(field);
  return out;
}

}  // namespace

std::vector<SweepRow> run_sweep(const TrainConfig& base, const SweepGrid& grid,
                                const std::vector<MultimodalSample>& train_set,
                                const std::vector<MultimodalSample>& val_set,
                                const std::vector<MultimodalSample>& test_set, const std::filesystem::path& output_dir,
                                const std::function<void(const SweepRow&)>& on_row) {
  if (test_set.empty()) throw std::invalid_argument("sweep needs a nonempty test set");
  std::vector<SweepRow> rows;
  for (const auto& s : grid.skipped) {
    rows.push_back({s.cell, "skipped", s.reason, {}, {}});
    std::cerr << "skipping " << run_name(s.cell) << ": " << s.reason << '\n';
    if (on_row) on_row(rows.back());
  }
  for (const auto& cell : grid.cells) {
    SweepRow row{cell, "ok", {}, {}, {}};
    try {
      const auto cfg = cell_config(base, cell);
      const auto dir = output_dir / run_name(cell);
      std::filesystem::create_directories(dir);
      const auto result = train_model(cfg, train_set, val_set);
      row.history_path = (dir / "steps.csv").string();
      result.history.write_steps_csv(dir / "steps.csv");
      result.history.write_epochs_csv(dir / "epochs.csv");
      const auto eval = evaluate_model(result.checkpoint, test_set);
      write_metrics_csv((dir / "metrics.csv").string(), eval.cases);
      row.metrics = eval.mean;
    } catch (const std::exception& e) {
      row.status = "failed";
      row.reason = e.what();
    }
    rows.push_back(row);
    if (on_row) on_row(rows.back());
  }
  return rows;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "version,shared,setting,seed,status,dice,fpv_ml,fnv_ml,history,reason\n" << std::setprecision(10);
  for (const auto& r : rows) {
    os << to_string(r.cell.version) << ',' << r.cell.shared.to_string() << ',' << csv_quote(r.cell.setting()) << ','
       << r.cell.seed << ',' << r.status << ',';
    if (r.status == "ok") {
      os << r.metrics.dice << ',' << r.metrics.fpv_ml << ',' << r.metrics.fnv_ml;
    } else {
      os << ",,";
    }
    os << ',' << csv_quote(r.history_path) << ',' << csv_quote(r.reason) << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read sweep table " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty sweep table " + path.string());
  const auto header = csv_split(line);
  std::map<std::string, size_t> col;
  for (size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"version", "shared", "setting", "seed", "dice"}) {
    if (!col.count(need)) throw ConfigError(std::string("sweep table lacks column ") + need);
  }
  auto field = [&](const std::vector<std::string>& f, const std::string& name) -> std::string {
    const auto it = col.find(name);
    return it == col.end() || it->second >= f.size() ? std::string() : f[it->second];
  };
  std::vector<SweepRow> rows;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = csv_split(line);
    try {
      SweepRow r;
      r.cell.version = parse_version(field(f, "version"));
      r.cell.shared = StageIndexSet::parse(field(f, "shared"));
      const auto setting = field(f, "setting");
      if (r.cell.version == Version::v4) {
        r.cell.theta = Theta::parse(setting);
      } else {
        r.cell.corruption = parse_corruption(setting);
      }
      r.cell.seed = std::stoull(field(f, "seed"));
      r.status = col.count("status") ? field(f, "status") : "ok";
      const auto dice = field(f, "dice");
      if (r.status == "ok") {
        if (dice.empty()) throw ConfigError("missing dice");
        r.metrics.dice = std::stod(dice);
        const auto fpv = field(f, "fpv_ml");
        const auto fnv = field(f, "fnv_ml");
        r.metrics.fpv_ml = fpv.empty() ? 0.0 : std::stod(fpv);
        r.metrics.fnv_ml = fnv.empty() ? 0.0 : std::stod(fnv);
      }
      r.history_path = field(f, "history");
      r.reason = field(f, "reason");
      rows.push_back(r);
    } catch (const std::exception& e) {
      throw ConfigError("sweep table line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

void write_sweep_table(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  const auto& sets = table2_shared_sets();
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::pair<double, int>>> acc;
  std::vector<std::pair<std::string, std::string>> order;
  std::vector<std::string> columns;
  for (const auto& s : sets) columns.push_back(s.to_string());
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    const auto key = std::make_pair(std::string(to_string(r.cell.version)), r.cell.setting());
    if (!acc.count(key)) order.push_back(key);
    const auto l = r.cell.shared.to_string();
    if (std::find(columns.begin(), columns.end(), l) == columns.end()) columns.push_back(l);
    auto& cell = acc[key][l];
    cell.first += r.metrics.dice;
    cell.second += 1;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "version,setting";
  for (const auto& c : columns) os << ",L=" << c;
  os << '\n' << std::setprecision(10);
  for (const auto& key : order) {
    os << key.first << ',' << csv_quote(key.second);
    for (const auto& c : columns) {
      os << ',';
      const auto& m = acc[key];
      if (const auto it = m.find(c); it != m.end()) os << it->second.first / it->second.second;
    }
    os << '\n';
  }
}

}  // namespace mirror
