#include "mirror/report.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <sstream>

namespace mirror {

BoxStats box_stats(std::string group, std::vector<double> values) {
  BoxStats b;
  b.group = std::move(group);
  b.n = static_cast<int64_t>(values.size());
  if (values.empty()) return b;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<size_t>(pos);
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  b.min = values.front();
  b.max = values.back();
  b.q1 = quantile(0.25);
  b.median = quantile(0.5);
  b.q3 = quantile(0.75);
  double sum = 0.0;
  for (double v : values) sum += v;
  b.mean = sum / static_cast<double>(values.size());
  return b;
}

std::string OrderingResult::summary() const {
  return std::string(to_string(lower)) + "<" + std::string(to_string(higher)) + ": " + std::to_string(holds) + "/" +
         std::to_string(compared) + " L-sets";
}

namespace {

/// Shared sets in grid order first, then any others by their text.
std::vector<std::string> ordered_sets(const std::vector<SweepRow>& rows) {
  std::vector<std::string> out;
  for (const auto& s : table2_shared_sets()) out.push_back(s.to_string());
  std::set<std::string> extra;
  for (const auto& r : rows) {
    const auto l = r.cell.shared.to_string();
    if (std::find(out.begin(), out.end(), l) == out.end()) extra.insert(l);
  }
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

bool is_recon_version(Version v) { return v == Version::v1 || v == Version::v2 || v == Version::v3; }

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

void write_box_csv(const std::filesystem::path& path, const std::string& key, const std::vector<BoxStats>& stats) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << key << ",n,min,q1,median,q3,max,mean\n";
  for (const auto& b : stats) {
    os << b.group << ',' << b.n << ',' << fmt(b.min) << ',' << fmt(b.q1) << ',' << fmt(b.median) << ',' << fmt(b.q3)
       << ',' << fmt(b.max) << ',' << fmt(b.mean) << '\n';
  }
}

struct Canvas {
  double width = 640, height = 360, left = 60, right = 20, top = 30, bottom = 50;
  double lo = 0.0, hi = 1.0;
  [[nodiscard]] double y(double v) const {
    const double span = hi > lo ? hi - lo : 1.0;
    return top + (height - top - bottom) * (1.0 - (v - lo) / span);
  }
  [[nodiscard]] double x(size_t i, size_t n) const {
    const double inner = width - left - right;
    return left + inner * (static_cast<double>(i) + 0.5) / static_cast<double>(std::max<size_t>(n, 1));
  }
};

std::string svg_header(const Canvas& c, const std::string& title) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c.width << "\" height=\"" << c.height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << c.width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = c.lo + (c.hi - c.lo) * t / 4.0;
    os << "<line x1=\"" << c.left << "\" x2=\"" << c.width - c.right << "\" y1=\"" << c.y(v) << "\" y2=\"" << c.y(v)
       << "\" stroke=\"#ddd\"/>\n<text x=\"" << c.left - 6 << "\" y=\"" << c.y(v) + 4 << "\" text-anchor=\"end\">"
       << std::setprecision(3) << v << "</text>\n";
  }
  os << "<text x=\"14\" y=\"" << c.height / 2 << "\" transform=\"rotate(-90 14 " << c.height / 2
     << ")\" text-anchor=\"middle\">Dice</text>\n";
  return os.str();
}

void value_range(Canvas& c, const std::vector<double>& values) {
  if (values.empty()) return;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double pad = std::max(0.01, 0.05 * (*mx - *mn));
  c.lo = std::max(0.0, *mn - pad);
  c.hi = std::min(1.0, *mx + pad);
  if (c.hi <= c.lo) c.hi = c.lo + 0.01;
}

void write_box_svg(const std::filesystem::path& path, const std::string& title, const std::vector<BoxStats>& stats) {
  Canvas c;
  std::vector<double> all;
  for (const auto& b : stats) {
    if (b.n > 0) {
      all.push_back(b.min);
      all.push_back(b.max);
    }
  }
  value_range(c, all);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << svg_header(c, title);
  const double half = std::min(20.0, (c.width - c.left - c.right) / (2.5 * std::max<size_t>(stats.size(), 1)));
  for (size_t i = 0; i < stats.size(); ++i) {
    const auto& b = stats[i];
    const double x = c.x(i, stats.size());
    os << "<text x=\"" << x << "\" y=\"" << c.height - c.bottom + 16 << "\" text-anchor=\"middle\">" << b.group
       << "</text>\n";
    if (b.n == 0) continue;
    os << "<line x1=\"" << x << "\" x2=\"" << x << "\" y1=\"" << c.y(b.min) << "\" y2=\"" << c.y(b.max)
       << "\" stroke=\"black\"/>\n"
       << "<rect x=\"" << x - half << "\" y=\"" << c.y(b.q3) << "\" width=\"" << 2 * half << "\" height=\""
       << std::max(0.5, c.y(b.q1) - c.y(b.q3)) << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n"
       << "<line x1=\"" << x - half << "\" x2=\"" << x + half << "\" y1=\"" << c.y(b.median) << "\" y2=\""
       << c.y(b.median) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
  }
  os << "</svg>\n";
}

struct Series {
  std::string name;
  std::vector<std::optional<double>> values;
};

void write_line_svg(const std::filesystem::path& path, const std::string& title, const std::vector<std::string>& xs,
                    const std::vector<Series>& series) {
  static const char* colours[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};
  Canvas c;
  std::vector<double> all;
  for (const auto& s : series) {
    for (const auto& v : s.values) {
      if (v) all.push_back(*v);
    }
  }
  value_range(c, all);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << svg_header(c, title);
  for (size_t i = 0; i < xs.size(); ++i) {
    os << "<text x=\"" << c.x(i, xs.size()) << "\" y=\"" << c.height - c.bottom + 16 << "\" text-anchor=\"middle\">"
       << xs[i] << "</text>\n";
  }
  for (size_t k = 0; k < series.size(); ++k) {
    const char* colour = colours[k % 7];
    std::ostringstream pts;
    for (size_t i = 0; i < series[k].values.size(); ++i) {
      if (!series[k].values[i]) continue;
      const double x = c.x(i, xs.size());
      const double y = c.y(*series[k].values[i]);
      pts << x << ',' << y << ' ';
      os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
    }
    os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << colour << "\"/>\n"
       << "<text x=\"" << c.width - c.right - 4 << "\" y=\"" << c.top + 14 * (k + 1) << "\" text-anchor=\"end\" fill=\""
       << colour << "\">" << series[k].name << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace

ReportBundle emit_report(const std::vector<SweepRow>& rows, const std::filesystem::path& output_dir,
                         const ReportOptions& options) {
  std::filesystem::create_directories(output_dir);
  ReportBundle bundle;
  const auto sets = ordered_sets(rows);
  std::vector<const SweepRow*> ok;
  for (const auto& r : rows) {
    if (r.status == "ok") ok.push_back(&r);
  }

  // Traceability: every value entering a plot, keyed by its sweep row.
  std::ostringstream points;
  points << "plot,group,version,shared,setting,seed,dice\n";
  auto trace = [&](const std::string& plot, const std::string& group, const SweepRow& r) {
    points << plot << ',' << group << ',' << to_string(r.cell.version) << ',' << r.cell.shared.to_string() << ','
           << r.cell.setting() << ',' << r.cell.seed << ',' << fmt(r.metrics.dice) << '\n';
  };

  // Box plots over v1-v3 cells, per shared set and per corruption.
  std::set<std::string> seen_sets;
  for (const auto* r : ok) {
    if (is_recon_version(r->cell.version)) seen_sets.insert(r->cell.shared.to_string());
  }
  for (const auto& l : sets) {
    if (!seen_sets.count(l)) continue;
    std::vector<double> values;
    for (const auto* r : ok) {
      if (is_recon_version(r->cell.version) && r->cell.shared.to_string() == l) {
        values.push_back(r->metrics.dice);
        trace("box_by_shared", l, *r);
      }
    }
    bundle.by_shared.push_back(box_stats(l, values));
  }
  for (auto c : {Corruption::none, Corruption::noise, Corruption::shuffle}) {
    std::vector<double> values;
    const std::string name(to_string(c));
    for (const auto* r : ok) {
      if (is_recon_version(r->cell.version) && r->cell.corruption == c) {
        values.push_back(r->metrics.dice);
        trace("box_by_corruption", name, *r);
      }
    }
    if (!values.empty()) bundle.by_corruption.push_back(box_stats(name, values));
  }

  // Mean Dice per (version, L) for the version comparison.
  std::map<std::pair<Version, std::string>, std::pair<double, int>> version_mean;
  for (const auto* r : ok) {
    if (!is_recon_version(r->cell.version)) continue;
    auto& m = version_mean[{r->cell.version, r->cell.shared.to_string()}];
    m.first += r->metrics.dice;
    m.second += 1;
    trace("version_lines", std::string(to_string(r->cell.version)) + "@" + r->cell.shared.to_string(), *r);
  }
  auto mean_of = [&](Version v, const std::string& l) -> std::optional<double> {
    const auto it = version_mean.find({v, l});
    if (it == version_mean.end()) return std::nullopt;
    return it->second.first / it->second.second;
  };
  std::vector<std::string> line_sets;
  for (const auto& l : sets) {
    for (auto v : {Version::v1, Version::v2, Version::v3}) {
      if (mean_of(v, l)) {
        line_sets.push_back(l);
        break;
      }
    }
  }
  std::ostringstream lines;
  lines << "version,shared,mean_dice,n\n";
  std::vector<Series> version_series;
  for (auto v : {Version::v1, Version::v2, Version::v3}) {
    Series s{std::string(to_string(v)), {}};
    for (const auto& l : line_sets) {
      const auto m = mean_of(v, l);
      s.values.push_back(m);
      if (m) lines << to_string(v) << ',' << l << ',' << fmt(*m) << ',' << version_mean[{v, l}].second << '\n';
    }
    version_series.push_back(std::move(s));
  }

  for (const auto& [lo, hi] : {std::pair{Version::v1, Version::v2}, std::pair{Version::v2, Version::v3}}) {
    OrderingResult o{lo, hi, 0, 0};
    for (const auto& l : line_sets) {
      const auto a = mean_of(lo, l);
      const auto b = mean_of(hi, l);
      if (!a || !b) continue;
      ++o.compared;
      if (*b >= *a - options.epsilon) ++o.holds;
    }
    bundle.ordering.push_back(o);
  }

  // Theta sensitivity over v4 cells.
  std::map<std::string, std::map<std::string, std::pair<double, int>>> theta_acc;
  std::vector<std::string> theta_order;
  for (const auto* r : ok) {
    if (r->cell.version != Version::v4) continue;
    const auto t = r->cell.setting();
    if (!theta_acc.count(t)) theta_order.push_back(t);
    auto& m = theta_acc[t][r->cell.shared.to_string()];
    m.first += r->metrics.dice;
    m.second += 1;
    trace("theta_sensitivity", t + "@" + r->cell.shared.to_string(), *r);
  }
  std::sort(theta_order.begin(), theta_order.end(), [](const std::string& a, const std::string& b) {
    const bool la = a == "learnable", lb = b == "learnable";
    if (la != lb) return lb;
    return a < b;
  });
  std::ostringstream theta;
  theta << "theta";
  for (const auto& l : sets) theta << ",L=" << l;
  theta << ",mean\n";
  std::vector<Series> theta_series;
  for (const auto& t : theta_order) {
    theta << t;
    double sum = 0.0;
    int n = 0;
    Series s{"θ=" + t, {}};
    for (const auto& l : sets) {
      theta << ',';
      const auto& m = theta_acc[t];
      if (const auto it = m.find(l); it != m.end()) {
        const double v = it->second.first / it->second.second;
        theta << fmt(v);
        sum += v;
        ++n;
        s.values.push_back(v);
      } else {
        s.values.push_back(std::nullopt);
      }
    }
    theta << ',' << (n > 0 ? fmt(sum / n) : std::string()) << '\n';
    theta_series.push_back(std::move(s));
  }

  // Completeness against the full grid for every seed present.
  std::set<uint64_t> seeds;
  for (const auto& r : rows) seeds.insert(r.cell.seed);
  if (seeds.empty()) seeds.insert(0);
  std::set<std::tuple<std::string, std::string, std::string, uint64_t>> present;
  for (const auto* r : ok) {
    present.insert({std::string(to_string(r->cell.version)), r->cell.shared.to_string(), r->cell.setting(), r->cell.seed});
  }
  for (const auto& cell : table2_grid({seeds.begin(), seeds.end()}).cells) {
    const auto key = std::make_tuple(std::string(to_string(cell.version)), cell.shared.to_string(), cell.setting(), cell.seed);
    if (present.count(key)) continue;
    std::string status = "missing";
    for (const auto& r : rows) {
      if (r.status != "ok" && r.cell.version == cell.version && r.cell.shared == cell.shared &&
          r.cell.setting() == cell.setting() && r.cell.seed == cell.seed) {
        status = r.status;
      }
    }
    bundle.warnings.push_back(status + ": version=" + std::string(to_string(cell.version)) +
                              " L=" + cell.shared.to_string() + " setting=" + cell.setting() +
                              " seed=" + std::to_string(cell.seed));
  }

  auto write_text = [&](const std::string& name, const std::string& text) {
    const auto path = output_dir / name;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
    bundle.files.push_back(path);
  };
  write_box_csv(output_dir / "box_by_shared.csv", "shared", bundle.by_shared);
  bundle.files.push_back(output_dir / "box_by_shared.csv");
  write_box_csv(output_dir / "box_by_corruption.csv", "corruption", bundle.by_corruption);
  bundle.files.push_back(output_dir / "box_by_corruption.csv");
  write_text("version_lines.csv", lines.str());
  write_text("theta_sensitivity.csv", theta.str());
  write_text("points.csv", points.str());
  std::ostringstream ordering;
  ordering << "# v_lo<v_hi holds at L when mean(v_hi) >= mean(v_lo) - " << fmt(options.epsilon) << '\n';
  for (const auto& o : bundle.ordering) ordering << o.summary() << '\n';
  write_text("ordering.txt", ordering.str());
  std::ostringstream warn;
  for (const auto& w : bundle.warnings) warn << w << '\n';
  write_text("warnings.txt", warn.str());

  write_box_svg(output_dir / "box_by_shared.svg", "Dice per shared-stage set (v1-v3)", bundle.by_shared);
  write_box_svg(output_dir / "box_by_corruption.svg", "Dice per corruption (v1-v3)", bundle.by_corruption);
  write_line_svg(output_dir / "version_lines.svg", "Mean Dice per version and shared set", line_sets, version_series);
  write_line_svg(output_dir / "theta_sensitivity.svg", "v4 Dice per theta and shared set", sets, theta_series);
  for (const char* f : {"box_by_shared.svg", "box_by_corruption.svg", "version_lines.svg", "theta_sensitivity.svg"}) {
    bundle.files.push_back(output_dir / f);
  }
  return bundle;
}

ReportBundle emit_report(const std::filesystem::path& sweep_csv, const std::filesystem::path& output_dir,
                         const ReportOptions& options) {
  return emit_report(read_sweep_csv(sweep_csv), output_dir, options);
}

}  // namespace mirror
