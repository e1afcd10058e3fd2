#include "persim/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace persim {

namespace {

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_fixed(double v, int digits = 2) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

constexpr const char* kRawSchema = "# persim-raw/v1";
constexpr const char* kRawHeader =
    "repetition,algorithm,mode,agent_seed,step,mean_R,min_R,max_R,n_excluded_states";
constexpr const char* kAggSchema = "# persim-agg/v1";
constexpr const char* kAggHeader = "algorithm,mode,step,mean_R,min_R,max_R,n_runs";

std::string series_color(const std::string& algorithm) {
  if (algorithm == "a2c") return "#1f77b4";
  if (algorithm == "dqn") return "#d62728";
  if (algorithm == "ppo") return "#2ca02c";
  if (algorithm == "uniform") return "#7f7f7f";
  return "#9467bd";
}

// Shared plotting frame: fixed pixel canvas, linear data-to-pixel maps, axis
// ticks. All coordinates are emitted with two decimals so output is stable.
struct Frame {
  double width = 880, height = 520;
  double left = 70, right = 20, top = 40, bottom = 55;
  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;

  double px(double x) const {
    return left + (x - x_lo) / (x_hi - x_lo) * (width - left - right);
  }
  double py(double y) const {
    return height - bottom - (y - y_lo) / (y_hi - y_lo) * (height - top - bottom);
  }

  void open(std::ostringstream& svg, const std::string& title, const std::string& x_label,
            const std::string& y_label) const {
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << width - left - right
        << "\" height=\"" << height - top - bottom
        << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << (left + (width - right)) / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << x_label
        << "</text>\n";
    svg << "<text x=\"18\" y=\"" << (top + height - bottom) / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 18 " << (top + height - bottom) / 2 << ")\">" << y_label
        << "</text>\n";
  }

  void ticks(std::ostringstream& svg, int n_x, int n_y) const {
    for (int i = 0; i <= n_x; ++i) {
      const double x = x_lo + (x_hi - x_lo) * i / n_x;
      const double xp = px(x);
      svg << "<line x1=\"" << fmt_fixed(xp) << "\" y1=\"" << fmt_fixed(height - bottom)
          << "\" x2=\"" << fmt_fixed(xp) << "\" y2=\"" << fmt_fixed(height - bottom + 5)
          << "\" stroke=\"#333333\"/>\n";
      char label[32];
      std::snprintf(label, sizeof(label), "%g", x);
      svg << "<text x=\"" << fmt_fixed(xp) << "\" y=\"" << fmt_fixed(height - bottom + 20)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << label
          << "</text>\n";
    }
    for (int i = 0; i <= n_y; ++i) {
      const double y = y_lo + (y_hi - y_lo) * i / n_y;
      const double yp = py(y);
      svg << "<line x1=\"" << fmt_fixed(left - 5) << "\" y1=\"" << fmt_fixed(yp) << "\" x2=\""
          << fmt_fixed(left) << "\" y2=\"" << fmt_fixed(yp) << "\" stroke=\"#333333\"/>\n";
      char label[32];
      std::snprintf(label, sizeof(label), "%.2g", y);
      svg << "<text x=\"" << fmt_fixed(left - 9) << "\" y=\"" << fmt_fixed(yp + 4)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << label
          << "</text>\n";
    }
  }

  void hline(std::ostringstream& svg, double y, const std::string& stroke,
             const std::string& dash) const {
    if (y < y_lo || y > y_hi) return;
    svg << "<line x1=\"" << fmt_fixed(px(x_lo)) << "\" y1=\"" << fmt_fixed(py(y)) << "\" x2=\""
        << fmt_fixed(px(x_hi)) << "\" y2=\"" << fmt_fixed(py(y)) << "\" stroke=\"" << stroke
        << "\" stroke-width=\"1\"";
    if (!dash.empty()) svg << " stroke-dasharray=\"" << dash << "\"";
    svg << "/>\n";
  }
};

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out << content;
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::vector<RawRow> to_raw_rows(const std::vector<RunSeries>& runs) {
  std::vector<RawRow> rows;
  for (const RunSeries& run : runs) {
    for (const EvalRecord& rec : run.records) {
      RawRow row;
      row.repetition = run.key.repetition;
      row.algorithm = algorithm_name(run.key.algorithm);
      row.mode = mode_name(run.key.mode);
      row.agent_seed = run.key.agent_seed;
      row.step = rec.step;
      row.mean_r = rec.mean_r;
      row.min_r = rec.min_r;
      row.max_r = rec.max_r;
      row.n_excluded = rec.n_excluded;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<AggregateRow> aggregate_raw_rows(const std::vector<RawRow>& rows) {
  std::map<std::tuple<std::string, std::string, long>, AggregateRow> groups;
  for (const RawRow& row : rows) {
    const auto key = std::make_tuple(row.algorithm, row.mode, row.step);
    auto [it, inserted] = groups.try_emplace(key);
    AggregateRow& agg = it->second;
    if (inserted) {
      agg.algorithm = row.algorithm;
      agg.mode = row.mode;
      agg.step = row.step;
      agg.min_r = row.min_r;
      agg.max_r = row.max_r;
    } else {
      agg.min_r = std::min(agg.min_r, row.min_r);
      agg.max_r = std::max(agg.max_r, row.max_r);
    }
    agg.mean_r += row.mean_r;
    agg.n_runs += 1;
  }
  std::vector<AggregateRow> out;
  out.reserve(groups.size());
  for (auto& [key, agg] : groups) {
    agg.mean_r /= agg.n_runs;
    out.push_back(agg);
  }
  return out;
}

void write_raw_csv(std::ostream& out, const std::vector<RawRow>& rows) {
  out << kRawSchema << '\n' << kRawHeader << '\n';
  for (const RawRow& r : rows) {
    out << r.repetition << ',' << r.algorithm << ',' << r.mode << ',' << r.agent_seed << ','
        << r.step << ',' << fmt_g17(r.mean_r) << ',' << fmt_g17(r.min_r) << ','
        << fmt_g17(r.max_r) << ',' << r.n_excluded << '\n';
  }
}

std::vector<RawRow> read_raw_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line)[0] != kRawSchema)
    throw std::runtime_error("raw csv: missing schema line '" + std::string(kRawSchema) + "'");
  if (!std::getline(in, line) || line != kRawHeader)
    throw std::runtime_error("raw csv: unexpected header");
  std::vector<RawRow> rows;
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 9)
      throw std::runtime_error("raw csv: line " + std::to_string(line_no) + " has " +
                               std::to_string(fields.size()) + " fields, expected 9");
    try {
      RawRow row;
      row.repetition = std::stoi(fields[0]);
      row.algorithm = fields[1];
      row.mode = fields[2];
      row.agent_seed = std::stoi(fields[3]);
      row.step = std::stol(fields[4]);
      row.mean_r = std::stod(fields[5]);
      row.min_r = std::stod(fields[6]);
      row.max_r = std::stod(fields[7]);
      row.n_excluded = std::stoi(fields[8]);
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      throw std::runtime_error("raw csv: malformed line " + std::to_string(line_no));
    }
  }
  return rows;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << kAggSchema << '\n' << kAggHeader << '\n';
  for (const AggregateRow& r : rows) {
    out << r.algorithm << ',' << r.mode << ',' << r.step << ',' << fmt_g17(r.mean_r) << ','
        << fmt_g17(r.min_r) << ',' << fmt_g17(r.max_r) << ',' << r.n_runs << '\n';
  }
}

std::string render_curves_svg(const std::vector<AggregateRow>& rows) {
  // Series keyed (algorithm, mode) in name order; clustered curves dashed.
  std::map<std::pair<std::string, std::string>, std::vector<const AggregateRow*>> series;
  long max_step = 1;
  double y_min = 0, y_max = 1;
  for (const AggregateRow& r : rows) {
    series[{r.algorithm, r.mode}].push_back(&r);
    max_step = std::max(max_step, r.step);
    y_min = std::min(y_min, r.mean_r);
    y_max = std::max(y_max, r.mean_r);
  }
  for (auto& [key, pts] : series)
    std::sort(pts.begin(), pts.end(),
              [](const AggregateRow* a, const AggregateRow* b) { return a->step < b->step; });

  Frame f;
  f.x_lo = 0;
  f.x_hi = static_cast<double>(max_step);
  f.y_lo = y_min - 0.05 * (y_max - y_min + 0.1);
  f.y_hi = y_max + 0.05 * (y_max - y_min + 0.1);

  std::ostringstream svg;
  f.open(svg, "Learning curves (normalized return)", "training step", "normalized return");
  f.ticks(svg, 5, 6);
  f.hline(svg, 0.0, "#aaaaaa", "2,3");  // uniform-random baseline
  f.hline(svg, 1.0, "#aaaaaa", "2,3");  // optimal policy

  int legend_index = 0;
  for (const auto& [key, pts] : series) {
    const auto& [algorithm, mode] = key;
    const std::string color = series_color(algorithm);
    const bool dashed = mode == "clustered";
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\"";
    if (dashed) svg << " stroke-dasharray=\"7,4\"";
    svg << " points=\"";
    for (const AggregateRow* p : pts)
      svg << fmt_fixed(f.px(static_cast<double>(p->step))) << ',' << fmt_fixed(f.py(p->mean_r))
          << ' ';
    svg << "\"/>\n";

    const double ly = f.top + 16 + 18 * legend_index;
    const double lx = f.width - f.right - 170;
    svg << "<line x1=\"" << fmt_fixed(lx) << "\" y1=\"" << fmt_fixed(ly - 4) << "\" x2=\""
        << fmt_fixed(lx + 28) << "\" y2=\"" << fmt_fixed(ly - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"1.8\"";
    if (dashed) svg << " stroke-dasharray=\"7,4\"";
    svg << "/>\n";
    svg << "<text x=\"" << fmt_fixed(lx + 34) << "\" y=\"" << fmt_fixed(ly)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << algorithm << ' ' << mode
        << "</text>\n";
    ++legend_index;
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_results(const ExperimentResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  const std::vector<RawRow> rows = to_raw_rows(result.runs);
  {
    std::ostringstream raw;
    write_raw_csv(raw, rows);
    atomic_write(out_dir / "raw.csv", raw.str());
  }
  {
    std::ostringstream agg;
    write_aggregate_csv(agg, aggregate_raw_rows(rows));
    atomic_write(out_dir / "agg.csv", agg.str());
  }
  atomic_write(out_dir / "curves.svg", render_curves_svg(result.aggregates));

  nlohmann::ordered_json manifest;
  manifest["schema"] = "persim-manifest/v1";
  manifest["name"] = result.config.name;
  manifest["version"] = kPersimVersion;
  manifest["master_seed"] = result.config.run.master_seed;
  manifest["config_hash"] = text_hash(result.config.raw_text);
  manifest["wall_seconds"] = result.wall_seconds;
  manifest["n_runs"] = result.runs.size();
  nlohmann::ordered_json aborted = nlohmann::ordered_json::array();
  for (const RunSeries& run : result.runs)
    if (run.aborted) aborted.push_back({{"run", run_label(run.key)}, {"error", run.error}});
  manifest["aborted_runs"] = aborted;
  manifest["outputs"] = {"raw.csv", "agg.csv", "curves.svg"};
  manifest["config"] = result.config.raw_text;
  atomic_write(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

void replot(const std::filesystem::path& result_dir) {
  std::ifstream in(result_dir / "raw.csv");
  if (!in) throw std::runtime_error("replot: cannot open " + (result_dir / "raw.csv").string());
  const std::vector<RawRow> rows = read_raw_csv(in);
  const std::vector<AggregateRow> aggregates = aggregate_raw_rows(rows);
  {
    std::ostringstream agg;
    write_aggregate_csv(agg, aggregates);
    atomic_write(result_dir / "agg.csv", agg.str());
  }
  atomic_write(result_dir / "curves.svg", render_curves_svg(aggregates));
}

void write_adjacent_table_csv(std::ostream& out, const Matrix& table) {
  out << "# persim-adjacent/v1\n";
  out << "state";
  for (int j = 0; j < table.cols; ++j) out << ",action_" << j;
  out << '\n';
  for (int i = 0; i < table.rows; ++i) {
    out << i;
    for (int j = 0; j < table.cols; ++j) out << ',' << fmt_g17(table(i, j));
    out << '\n';
  }
}

std::string render_adjacent_table_svg(const Matrix& table) {
  Frame f;
  f.x_lo = -0.5;
  f.x_hi = table.cols - 0.5;
  f.y_lo = -1.05;
  f.y_hi = 1.05;
  std::ostringstream svg;
  f.open(svg, "Rewards on adjacent states", "action index", "reward");
  f.ticks(svg, std::min(table.cols, 10), 4);
  f.hline(svg, 0.0, "#aaaaaa", "2,3");
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  for (int i = 0; i < table.rows; ++i) {
    const std::string color = palette[i % 10];
    for (int j = 0; j < table.cols; ++j) {
      svg << "<circle cx=\"" << fmt_fixed(f.px(j)) << "\" cy=\"" << fmt_fixed(f.py(table(i, j)))
          << "\" r=\"4\" fill=\"" << color << "\" fill-opacity=\"0.8\"/>\n";
    }
    const double ly = f.top + 16 + 16 * i;
    svg << "<circle cx=\"" << fmt_fixed(f.width - f.right - 120) << "\" cy=\""
        << fmt_fixed(ly - 4) << "\" r=\"4\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << fmt_fixed(f.width - f.right - 110) << "\" y=\"" << fmt_fixed(ly)
        << "\" font-family=\"sans-serif\" font-size=\"12\">state " << i << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_cluster_correlation_csv(std::ostream& out, const ClusterCorrelation& corr) {
  out << "# persim-rho/v1\n";
  out << "cluster,members,pairs,defined,rho,flag\n";
  for (const ClusterCorrelationEntry& e : corr.entries) {
    out << e.cluster << ',' << e.members << ',' << e.pairs << ',' << (e.defined ? 1 : 0) << ',';
    if (e.defined) out << fmt_g17(e.rho);
    out << ',' << e.flag << '\n';
  }
}

std::string render_cluster_correlation_svg(const ClusterCorrelation& corr) {
  Frame f;
  f.x_lo = -0.5;
  f.x_hi = static_cast<double>(corr.entries.size()) - 0.5;
  f.y_lo = -1.05;
  f.y_hi = 1.05;
  std::ostringstream svg;
  f.open(svg, "Within-cluster state/reward distance correlation", "cluster index",
         "Pearson correlation");
  f.ticks(svg, std::min<int>(static_cast<int>(corr.entries.size()), 10), 4);
  f.hline(svg, 0.0, "#aaaaaa", "2,3");
  for (const ClusterCorrelationEntry& e : corr.entries) {
    if (!e.defined) {
      svg << "<text x=\"" << fmt_fixed(f.px(e.cluster)) << "\" y=\"" << fmt_fixed(f.py(0) + 4)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
          << "fill=\"#bbbbbb\">x</text>\n";
      continue;
    }
    svg << "<circle cx=\"" << fmt_fixed(f.px(e.cluster)) << "\" cy=\"" << fmt_fixed(f.py(e.rho))
        << "\" r=\"4\" fill=\"#1f77b4\" fill-opacity=\"0.85\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace persim
