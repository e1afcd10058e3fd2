#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "persim/experiment.hpp"

namespace persim {

// Raw CSV schema (persim-raw/v1), one row per evaluation point per run:
//   repetition,algorithm,mode,agent_seed,step,mean_R,min_R,max_R,n_excluded_states
// Values are written with %.17g so parsing them back is loss-free; replot
// therefore reproduces the aggregate CSV and chart byte for byte.
struct RawRow {
  int repetition = 0;
  std::string algorithm;
  std::string mode;
  int agent_seed = 0;
  long step = 0;
  double mean_r = 0;
  double min_r = 0;
  double max_r = 0;
  int n_excluded = 0;
};

std::vector<RawRow> to_raw_rows(const std::vector<RunSeries>& runs);
std::vector<AggregateRow> aggregate_raw_rows(const std::vector<RawRow>& rows);

void write_raw_csv(std::ostream& out, const std::vector<RawRow>& rows);
std::vector<RawRow> read_raw_csv(std::istream& in);

// Aggregate CSV schema (persim-agg/v1):
//   algorithm,mode,step,mean_R,min_R,max_R,n_runs
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

// Learning curves: one polyline per (algorithm, mode), solid for full
// observations, dashed for clustered. Deterministic output for fixed input.
std::string render_curves_svg(const std::vector<AggregateRow>& rows);

// Writes raw.csv, agg.csv, curves.svg and manifest.json into out_dir
// (creating it); files are staged with a temp suffix and renamed, so a failed
// emit leaves no partial outputs behind.
void emit_results(const ExperimentResult& result, const std::filesystem::path& out_dir);

// Regenerates agg.csv and curves.svg from raw.csv alone.
void replot(const std::filesystem::path& result_dir);

// Diagnostics output (persim-adjacent/v1, persim-rho/v1 + charts).
void write_adjacent_table_csv(std::ostream& out, const Matrix& table);
std::string render_adjacent_table_svg(const Matrix& table);
void write_cluster_correlation_csv(std::ostream& out, const ClusterCorrelation& corr);
std::string render_cluster_correlation_svg(const ClusterCorrelation& corr);

}  // namespace persim
