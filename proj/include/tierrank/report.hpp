#pragma once

// Workflow stages behind the CLI and the files they leave in {study}/reports.
//
//   filter   sweep.csv, filter_outcome.json
//   analyze  analysis.json, bucket_counts.csv, model_retention.csv,
//            rating_shares.csv, spearman_matrix.csv, kendall_matrix.csv,
//            rank_boxplot.csv, rank_points.csv, regression.csv
//   report   report.md

#include "tierrank/analysis.hpp"
#include "tierrank/consensus.hpp"
#include "tierrank/metrics.hpp"
#include "tierrank/store.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace tierrank {

nlohmann::json to_json_value(const SweepPoint& p);
nlohmann::json to_json_value(const FilterOutcome& o);
FilterOutcome filter_outcome_from_json(const nlohmann::json& j);
nlohmann::json to_json_value(const ModelSummary& s);
nlohmann::json to_json_value(const PairwiseMatrix& m);
nlohmann::json to_json_value(const RegressionFit& f);
nlohmann::json to_json_value(const RankDistribution& d);

/// (threshold, alpha, retention) rows; undefined alpha is an empty field.
std::string sweep_csv(const std::vector<SweepPoint>& sweep);
std::string matrix_csv(const PairwiseMatrix& m);

/// "threadId/generator" cells still lacking a candidate.
std::vector<std::string> missing_generation_cells(const StudyStore& store);
/// "threadId/assessorId" cells still lacking an assessment group.
std::vector<std::string> missing_assessment_cells(const StudyStore& store);

struct FilterStageResult {
    std::vector<SweepPoint> sweep;
    FilterOutcome outcome;
};

/// Requires every assessor to have assessed every thread. Writes sweep.csv
/// before selecting, so an infeasible target still leaves the curve behind.
FilterStageResult run_filter_stage(const StudyStore& store, double targetAlpha, double step = kDefaultSweepStep);

struct AnalysisBundle {
    std::vector<ModelSummary> summaries;
    PairwiseMatrix spearman;
    PairwiseMatrix kendall;
    std::optional<RegressionFit> regression;
    std::vector<RankDistribution> rankDistribution;
};

/// Requires filter_outcome.json.
AnalysisBundle run_analyze_stage(const StudyStore& store);

/// Requires analysis.json. Returns the path of report.md.
std::filesystem::path run_report_stage(const StudyStore& store);

/// Config plus the full replayed dataset.
nlohmann::json export_study(const StudyStore& store);

}  // namespace tierrank
