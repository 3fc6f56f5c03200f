#pragma once

#include "tierrank/types.hpp"

#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tierrank {

/// Five-number summary plus moments of a set of rank positions.
///
/// Quartiles are medians of the lower and upper halves, where the middle
/// value of an odd-sized sample belongs to neither half; ranks 1..11 give
/// Q1 = 3, median = 6, Q3 = 9. Standard deviation uses the n-1 denominator.
struct RankStats {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double stddev = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;
};

RankStats rank_stats(std::span<const double> ranks);

struct ModelSummary {
    ModelLabel model;
    std::map<QualityBucket, double> ratingShares;
    std::size_t retainedItems = 0;
    std::size_t totalItems = 0;
    double retentionRatio = 0.0;
    /// Over retained ranking positions, using original 1..K positions.
    RankStats rankStats;
    double goodProportion = 0.0;
    /// No retained items: shares and stats are meaningless and the model is
    /// left out of the regression.
    bool empty = false;
};

/// One summary per generator model, ordered by mean rank ascending (empty
/// summaries last). `retained` empty means every candidate.
std::vector<ModelSummary> model_summaries(const StudyDataset& dataset, const std::set<CandidateHash>& retained);

struct RegressionFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rSquared = 0.0;
    double pearson = 0.0;
    double spearman = 0.0;
    std::size_t n = 0;
    /// Observed minus fitted; positive means above the line.
    std::map<ModelLabel, double> residuals;
    /// (mean rank, Good proportion) per model.
    std::map<ModelLabel, std::pair<double, double>> points;
};

/// Least squares of Good proportion on mean rank over non-empty summaries.
RegressionFit fit_rating_rank_regression(std::span<const ModelSummary> summaries);

struct RankPoint {
    int rank = 0;
    QualityBucket bucket = QualityBucket::Poor;
};

struct RankDistribution {
    ModelLabel model;
    RankStats stats;
    std::vector<RankPoint> points;
};

/// Boxplot data per model, ordered by median then mean.
std::vector<RankDistribution> rank_distribution_table(const StudyDataset& dataset,
                                                      const std::set<CandidateHash>& retained);

}  // namespace tierrank
