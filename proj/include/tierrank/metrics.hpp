#pragma once

// Inter-rater reliability and correlation measures.
//
// Every function is pure. A statistic that is not defined for its input
// (zero variance, zero expected disagreement, nothing pairable) raises
// UndefinedMetricError rather than returning a placeholder; aggregate
// outputs (PairwiseMatrix, sweep points) carry std::nullopt instead.

#include "tierrank/types.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace tierrank {

/// Assessor-by-item table of ordinal codes; an absent cell is missing or filtered.
class RatingsMatrix {
public:
    RatingsMatrix() = default;
    RatingsMatrix(std::size_t assessors, std::size_t items);
    explicit RatingsMatrix(std::vector<std::vector<std::optional<int>>> cells);

    std::size_t assessors() const noexcept { return cells_.size(); }
    std::size_t items() const noexcept { return items_; }

    const std::optional<int>& at(std::size_t assessor, std::size_t item) const { return cells_.at(assessor).at(item); }
    void set(std::size_t assessor, std::size_t item, std::optional<int> value) { cells_.at(assessor).at(item) = value; }

private:
    std::size_t items_ = 0;
    std::vector<std::vector<std::optional<int>>> cells_;
};

/// Rows follow dataset.assessors, columns follow dataset.candidates restricted
/// to `scope` (all candidates when scope is empty).
RatingsMatrix ratings_matrix(const StudyDataset& dataset, const std::set<CandidateHash>& scope = {});

enum class AlphaLevel { Nominal, Ordinal };

struct MetricResult {
    double value = 0.0;
    /// Pairable values for alpha, paired observations otherwise.
    std::size_t n = 0;

    // alpha
    std::optional<double> observedDisagreement;
    std::optional<double> expectedDisagreement;
    // kendall
    std::optional<long long> concordant;
    std::optional<long long> discordant;
    // spearman
    std::optional<double> sumSquaredRankDiff;
};

/// Coincidence-matrix alpha. Units with fewer than two ratings are not pairable.
MetricResult krippendorff_alpha(const RatingsMatrix& matrix, AlphaLevel level = AlphaLevel::Ordinal);

enum class SpearmanMode {
    /// Mid-ranks, then product-moment correlation of the rank series.
    TieCorrected,
    /// 1 - 6 sum(d^2) / (n (n^2 - 1)); exact only without ties.
    Simplified,
};

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> mid_ranks(std::span<const double> values);

MetricResult spearman_rho(std::span<const double> x, std::span<const double> y,
                          SpearmanMode mode = SpearmanMode::TieCorrected);

/// Tau-a over all item pairs. Both inputs must be strict (tie-free) and of
/// equal length.
MetricResult kendall_tau(std::span<const double> rankA, std::span<const double> rankB);

/// Same, keyed by item; the two rankings must cover the same item set.
MetricResult kendall_tau(const std::map<CandidateHash, int>& rankA, const std::map<CandidateHash, int>& rankB);

MetricResult pearson_r(std::span<const double> x, std::span<const double> y);

enum class PairwiseMetric { SpearmanOnRatings, KendallOnRankings };

enum class KendallAggregation {
    /// Per-thread tau averaged with equal thread weight.
    PerThreadMean,
    /// Concordant/discordant counts pooled over all within-thread pairs.
    PooledPairs,
};

struct PairwiseMatrix {
    PairwiseMetric metric = PairwiseMetric::SpearmanOnRatings;
    std::vector<std::string> labels;
    std::vector<AssessorKind> kinds;
    /// Symmetric, unit diagonal; nullopt marks an undefined cell.
    std::vector<std::vector<std::optional<double>>> values;

    std::optional<double> humanHumanMean;
    std::optional<double> aiAiMean;
    std::optional<double> humanAiMean;
};

PairwiseMatrix pairwise_matrix(const StudyDataset& dataset, PairwiseMetric metric,
                               const std::set<CandidateHash>& scope = {},
                               KendallAggregation aggregation = KendallAggregation::PerThreadMean);

enum class TauAgreement { VeryHigh, Good, Moderate, Low };

std::string_view to_string(TauAgreement a) noexcept;

/// >= 0.80 very high, [0.60, 0.80) good, [0.40, 0.60) moderate, below low.
TauAgreement classify_tau_agreement(double tau);

std::string_view to_string(PairwiseMetric m) noexcept;

}  // namespace tierrank
