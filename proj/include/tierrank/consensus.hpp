#pragma once

// Agreement-threshold filtering: drop items whose modal-bucket agreement is
// below a threshold until alpha reaches the target.

#include "tierrank/metrics.hpp"
#include "tierrank/types.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

namespace tierrank {

/// Tolerance for "agreement >= threshold", so that 6/9 >= 0.57 and similar
/// comparisons are not decided by representation error.
inline constexpr double kAgreementEpsilon = 1e-9;
inline constexpr double kDefaultTargetAlpha = 0.667;
inline constexpr double kDefaultSweepStep = 0.01;

/// Share of ratings in the most frequent bucket.
double item_agreement(std::span<const QualityBucket> ratings);

/// Agreement per candidate over all of its ratings in the dataset.
std::map<CandidateHash, double> agreement_by_item(const StudyDataset& dataset);

/// Candidates with agreement >= threshold (minus epsilon).
std::set<CandidateHash> retain_at(const StudyDataset& dataset, double threshold);

struct SweepPoint {
    double threshold = 0.0;
    int minAgreeingAssessors = 0;
    std::size_t retainedItems = 0;
    double retentionRatio = 0.0;
    std::optional<double> alpha;
};

/// Thresholds 0, step, 2*step, ... up to 1 inclusive.
std::vector<SweepPoint> sweep(const StudyDataset& dataset, AlphaLevel level = AlphaLevel::Ordinal,
                              double step = kDefaultSweepStep);

struct RetentionCount {
    std::size_t count = 0;
    std::size_t total = 0;
    double ratio = 0.0;
};

struct BucketRetention {
    std::size_t before = 0;
    std::size_t after = 0;
};

struct FilterOutcome {
    double chosenThreshold = 0.0;
    std::set<CandidateHash> retainedItemHashes;
    std::vector<Assessment> retainedAssessments;
    double alpha = 0.0;
    std::map<ModelLabel, RetentionCount> perModelRetention;
    std::map<QualityBucket, BucketRetention> perBucketRetention;
};

/// Thrown when no sweep point reaches the target alpha.
class InfeasibleThresholdError : public std::runtime_error {
public:
    InfeasibleThresholdError(double target, std::optional<double> bestAlpha);

    double target() const noexcept { return target_; }
    std::optional<double> bestAlpha() const noexcept { return best_; }

private:
    double target_;
    std::optional<double> best_;
};

/// Retention bookkeeping for an arbitrary retained set.
FilterOutcome materialise_outcome(const StudyDataset& dataset, const std::set<CandidateHash>& retained,
                                  double threshold, double alpha);

/// Smallest threshold whose alpha reaches `targetAlpha`, with its retained data.
FilterOutcome select_threshold(const StudyDataset& dataset, std::span<const SweepPoint> sweep,
                               double targetAlpha = kDefaultTargetAlpha);

}  // namespace tierrank
