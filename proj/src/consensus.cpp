#include "tierrank/consensus.hpp"

#include "tierrank/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace tierrank {

double item_agreement(std::span<const QualityBucket> ratings) {
    if (ratings.empty()) throw ValidationError("item_agreement requires at least one rating");
    std::array<std::size_t, 4> counts{};
    for (auto b : ratings) ++counts[static_cast<std::size_t>(ordinal(b))];
    const auto modal = *std::max_element(counts.begin(), counts.end());
    return static_cast<double>(modal) / static_cast<double>(ratings.size());
}

std::map<CandidateHash, double> agreement_by_item(const StudyDataset& dataset) {
    std::unordered_map<CandidateHash, std::vector<QualityBucket>> ratings;
    for (const auto& a : dataset.assessments) ratings[a.candidateHash].push_back(a.bucket);
    std::map<CandidateHash, double> out;
    for (const auto& c : dataset.candidates) {
        auto it = ratings.find(c.candidateHash);
        if (it != ratings.end()) out.emplace(c.candidateHash, item_agreement(it->second));
    }
    return out;
}

namespace {

std::set<CandidateHash> retain(const std::map<CandidateHash, double>& agreement, double threshold) {
    std::set<CandidateHash> out;
    for (const auto& [hash, value] : agreement) {
        if (value >= threshold - kAgreementEpsilon) out.insert(hash);
    }
    return out;
}

std::optional<double> alpha_or_undefined(const StudyDataset& dataset, const std::set<CandidateHash>& retained,
                                         AlphaLevel level) {
    if (retained.empty()) return std::nullopt;
    try {
        return krippendorff_alpha(ratings_matrix(dataset, retained), level).value;
    } catch (const UndefinedMetricError&) {
        return std::nullopt;
    }
}

}  // namespace

std::set<CandidateHash> retain_at(const StudyDataset& dataset, double threshold) {
    return retain(agreement_by_item(dataset), threshold);
}

std::vector<SweepPoint> sweep(const StudyDataset& dataset, AlphaLevel level, double step) {
    if (!(step > 0.0) || step > 1.0) throw ValidationError("sweep step must lie in (0, 1]");
    std::vector<double> thresholds;
    for (long i = 0;; ++i) {
        const double t = static_cast<double>(i) * step;
        if (t > 1.0 + 1e-12) break;
        thresholds.push_back(std::min(t, 1.0));
    }
    if (thresholds.back() < 1.0) thresholds.push_back(1.0);

    const auto agreement = agreement_by_item(dataset);
    const std::size_t total = dataset.candidates.size();
    const double assessorCount = static_cast<double>(dataset.assessors.size());

    std::vector<SweepPoint> points;
    points.reserve(thresholds.size());
    std::optional<std::set<CandidateHash>> previous;
    std::optional<double> previousAlpha;
    for (double t : thresholds) {
        auto retained = retain(agreement, t);
        SweepPoint p;
        p.threshold = t;
        p.minAgreeingAssessors = static_cast<int>(std::ceil(t * assessorCount - kAgreementEpsilon));
        p.retainedItems = retained.size();
        p.retentionRatio = total == 0 ? 0.0 : static_cast<double>(retained.size()) / static_cast<double>(total);
        // Alpha is reused while the retained set is unchanged.
        p.alpha = previous && *previous == retained ? previousAlpha : alpha_or_undefined(dataset, retained, level);
        previousAlpha = p.alpha;
        previous = std::move(retained);
        points.push_back(p);
    }
    return points;
}

InfeasibleThresholdError::InfeasibleThresholdError(double target, std::optional<double> bestAlpha)
    : std::runtime_error([&] {
          std::ostringstream os;
          os << "no agreement threshold reaches alpha >= " << target << "; best achieved ";
          if (bestAlpha) os << *bestAlpha; else os << "undefined";
          return os.str();
      }()),
      target_(target),
      best_(bestAlpha) {}

FilterOutcome materialise_outcome(const StudyDataset& dataset, const std::set<CandidateHash>& retained,
                                  double threshold, double alpha) {
    FilterOutcome out;
    out.chosenThreshold = threshold;
    out.retainedItemHashes = retained;
    out.alpha = alpha;

    for (const auto& c : dataset.candidates) {
        auto& r = out.perModelRetention[c.generatorModel];
        ++r.total;
        if (retained.count(c.candidateHash)) ++r.count;
    }
    for (auto& [model, r] : out.perModelRetention) {
        r.ratio = r.total == 0 ? 0.0 : static_cast<double>(r.count) / static_cast<double>(r.total);
    }

    for (auto b : {QualityBucket::Good, QualityBucket::Fair, QualityBucket::Poor}) out.perBucketRetention[b] = {};
    for (const auto& a : dataset.assessments) {
        auto& r = out.perBucketRetention[a.bucket];
        ++r.before;
        if (retained.count(a.candidateHash)) {
            ++r.after;
            out.retainedAssessments.push_back(a);
        }
    }
    return out;
}

FilterOutcome select_threshold(const StudyDataset& dataset, std::span<const SweepPoint> sweep, double targetAlpha) {
    if (sweep.empty()) throw ValidationError("select_threshold requires a non-empty sweep");
    if (!(targetAlpha > 0.0) || targetAlpha > 1.0) throw ValidationError("target alpha must lie in (0, 1]");

    std::optional<double> best;
    const SweepPoint* chosen = nullptr;
    for (const auto& p : sweep) {
        if (!p.alpha) continue;
        if (!best || *p.alpha > *best) best = p.alpha;
        if (*p.alpha >= targetAlpha && (chosen == nullptr || p.threshold < chosen->threshold)) chosen = &p;
    }
    if (chosen == nullptr) throw InfeasibleThresholdError(targetAlpha, best);
    return materialise_outcome(dataset, retain_at(dataset, chosen->threshold), chosen->threshold, *chosen->alpha);
}

}  // namespace tierrank
