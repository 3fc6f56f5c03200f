#include "tierrank/analysis.hpp"

#include "tierrank/errors.hpp"
#include "tierrank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace tierrank {

namespace {

double median_of_sorted(std::span<const double> v) {
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

struct ModelData {
    std::size_t totalItems = 0;
    std::set<CandidateHash> retainedItems;
    std::vector<double> ranks;
    std::vector<RankPoint> points;
    std::map<QualityBucket, std::size_t> buckets;
};

std::map<ModelLabel, ModelData> collect(const StudyDataset& dataset, const std::set<CandidateHash>& retained) {
    std::map<ModelLabel, ModelData> models;
    std::unordered_map<CandidateHash, const SubjectCandidate*> byHash;
    for (const auto& c : dataset.candidates) {
        byHash.emplace(c.candidateHash, &c);
        auto& m = models[c.generatorModel];
        ++m.totalItems;
        if (retained.empty() || retained.count(c.candidateHash)) m.retainedItems.insert(c.candidateHash);
    }
    for (const auto& a : dataset.assessments) {
        auto it = byHash.find(a.candidateHash);
        if (it == byHash.end()) continue;
        if (!retained.empty() && !retained.count(a.candidateHash)) continue;
        auto& m = models[it->second->generatorModel];
        m.ranks.push_back(a.globalRank);
        m.points.push_back({a.globalRank, a.bucket});
        ++m.buckets[a.bucket];
    }
    return models;
}

}  // namespace

RankStats rank_stats(std::span<const double> ranks) {
    RankStats s;
    s.count = ranks.size();
    if (ranks.empty()) return s;
    std::vector<double> sorted(ranks.begin(), ranks.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
    double ss = 0.0;
    for (double r : sorted) ss += (r - s.mean) * (r - s.mean);
    s.stddev = sorted.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    s.median = median_of_sorted(sorted);
    s.min = sorted.front();
    s.max = sorted.back();
    const std::size_t half = sorted.size() / 2;
    if (half == 0) {
        s.q1 = s.q3 = sorted.front();
    } else {
        s.q1 = median_of_sorted(std::span<const double>(sorted).first(half));
        s.q3 = median_of_sorted(std::span<const double>(sorted).last(half));
    }
    return s;
}

std::vector<ModelSummary> model_summaries(const StudyDataset& dataset, const std::set<CandidateHash>& retained) {
    for (const auto& h : retained) {
        if (dataset.find_candidate(h) == nullptr) throw ValidationError("retained hash " + h.str() + " is not a study candidate");
    }
    std::vector<ModelSummary> out;
    for (const auto& [model, data] : collect(dataset, retained)) {
        ModelSummary s;
        s.model = model;
        s.totalItems = data.totalItems;
        s.retainedItems = data.retainedItems.size();
        s.retentionRatio = data.totalItems ? static_cast<double>(s.retainedItems) / static_cast<double>(data.totalItems) : 0.0;
        s.empty = s.retainedItems == 0 || data.ranks.empty();
        if (!s.empty) {
            const double ratings = static_cast<double>(data.ranks.size());
            for (auto b : {QualityBucket::Good, QualityBucket::Fair, QualityBucket::Poor}) {
                auto it = data.buckets.find(b);
                s.ratingShares[b] = it == data.buckets.end() ? 0.0 : static_cast<double>(it->second) / ratings;
            }
            s.goodProportion = s.ratingShares[QualityBucket::Good];
            s.rankStats = rank_stats(data.ranks);
        }
        out.push_back(std::move(s));
    }
    std::stable_sort(out.begin(), out.end(), [](const ModelSummary& a, const ModelSummary& b) {
        if (a.empty != b.empty) return !a.empty;
        return a.rankStats.mean < b.rankStats.mean;
    });
    return out;
}

RegressionFit fit_rating_rank_regression(std::span<const ModelSummary> summaries) {
    std::vector<double> x, y;
    std::vector<const ModelSummary*> used;
    for (const auto& s : summaries) {
        if (s.empty) continue;
        x.push_back(s.rankStats.mean);
        y.push_back(s.goodProportion);
        used.push_back(&s);
    }
    if (x.size() < 3) throw ValidationError("regression requires at least three non-empty model summaries");

    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw UndefinedMetricError("regression undefined: mean ranks have zero variance");

    RegressionFit fit;
    fit.n = x.size();
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.pearson = pearson_r(x, y).value;
    fit.spearman = spearman_rho(x, y).value;
    // For simple regression, 1 - SSres/SStot reduces to sxy^2 / (sxx syy).
    fit.rSquared = (sxy * sxy) / (sxx * syy);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& label = used[i]->model;
        fit.residuals[label] = y[i] - (fit.intercept + fit.slope * x[i]);
        fit.points[label] = {x[i], y[i]};
    }
    return fit;
}

std::vector<RankDistribution> rank_distribution_table(const StudyDataset& dataset,
                                                      const std::set<CandidateHash>& retained) {
    std::vector<RankDistribution> out;
    for (auto& [model, data] : collect(dataset, retained)) {
        RankDistribution d;
        d.model = model;
        d.stats = rank_stats(data.ranks);
        d.points = std::move(data.points);
        std::stable_sort(d.points.begin(), d.points.end(), [](const RankPoint& a, const RankPoint& b) { return a.rank < b.rank; });
        out.push_back(std::move(d));
    }
    std::stable_sort(out.begin(), out.end(), [](const RankDistribution& a, const RankDistribution& b) {
        if (a.stats.median != b.stats.median) return a.stats.median < b.stats.median;
        return a.stats.mean < b.stats.mean;
    });
    return out;
}

}  // namespace tierrank
