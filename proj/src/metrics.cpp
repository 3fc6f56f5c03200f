#include "tierrank/metrics.hpp"

#include "tierrank/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace tierrank {

RatingsMatrix::RatingsMatrix(std::size_t assessors, std::size_t items)
    : items_(items), cells_(assessors, std::vector<std::optional<int>>(items)) {}

RatingsMatrix::RatingsMatrix(std::vector<std::vector<std::optional<int>>> cells) : cells_(std::move(cells)) {
    items_ = cells_.empty() ? 0 : cells_.front().size();
    for (const auto& row : cells_) {
        if (row.size() != items_) throw ValidationError("ratings matrix rows must have equal length");
    }
}

RatingsMatrix ratings_matrix(const StudyDataset& dataset, const std::set<CandidateHash>& scope) {
    std::unordered_map<CandidateHash, std::size_t> column;
    for (const auto& c : dataset.candidates) {
        if (scope.empty() || scope.count(c.candidateHash)) column.emplace(c.candidateHash, column.size());
    }
    std::unordered_map<std::string, std::size_t> row;
    for (std::size_t i = 0; i < dataset.assessors.size(); ++i) row.emplace(dataset.assessors[i].assessorId, i);

    RatingsMatrix m(dataset.assessors.size(), column.size());
    for (const auto& a : dataset.assessments) {
        auto c = column.find(a.candidateHash);
        auto r = row.find(a.assessorId);
        if (c == column.end() || r == row.end()) continue;
        m.set(r->second, c->second, ordinal(a.bucket));
    }
    return m;
}

MetricResult krippendorff_alpha(const RatingsMatrix& matrix, AlphaLevel level) {
    // Distinct values observed in pairable units, in ascending order.
    std::vector<int> values;
    std::vector<std::vector<int>> units;
    for (std::size_t item = 0; item < matrix.items(); ++item) {
        std::vector<int> unit;
        for (std::size_t r = 0; r < matrix.assessors(); ++r) {
            if (const auto& v = matrix.at(r, item)) unit.push_back(*v);
        }
        if (unit.size() >= 2) {
            values.insert(values.end(), unit.begin(), unit.end());
            units.push_back(std::move(unit));
        }
    }
    if (units.empty()) throw UndefinedMetricError("alpha undefined: no unit has two or more ratings");
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    const std::size_t v = values.size();
    auto index_of = [&](int x) {
        return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), x) - values.begin());
    };

    // Coincidence matrix: each ordered pair of ratings within a unit
    // contributes 1/(m_u - 1).
    std::vector<std::vector<double>> coincidence(v, std::vector<double>(v, 0.0));
    for (const auto& unit : units) {
        std::vector<double> counts(v, 0.0);
        for (int x : unit) counts[index_of(x)] += 1.0;
        const double weight = 1.0 / static_cast<double>(unit.size() - 1);
        for (std::size_t c = 0; c < v; ++c) {
            for (std::size_t k = 0; k < v; ++k) {
                const double pairs = c == k ? counts[c] * (counts[c] - 1.0) : counts[c] * counts[k];
                coincidence[c][k] += pairs * weight;
            }
        }
    }
    std::vector<double> marginal(v, 0.0);
    for (std::size_t c = 0; c < v; ++c) marginal[c] = std::accumulate(coincidence[c].begin(), coincidence[c].end(), 0.0);
    const double n = std::accumulate(marginal.begin(), marginal.end(), 0.0);

    auto delta2 = [&](std::size_t c, std::size_t k) -> double {
        if (c == k) return 0.0;
        if (level == AlphaLevel::Nominal) return 1.0;
        const auto lo = std::min(c, k), hi = std::max(c, k);
        double span = 0.0;
        for (std::size_t g = lo; g <= hi; ++g) span += marginal[g];
        span -= (marginal[lo] + marginal[hi]) / 2.0;
        return span * span;
    };

    double observed = 0.0, expected = 0.0;
    for (std::size_t c = 0; c < v; ++c) {
        for (std::size_t k = 0; k < v; ++k) {
            const double d = delta2(c, k);
            observed += coincidence[c][k] * d;
            expected += marginal[c] * marginal[k] * d;
        }
    }
    observed /= n;
    expected /= n * (n - 1.0);
    if (expected == 0.0) throw UndefinedMetricError("alpha undefined: expected disagreement is zero");

    MetricResult out;
    out.n = static_cast<std::size_t>(std::llround(n));
    out.observedDisagreement = observed;
    out.expectedDisagreement = expected;
    out.value = 1.0 - observed / expected;
    return out;
}

std::vector<double> mid_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

namespace {

void require_paired(std::span<const double> x, std::span<const double> y, const char* what) {
    if (x.size() != y.size()) throw ValidationError(std::string(what) + ": series lengths differ");
    if (x.size() < 2) throw UndefinedMetricError(std::string(what) + " undefined: fewer than two pairs");
}

}  // namespace

MetricResult pearson_r(std::span<const double> x, std::span<const double> y) {
    require_paired(x, y, "pearson_r");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw UndefinedMetricError("pearson_r undefined: zero variance");
    MetricResult out;
    out.n = x.size();
    out.value = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    return out;
}

MetricResult spearman_rho(std::span<const double> x, std::span<const double> y, SpearmanMode mode) {
    require_paired(x, y, "spearman_rho");
    const auto rx = mid_ranks(x);
    const auto ry = mid_ranks(y);
    double sumD2 = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) sumD2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);

    const bool constant = std::all_of(rx.begin(), rx.end(), [&](double r) { return r == rx.front(); }) ||
                          std::all_of(ry.begin(), ry.end(), [&](double r) { return r == ry.front(); });
    if (constant) throw UndefinedMetricError("spearman_rho undefined: zero rank variance");

    MetricResult out;
    out.n = rx.size();
    out.sumSquaredRankDiff = sumD2;
    if (mode == SpearmanMode::TieCorrected) {
        out.value = pearson_r(rx, ry).value;
    } else {
        const double n = static_cast<double>(rx.size());
        out.value = 1.0 - 6.0 * sumD2 / (n * (n * n - 1.0));
    }
    return out;
}

MetricResult kendall_tau(std::span<const double> rankA, std::span<const double> rankB) {
    if (rankA.size() != rankB.size()) throw ValidationError("kendall_tau: rankings cover different item counts");
    if (rankA.size() < 2) throw ValidationError("kendall_tau: fewer than two items");
    long long concordant = 0, discordant = 0;
    for (std::size_t i = 0; i < rankA.size(); ++i) {
        for (std::size_t j = i + 1; j < rankA.size(); ++j) {
            const double da = rankA[i] - rankA[j];
            const double db = rankB[i] - rankB[j];
            if (da == 0.0 || db == 0.0) throw ValidationError("kendall_tau: rankings must be strict (tie found)");
            (da * db > 0.0 ? concordant : discordant) += 1;
        }
    }
    const double n = static_cast<double>(rankA.size());
    MetricResult out;
    out.n = rankA.size();
    out.concordant = concordant;
    out.discordant = discordant;
    out.value = 2.0 * static_cast<double>(concordant - discordant) / (n * (n - 1.0));
    return out;
}

MetricResult kendall_tau(const std::map<CandidateHash, int>& rankA, const std::map<CandidateHash, int>& rankB) {
    if (rankA.size() != rankB.size()) throw ValidationError("kendall_tau: rankings cover different item sets");
    std::vector<double> a, b;
    a.reserve(rankA.size());
    b.reserve(rankB.size());
    for (const auto& [item, rank] : rankA) {
        auto it = rankB.find(item);
        if (it == rankB.end()) throw ValidationError("kendall_tau: item " + item.str() + " missing from second ranking");
        a.push_back(rank);
        b.push_back(it->second);
    }
    return kendall_tau(a, b);
}

namespace {

struct Cell {
    QualityBucket bucket;
    int rank;
};

std::optional<double> spearman_cell(const std::vector<const SubjectCandidate*>& scoped,
                                    const std::unordered_map<CandidateHash, Cell>& a,
                                    const std::unordered_map<CandidateHash, Cell>& b) {
    std::vector<double> x, y;
    for (const auto* c : scoped) {
        auto ia = a.find(c->candidateHash);
        auto ib = b.find(c->candidateHash);
        if (ia == a.end() || ib == b.end()) continue;
        x.push_back(ordinal(ia->second.bucket));
        y.push_back(ordinal(ib->second.bucket));
    }
    try {
        return spearman_rho(x, y).value;
    } catch (const UndefinedMetricError&) {
        return std::nullopt;
    }
}

std::optional<double> kendall_cell(const StudyDataset& dataset,
                                   const std::unordered_map<std::string, std::vector<const SubjectCandidate*>>& byThread,
                                   const std::unordered_map<CandidateHash, Cell>& a,
                                   const std::unordered_map<CandidateHash, Cell>& b, KendallAggregation aggregation) {
    double tauSum = 0.0;
    int threads = 0;
    long long netPairs = 0, totalPairs = 0;
    for (const auto& thread : dataset.threads) {
        auto it = byThread.find(thread.threadId);
        if (it == byThread.end()) continue;
        std::vector<double> x, y;
        for (const auto* c : it->second) {
            auto ia = a.find(c->candidateHash);
            auto ib = b.find(c->candidateHash);
            if (ia == a.end() || ib == b.end()) continue;
            x.push_back(ia->second.rank);
            y.push_back(ib->second.rank);
        }
        if (x.size() < 2) continue;
        try {
            const auto r = kendall_tau(x, y);
            tauSum += r.value;
            ++threads;
            netPairs += *r.concordant - *r.discordant;
            totalPairs += *r.concordant + *r.discordant;
        } catch (const ValidationError&) {
            continue;
        }
    }
    if (threads == 0) return std::nullopt;
    if (aggregation == KendallAggregation::PooledPairs) {
        return static_cast<double>(netPairs) / static_cast<double>(totalPairs);
    }
    return tauSum / threads;
}

}  // namespace

PairwiseMatrix pairwise_matrix(const StudyDataset& dataset, PairwiseMetric metric, const std::set<CandidateHash>& scope,
                               KendallAggregation aggregation) {
    const std::size_t m = dataset.assessors.size();
    std::unordered_map<std::string, std::size_t> row;
    for (std::size_t i = 0; i < m; ++i) row.emplace(dataset.assessors[i].assessorId, i);

    std::vector<std::unordered_map<CandidateHash, Cell>> cells(m);
    for (const auto& a : dataset.assessments) {
        auto r = row.find(a.assessorId);
        if (r != row.end()) cells[r->second].emplace(a.candidateHash, Cell{a.bucket, a.globalRank});
    }

    std::vector<const SubjectCandidate*> scoped;
    std::unordered_map<std::string, std::vector<const SubjectCandidate*>> byThread;
    for (const auto& c : dataset.candidates) {
        if (!scope.empty() && !scope.count(c.candidateHash)) continue;
        scoped.push_back(&c);
        byThread[c.threadId].push_back(&c);
    }

    PairwiseMatrix out;
    out.metric = metric;
    out.values.assign(m, std::vector<std::optional<double>>(m));
    for (const auto& a : dataset.assessors) {
        out.labels.push_back(a.label);
        out.kinds.push_back(a.kind);
    }

    double sums[3] = {0, 0, 0};
    int counts[3] = {0, 0, 0};  // human-human, ai-ai, human-ai
    for (std::size_t i = 0; i < m; ++i) {
        out.values[i][i] = 1.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            const auto value = metric == PairwiseMetric::SpearmanOnRatings
                                   ? spearman_cell(scoped, cells[i], cells[j])
                                   : kendall_cell(dataset, byThread, cells[i], cells[j], aggregation);
            out.values[i][j] = out.values[j][i] = value;
            if (!value) continue;
            const bool hi = out.kinds[i] == AssessorKind::Human, hj = out.kinds[j] == AssessorKind::Human;
            const int block = hi && hj ? 0 : (!hi && !hj ? 1 : 2);
            sums[block] += *value;
            ++counts[block];
        }
    }
    auto mean = [&](int b) -> std::optional<double> {
        return counts[b] ? std::optional<double>(sums[b] / counts[b]) : std::nullopt;
    };
    out.humanHumanMean = mean(0);
    out.aiAiMean = mean(1);
    out.humanAiMean = mean(2);
    return out;
}

std::string_view to_string(TauAgreement a) noexcept {
    switch (a) {
        case TauAgreement::VeryHigh: return "very_high";
        case TauAgreement::Good: return "good";
        case TauAgreement::Moderate: return "moderate";
        case TauAgreement::Low: return "low";
    }
    return "low";
}

TauAgreement classify_tau_agreement(double tau) {
    if (tau < -1.0 || tau > 1.0) throw ValidationError("tau must lie in [-1, 1]");
    if (tau >= 0.80) return TauAgreement::VeryHigh;
    if (tau >= 0.60) return TauAgreement::Good;
    if (tau >= 0.40) return TauAgreement::Moderate;
    return TauAgreement::Low;
}

std::string_view to_string(PairwiseMetric m) noexcept {
    return m == PairwiseMetric::SpearmanOnRatings ? "spearman" : "kendall";
}

}  // namespace tierrank
