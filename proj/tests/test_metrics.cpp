#include "support.hpp"

#include "tierrank/errors.hpp"
#include "tierrank/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace tierrank;
using namespace tierrank::testing;

namespace {

RatingsMatrix from_rows(const std::vector<std::vector<int>>& rows) {
    std::vector<std::vector<std::optional<int>>> cells;
    for (const auto& r : rows) {
        std::vector<std::optional<int>> row;
        for (int v : r) row.push_back(v == 0 ? std::nullopt : std::optional<int>(v));
        cells.push_back(row);
    }
    return RatingsMatrix(cells);
}

}  // namespace

TEST(AlphaTest, HandDerivedNominalCase) {
    // Units (1,1), (2,2), (3,3), (1,3): Do = 2/8, De = 42/56.
    const auto r = krippendorff_alpha(from_rows({{1, 2, 3, 1}, {1, 2, 3, 3}}), AlphaLevel::Nominal);
    EXPECT_DOUBLE_EQ(r.value, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(*r.observedDisagreement, 2.0 / 8.0);
    EXPECT_DOUBLE_EQ(*r.expectedDisagreement, 42.0 / 56.0);
    EXPECT_EQ(r.n, 8u);
}

// Reference values from the `krippendorff` Python package.
TEST(AlphaTest, MatchesReferenceImplementation) {
    const auto m = from_rows({{1, 2, 3, 3, 2, 1, 4, 1, 2, 0, 0, 0},
                              {1, 2, 3, 3, 2, 2, 4, 1, 2, 5, 0, 3},
                              {0, 3, 3, 3, 2, 3, 4, 2, 2, 5, 1, 0},
                              {1, 2, 3, 3, 2, 4, 4, 1, 2, 5, 1, 0}});
    EXPECT_NEAR(krippendorff_alpha(m, AlphaLevel::Nominal).value, 0.743421052631579, 1e-12);
    EXPECT_NEAR(krippendorff_alpha(m, AlphaLevel::Ordinal).value, 0.8153875037548814, 1e-12);

    const auto t = from_rows({{3, 3, 2, 1, 2, 3, 1, 0}, {3, 2, 2, 1, 1, 3, 0, 2}, {3, 3, 1, 1, 2, 2, 1, 2}});
    EXPECT_NEAR(krippendorff_alpha(t, AlphaLevel::Ordinal).value, 0.7272727272727273, 1e-12);
    EXPECT_NEAR(krippendorff_alpha(t, AlphaLevel::Nominal).value, 0.4782608695652174, 1e-12);
}

TEST(AlphaTest, MatchesPairSumOracleOnRandomMatrices) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> nA(2, 5), nI(2, 12);
    std::uniform_real_distribution<double> miss(0.0, 0.2);
    int compared = 0;
    for (int i = 0; i < 500; ++i) {
        const auto m = random_matrix(rng, nA(rng), nI(rng), miss(rng));
        for (auto level : {AlphaLevel::Nominal, AlphaLevel::Ordinal}) {
            const double oracle = alpha_oracle(m, level);
            if (std::isnan(oracle)) {
                EXPECT_THROW(krippendorff_alpha(m, level), UndefinedMetricError);
            } else {
                EXPECT_NEAR(krippendorff_alpha(m, level).value, oracle, 1e-12);
                ++compared;
            }
        }
    }
    EXPECT_GT(compared, 900);
}

TEST(AlphaTest, PerfectAgreementIsOne) {
    EXPECT_DOUBLE_EQ(krippendorff_alpha(from_rows({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}})).value, 1.0);
}

TEST(AlphaTest, UndefinedCases) {
    // Single category everywhere: no expected disagreement.
    EXPECT_THROW(krippendorff_alpha(from_rows({{2, 2}, {2, 2}})), UndefinedMetricError);
    // No unit with two ratings.
    EXPECT_THROW(krippendorff_alpha(from_rows({{1, 0}, {0, 3}})), UndefinedMetricError);
    EXPECT_THROW(krippendorff_alpha(RatingsMatrix(3, 0)), UndefinedMetricError);
}

TEST(AlphaTest, SingleRatedUnitsIgnored) {
    const auto base = from_rows({{1, 2, 3, 1}, {1, 2, 3, 3}});
    const auto extra = from_rows({{1, 2, 3, 1, 3}, {1, 2, 3, 3, 0}});
    EXPECT_DOUBLE_EQ(krippendorff_alpha(base).value, krippendorff_alpha(extra).value);
}

TEST(AlphaTest, OrdinalPenalisesDistantDisagreementMore) {
    const auto near = from_rows({{1, 2, 3, 1, 2, 3}, {1, 2, 3, 2, 2, 3}});
    const auto far = from_rows({{1, 2, 3, 1, 2, 3}, {1, 2, 3, 3, 2, 3}});
    EXPECT_GT(krippendorff_alpha(near, AlphaLevel::Ordinal).value, krippendorff_alpha(far, AlphaLevel::Ordinal).value);
    EXPECT_DOUBLE_EQ(krippendorff_alpha(near, AlphaLevel::Nominal).value,
                     krippendorff_alpha(far, AlphaLevel::Nominal).value);
}

TEST(AlphaTest, RatingsMatrixFromDataset) {
    auto d = skeleton(1, 3, 2);
    assign_buckets(d, {{QualityBucket::Good, QualityBucket::Good},
                       {QualityBucket::Fair, QualityBucket::Poor},
                       {QualityBucket::Poor, QualityBucket::Poor}});
    const auto m = ratings_matrix(d);
    EXPECT_EQ(m.assessors(), 2u);
    EXPECT_EQ(m.items(), 3u);
    EXPECT_EQ(m.at(1, 1), 1);
    const auto scoped = ratings_matrix(d, {d.candidates[0].candidateHash});
    EXPECT_EQ(scoped.items(), 1u);
    EXPECT_EQ(scoped.at(0, 0), 3);
}

TEST(MidRanksTest, TiesShareAveragePosition) {
    const std::vector<double> v{10, 20, 20, 5, 30};
    EXPECT_EQ(mid_ranks(v), (std::vector<double>{2, 3.5, 3.5, 1, 5}));
}

TEST(SpearmanTest, TieCorrectedMatchesScipy) {
    const std::vector<double> x{1, 2, 2, 3, 3, 3, 1, 2}, y{1, 3, 2, 3, 2, 3, 1, 1};
    EXPECT_NEAR(spearman_rho(x, y).value, 0.7333333333333332, 1e-12);
}

TEST(SpearmanTest, SimplifiedEqualsClosedFormWithoutTies) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> a(11), b(11);
        std::iota(a.begin(), a.end(), 1.0);
        std::iota(b.begin(), b.end(), 1.0);
        std::shuffle(a.begin(), a.end(), rng);
        std::shuffle(b.begin(), b.end(), rng);
        const double closed = spearman_closed_form(a, b);
        EXPECT_NEAR(spearman_rho(a, b, SpearmanMode::Simplified).value, closed, 1e-12);
        EXPECT_NEAR(spearman_rho(a, b, SpearmanMode::TieCorrected).value, closed, 1e-12);
    }
}

TEST(SpearmanTest, ErrorsAndUndefined) {
    const std::vector<double> a{1, 2, 3}, b{1, 2};
    EXPECT_THROW(spearman_rho(a, b), ValidationError);
    const std::vector<double> flat{2, 2, 2};
    EXPECT_THROW(spearman_rho(a, flat), UndefinedMetricError);
}

TEST(KendallTest, ExhaustiveSmallPermutations) {
    for (int n = 2; n <= 6; ++n) {
        std::vector<double> base(static_cast<std::size_t>(n));
        std::iota(base.begin(), base.end(), 1.0);
        auto p = base;
        do {
            const auto r = kendall_tau(base, p);
            EXPECT_NEAR(r.value, tau_oracle(base, p), 1e-15);
            EXPECT_EQ(*r.concordant + *r.discordant, n * (n - 1) / 2);
        } while (std::next_permutation(p.begin(), p.end()));
    }
}

TEST(KendallTest, KnownValueAndExtremes) {
    const std::vector<double> a{1, 2, 3, 4, 5}, b{3, 1, 2, 5, 4}, rev{5, 4, 3, 2, 1};
    EXPECT_NEAR(kendall_tau(a, b).value, 0.4, 1e-15);
    EXPECT_DOUBLE_EQ(kendall_tau(a, a).value, 1.0);
    EXPECT_DOUBLE_EQ(kendall_tau(a, rev).value, -1.0);
}

TEST(KendallTest, RejectsTiesLengthMismatchAndTinyInput) {
    const std::vector<double> a{1, 2, 3}, tied{1, 1, 2}, shorter{1, 2}, one{1};
    EXPECT_THROW(kendall_tau(a, tied), ValidationError);
    EXPECT_THROW(kendall_tau(a, shorter), ValidationError);
    EXPECT_THROW(kendall_tau(one, one), ValidationError);
}

TEST(KendallTest, KeyedRankingsMustCoverSameItems) {
    const auto h1 = derive_hash("t", "m", "1"), h2 = derive_hash("t", "m", "2"), h3 = derive_hash("t", "m", "3");
    EXPECT_DOUBLE_EQ(kendall_tau({{h1, 1}, {h2, 2}, {h3, 3}}, {{h1, 3}, {h2, 2}, {h3, 1}}).value, -1.0);
    EXPECT_THROW(kendall_tau({{h1, 1}, {h2, 2}}, {{h1, 1}, {h3, 2}}), ValidationError);
}

TEST(PearsonTest, MatchesScipyAndRejectsConstant) {
    const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 5, 4, 5}, c{1, 1, 1, 1, 1};
    EXPECT_NEAR(pearson_r(x, y).value, 0.7745966692414834, 1e-12);
    EXPECT_THROW(pearson_r(x, c), UndefinedMetricError);
}

TEST(PairwiseTest, SymmetricUnitDiagonalAndGroupMeans) {
    auto d = skeleton(3, 4, 4);
    d.assessors[2].kind = AssessorKind::AI;
    d.assessors[3].kind = AssessorKind::AI;
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> bucket(1, 3);
    std::vector<std::vector<QualityBucket>> b(d.candidates.size(), std::vector<QualityBucket>(4));
    for (auto& item : b)
        for (auto& x : item) x = static_cast<QualityBucket>(bucket(rng));
    assign_buckets(d, b);

    for (auto metric : {PairwiseMetric::SpearmanOnRatings, PairwiseMetric::KendallOnRankings}) {
        const auto m = pairwise_matrix(d, metric);
        ASSERT_EQ(m.values.size(), 4u);
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_DOUBLE_EQ(*m.values[i][i], 1.0);
            for (std::size_t j = 0; j < 4; ++j) {
                ASSERT_EQ(m.values[i][j].has_value(), m.values[j][i].has_value());
                if (m.values[i][j]) EXPECT_DOUBLE_EQ(*m.values[i][j], *m.values[j][i]);
            }
        }
        ASSERT_TRUE(m.humanHumanMean && m.aiAiMean && m.humanAiMean);
        EXPECT_DOUBLE_EQ(*m.humanHumanMean, *m.values[0][1]);
        EXPECT_DOUBLE_EQ(*m.aiAiMean, *m.values[2][3]);
        EXPECT_NEAR(*m.humanAiMean, (*m.values[0][2] + *m.values[0][3] + *m.values[1][2] + *m.values[1][3]) / 4, 1e-12);
    }
}

TEST(PairwiseTest, KendallPerThreadMeanAgainstOracle) {
    auto d = skeleton(2, 5, 2);
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> bucket(1, 3);
    std::vector<std::vector<QualityBucket>> b(d.candidates.size(), std::vector<QualityBucket>(2));
    for (auto& item : b)
        for (auto& x : item) x = static_cast<QualityBucket>(bucket(rng));
    assign_buckets(d, b);

    double sum = 0.0;
    for (const auto& t : d.threads) {
        std::map<CandidateHash, std::vector<double>> ranks;
        for (const auto& a : d.assessments) {
            if (a.threadId == t.threadId) ranks[a.candidateHash].push_back(a.globalRank);
        }
        std::vector<double> x, y;
        for (const auto& [h, r] : ranks) {
            x.push_back(r[0]);
            y.push_back(r[1]);
        }
        sum += tau_oracle(x, y);
    }
    const auto m = pairwise_matrix(d, PairwiseMetric::KendallOnRankings);
    EXPECT_NEAR(*m.values[0][1], sum / 2, 1e-12);
}

TEST(TauBandsTest, Boundaries) {
    EXPECT_EQ(classify_tau_agreement(0.80), TauAgreement::VeryHigh);
    EXPECT_EQ(classify_tau_agreement(0.7999), TauAgreement::Good);
    EXPECT_EQ(classify_tau_agreement(0.60), TauAgreement::Good);
    EXPECT_EQ(classify_tau_agreement(0.40), TauAgreement::Moderate);
    EXPECT_EQ(classify_tau_agreement(0.39), TauAgreement::Low);
    EXPECT_EQ(classify_tau_agreement(-1.0), TauAgreement::Low);
    EXPECT_THROW(classify_tau_agreement(1.01), ValidationError);
}
