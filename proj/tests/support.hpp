#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include "tierrank/config.hpp"
#include "tierrank/metrics.hpp"
#include "tierrank/protocol.hpp"
#include "tierrank/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace tierrank::testing {

class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng{std::random_device{}()};
        path_ = std::filesystem::temp_directory_path() / ("tierrank-test-" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

inline EmailThread make_thread(const std::string& id, int messages = 2) {
    EmailThread t{id, {}};
    for (int i = 0; i < messages; ++i) {
        Message m;
        m.role = i % 2 == 0 ? Role::Client : Role::Counsellor;
        m.date = {2024, 1, 5 + i};
        m.time = {9 + i, 30};
        m.content = (i % 2 == 0 ? "Hallo, ich brauche Rat zu Thema " : "Danke fuer Ihre Nachricht zu ") + id;
        t.messages.push_back(m);
    }
    return t;
}

inline std::string model_label(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "m%02d", i);
    return buf;
}

inline std::string thread_label(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "t%02d", i);
    return buf;
}

inline std::string assessor_label(int i) { return "a" + std::to_string(i); }

/// Threads x models candidates with no assessments. Assessors are all human.
inline StudyDataset skeleton(int threads, int models, int assessors) {
    StudyDataset d;
    for (int a = 0; a < assessors; ++a) d.assessors.push_back({assessor_label(a), AssessorKind::Human, assessor_label(a)});
    for (int t = 0; t < threads; ++t) {
        d.threads.push_back(make_thread(thread_label(t)));
        for (int m = 0; m < models; ++m) {
            const std::string text = "Betreff Nummer " + std::to_string(t * models + m);
            d.candidates.push_back({derive_hash(thread_label(t), model_label(m), text), thread_label(t), model_label(m), text});
        }
    }
    return d;
}

/// Fills assessments from buckets[item][assessor]; within each (assessor,
/// thread) candidates are ranked by bucket, ties broken by dataset order.
inline void assign_buckets(StudyDataset& d, const std::vector<std::vector<QualityBucket>>& buckets) {
    d.assessments.clear();
    std::map<std::string, std::vector<std::size_t>> byThread;
    for (std::size_t i = 0; i < d.candidates.size(); ++i) byThread[d.candidates[i].threadId].push_back(i);
    for (std::size_t a = 0; a < d.assessors.size(); ++a) {
        for (auto& [thread, items] : byThread) {
            auto order = items;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
                return ordinal(buckets[x][a]) > ordinal(buckets[y][a]);
            });
            for (std::size_t r = 0; r < order.size(); ++r) {
                d.assessments.push_back({d.assessors[a].assessorId, thread, d.candidates[order[r]].candidateHash,
                                         buckets[order[r]][a], static_cast<int>(r + 1)});
            }
        }
    }
}

/// Counts (good, fair, poor) spread over 9 assessors, rotated by item so no
/// assessor always holds the modal rating.
inline std::vector<QualityBucket> spread(std::array<int, 3> gfp, std::size_t rotate) {
    std::vector<QualityBucket> v;
    for (int i = 0; i < gfp[0]; ++i) v.push_back(QualityBucket::Good);
    for (int i = 0; i < gfp[1]; ++i) v.push_back(QualityBucket::Fair);
    for (int i = 0; i < gfp[2]; ++i) v.push_back(QualityBucket::Poor);
    std::rotate(v.begin(), v.begin() + static_cast<long>(rotate % v.size()), v.end());
    return v;
}

inline StudyConfig mock_config(const std::string& studyId, int threadsK, int humans, int ais) {
    StudyConfig c;
    c.studyId = studyId;
    c.candidatesPerThread = threadsK;
    c.seed = 20240105;
    for (int i = 0; i < humans; ++i) c.assessors.push_back({"h" + std::to_string(i), AssessorKind::Human, "human " + std::to_string(i)});
    for (int i = 0; i < ais; ++i) {
        const std::string label = "judge-" + std::to_string(i);
        c.assessors.push_back({label, AssessorKind::AI, label});
        ModelEndpoint e;
        e.label = label;
        e.temperature = kDefaultJudgingTemperature;
        c.aiAssessors.push_back(e);
    }
    for (int i = 0; i < threadsK; ++i) {
        ModelEndpoint e;
        e.label = "gen-" + model_label(i);
        e.temperature = kDefaultGenerationTemperature;
        c.generators.push_back(e);
    }
    return c;
}

// ---------------------------------------------------------------- oracles

/// Krippendorff's alpha from the pair-sum form
///   alpha = 1 - (n - 1) * sum_u [sum_{i != j in u} d2(v_i, v_j) / (m_u - 1)]
///                       / sum_{a != b over all pairable values} d2(v_a, v_b)
/// with no coincidence matrix. Returns NaN when undefined.
inline double alpha_oracle(const RatingsMatrix& m, AlphaLevel level) {
    std::vector<std::vector<int>> units;
    for (std::size_t i = 0; i < m.items(); ++i) {
        std::vector<int> u;
        for (std::size_t a = 0; a < m.assessors(); ++a) {
            if (m.at(a, i)) u.push_back(*m.at(a, i));
        }
        if (u.size() >= 2) units.push_back(u);
    }
    std::vector<int> values;
    for (const auto& u : units) values.insert(values.end(), u.begin(), u.end());
    const double n = static_cast<double>(values.size());
    std::map<int, double> freq;
    for (int v : values) freq[v] += 1.0;

    auto d2 = [&](int a, int b) {
        if (a == b) return 0.0;
        if (level == AlphaLevel::Nominal) return 1.0;
        const int lo = std::min(a, b), hi = std::max(a, b);
        double s = 0.0;
        for (const auto& [g, c] : freq) {
            if (g >= lo && g <= hi) s += c;
        }
        s -= (freq[lo] + freq[hi]) / 2.0;
        return s * s;
    };

    double within = 0.0;
    for (const auto& u : units) {
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            for (std::size_t j = 0; j < u.size(); ++j) {
                if (i != j) s += d2(u[i], u[j]);
            }
        }
        within += s / static_cast<double>(u.size() - 1);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (std::size_t j = 0; j < values.size(); ++j) {
            if (i != j) total += d2(values[i], values[j]);
        }
    }
    if (units.empty() || total == 0.0) return std::nan("");
    return 1.0 - (n - 1.0) * within / total;
}

/// Tau-a by enumerating every unordered pair.
inline double tau_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    long long s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const double x = a[i] - a[j], y = b[i] - b[j];
            s += (x > 0) - (x < 0) == (y > 0) - (y < 0) ? 1 : -1;
        }
    }
    const double pairs = static_cast<double>(a.size() * (a.size() - 1) / 2);
    return static_cast<double>(s) / pairs;
}

/// Closed-form tie-free Spearman.
inline double spearman_closed_form(const std::vector<double>& rankA, const std::vector<double>& rankB) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < rankA.size(); ++i) d2 += (rankA[i] - rankB[i]) * (rankA[i] - rankB[i]);
    const double n = static_cast<double>(rankA.size());
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

inline RatingsMatrix random_matrix(std::mt19937_64& rng, int assessors, int items, double missing) {
    RatingsMatrix m(static_cast<std::size_t>(assessors), static_cast<std::size_t>(items));
    std::uniform_int_distribution<int> cat(1, 3);
    std::bernoulli_distribution drop(missing);
    for (int a = 0; a < assessors; ++a) {
        for (int i = 0; i < items; ++i) {
            if (!drop(rng)) m.set(static_cast<std::size_t>(a), static_cast<std::size_t>(i), cat(rng));
        }
    }
    return m;
}

}  // namespace tierrank::testing
