#include "tierrank/report.hpp"

#include "tierrank/errors.hpp"
#include "tierrank/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace tierrank {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFilterOutcomeFile = "filter_outcome.json";
constexpr const char* kAnalysisFile = "analysis.json";

std::string num(double v, int precision = 10) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

std::string pct(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", ratio * 100.0);
    return buf;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_text(const fs::path& p, const std::string& content) {
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StorageError("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, p);
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw StorageError("cannot read " + p.string());
    return json::parse(in);
}

}  // namespace

json to_json_value(const SweepPoint& p) {
    return {{"threshold", p.threshold},
            {"minAgreeingAssessors", p.minAgreeingAssessors},
            {"retainedItems", p.retainedItems},
            {"retentionRatio", p.retentionRatio},
            {"alpha", opt(p.alpha)}};
}

json to_json_value(const FilterOutcome& o) {
    json models = json::object();
    for (const auto& [model, r] : o.perModelRetention) {
        models[model] = {{"count", r.count}, {"total", r.total}, {"ratio", r.ratio}};
    }
    json buckets = json::object();
    for (const auto& [bucket, r] : o.perBucketRetention) {
        buckets[std::string(to_string(bucket))] = {{"before", r.before}, {"after", r.after}};
    }
    return {{"chosenThreshold", o.chosenThreshold},
            {"alpha", o.alpha},
            {"retainedItemHashes", o.retainedItemHashes},
            {"retainedItems", o.retainedItemHashes.size()},
            {"retainedAssessmentCount", o.retainedAssessments.size()},
            {"perModelRetention", models},
            {"perBucketRetention", buckets}};
}

FilterOutcome filter_outcome_from_json(const json& j) {
    FilterOutcome o;
    o.chosenThreshold = j.at("chosenThreshold").get<double>();
    o.alpha = j.at("alpha").get<double>();
    o.retainedItemHashes = j.at("retainedItemHashes").get<std::set<CandidateHash>>();
    for (const auto& [model, r] : j.at("perModelRetention").items()) {
        o.perModelRetention[model] = {r.at("count").get<std::size_t>(), r.at("total").get<std::size_t>(), r.at("ratio").get<double>()};
    }
    for (const auto& [bucket, r] : j.at("perBucketRetention").items()) {
        o.perBucketRetention[parse_bucket(bucket)] = {r.at("before").get<std::size_t>(), r.at("after").get<std::size_t>()};
    }
    return o;
}

namespace {

json stats_json(const RankStats& s) {
    return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"stddev", s.stddev},
            {"q1", s.q1},       {"q3", s.q3},     {"min", s.min},       {"max", s.max}};
}

}  // namespace

json to_json_value(const ModelSummary& s) {
    json shares = json::object();
    for (const auto& [b, v] : s.ratingShares) shares[std::string(to_string(b))] = v;
    return {{"model", s.model},
            {"ratingShares", shares},
            {"retention", {{"retained", s.retainedItems}, {"total", s.totalItems}, {"ratio", s.retentionRatio}}},
            {"rankStats", stats_json(s.rankStats)},
            {"goodProportion", s.goodProportion},
            {"empty", s.empty}};
}

json to_json_value(const PairwiseMatrix& m) {
    json values = json::array();
    for (const auto& row : m.values) {
        json r = json::array();
        for (const auto& v : row) r.push_back(opt(v));
        values.push_back(r);
    }
    json kinds = json::array();
    for (auto k : m.kinds) kinds.push_back(std::string(to_string(k)));
    return {{"metric", std::string(to_string(m.metric))},
            {"labels", m.labels},
            {"kinds", kinds},
            {"values", values},
            {"humanHumanMean", opt(m.humanHumanMean)},
            {"aiAiMean", opt(m.aiAiMean)},
            {"humanAiMean", opt(m.humanAiMean)}};
}

json to_json_value(const RegressionFit& f) {
    json points = json::object();
    for (const auto& [model, p] : f.points) points[model] = {{"meanRank", p.first}, {"goodProportion", p.second}};
    return {{"slope", f.slope},       {"intercept", f.intercept}, {"rSquared", f.rSquared}, {"pearson", f.pearson},
            {"spearman", f.spearman}, {"n", f.n},                 {"residuals", f.residuals}, {"points", points}};
}

json to_json_value(const RankDistribution& d) {
    json points = json::array();
    for (const auto& p : d.points) points.push_back({{"rank", p.rank}, {"bucket", std::string(to_string(p.bucket))}});
    return {{"model", d.model}, {"stats", stats_json(d.stats)}, {"points", points}};
}

std::string sweep_csv(const std::vector<SweepPoint>& sweep) {
    std::ostringstream os;
    os << "threshold,min_agreeing_assessors,retained_items,retention_ratio,alpha\n";
    for (const auto& p : sweep) {
        os << num(p.threshold) << ',' << p.minAgreeingAssessors << ',' << p.retainedItems << ',' << num(p.retentionRatio)
           << ',' << (p.alpha ? num(*p.alpha) : "") << '\n';
    }
    return os.str();
}

std::string matrix_csv(const PairwiseMatrix& m) {
    std::ostringstream os;
    os << "assessor";
    for (const auto& l : m.labels) os << ',' << l;
    os << '\n';
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        os << m.labels[i];
        for (const auto& v : m.values[i]) os << ',' << (v ? num(*v) : "");
        os << '\n';
    }
    return os.str();
}

std::vector<std::string> missing_generation_cells(const StudyStore& store) {
    const auto state = store.snapshot();
    std::set<std::pair<std::string, std::string>> done;
    for (const auto& c : state->dataset.candidates) done.insert({c.threadId, c.generatorModel});
    std::vector<std::string> missing;
    for (const auto& t : state->dataset.threads) {
        for (const auto& g : store.config().generators) {
            if (!done.count({t.threadId, g.label})) missing.push_back(t.threadId + "/" + g.label);
        }
    }
    return missing;
}

std::vector<std::string> missing_assessment_cells(const StudyStore& store) {
    const auto state = store.snapshot();
    std::vector<std::string> missing;
    for (const auto& t : state->dataset.threads) {
        for (const auto& a : state->dataset.assessors) {
            if (!state->submitted(a.assessorId, t.threadId)) missing.push_back(t.threadId + "/" + a.assessorId);
        }
    }
    return missing;
}

FilterStageResult run_filter_stage(const StudyStore& store, double targetAlpha, double step) {
    const auto state = store.snapshot();
    if (state->dataset.threads.empty()) throw StageError("stage not complete: no threads imported", {});
    if (auto missing = missing_assessment_cells(store); !missing.empty()) {
        throw StageError("stage not complete: assessments missing", std::move(missing));
    }
    FilterStageResult result;
    result.sweep = sweep(state->dataset, AlphaLevel::Ordinal, step);
    write_text(store.reports_dir() / "sweep.csv", sweep_csv(result.sweep));
    result.outcome = select_threshold(state->dataset, result.sweep, targetAlpha);

    json doc = to_json_value(result.outcome);
    doc["targetAlpha"] = targetAlpha;
    doc["sweep"] = json::array();
    for (const auto& p : result.sweep) doc["sweep"].push_back(to_json_value(p));
    write_text(store.reports_dir() / kFilterOutcomeFile, doc.dump(2) + "\n");
    return result;
}

AnalysisBundle run_analyze_stage(const StudyStore& store) {
    const fs::path outcomePath = store.reports_dir() / kFilterOutcomeFile;
    if (!fs::exists(outcomePath)) throw StageError("stage not complete: run filter first", {outcomePath.string()});
    const json filterDoc = read_json(outcomePath);
    const auto outcome = filter_outcome_from_json(filterDoc);
    const auto state = store.snapshot();
    const auto& dataset = state->dataset;
    const auto& retained = outcome.retainedItemHashes;

    AnalysisBundle bundle;
    bundle.summaries = model_summaries(dataset, retained);
    bundle.spearman = pairwise_matrix(dataset, PairwiseMetric::SpearmanOnRatings, retained);
    bundle.kendall = pairwise_matrix(dataset, PairwiseMetric::KendallOnRankings, retained);
    bundle.rankDistribution = rank_distribution_table(dataset, retained);
    try {
        bundle.regression = fit_rating_rank_regression(bundle.summaries);
    } catch (const std::exception&) {
        bundle.regression.reset();
    }

    json doc;
    doc["modelSummaries"] = json::array();
    for (const auto& s : bundle.summaries) doc["modelSummaries"].push_back(to_json_value(s));
    doc["spearman"] = to_json_value(bundle.spearman);
    doc["kendall"] = to_json_value(bundle.kendall);
    doc["regression"] = bundle.regression ? to_json_value(*bundle.regression) : json(nullptr);
    doc["rankDistribution"] = json::array();
    for (const auto& d : bundle.rankDistribution) doc["rankDistribution"].push_back(to_json_value(d));
    doc["filter"] = filterDoc;
    doc["filter"].erase("sweep");
    write_text(store.reports_dir() / kAnalysisFile, doc.dump(2) + "\n");

    const auto dir = store.reports_dir();
    {
        std::ostringstream os;
        os << "bucket,before,after\n";
        for (auto b : {QualityBucket::Good, QualityBucket::Fair, QualityBucket::Poor}) {
            auto it = outcome.perBucketRetention.find(b);
            const BucketRetention r = it == outcome.perBucketRetention.end() ? BucketRetention{} : it->second;
            os << to_string(b) << ',' << r.before << ',' << r.after << '\n';
        }
        write_text(dir / "bucket_counts.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "model,retained,total,ratio\n";
        for (const auto& [model, r] : outcome.perModelRetention) os << model << ',' << r.count << ',' << r.total << ',' << num(r.ratio) << '\n';
        write_text(dir / "model_retention.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "model,good,fair,poor\n";
        for (const auto& s : bundle.summaries) {
            if (s.empty) continue;
            os << s.model << ',' << num(s.ratingShares.at(QualityBucket::Good)) << ','
               << num(s.ratingShares.at(QualityBucket::Fair)) << ',' << num(s.ratingShares.at(QualityBucket::Poor)) << '\n';
        }
        write_text(dir / "rating_shares.csv", os.str());
    }
    write_text(dir / "spearman_matrix.csv", matrix_csv(bundle.spearman));
    write_text(dir / "kendall_matrix.csv", matrix_csv(bundle.kendall));
    {
        std::ostringstream box, points;
        box << "model,count,min,q1,median,q3,max,mean,stddev\n";
        points << "model,rank,bucket\n";
        for (const auto& d : bundle.rankDistribution) {
            const auto& s = d.stats;
            box << d.model << ',' << s.count << ',' << num(s.min) << ',' << num(s.q1) << ',' << num(s.median) << ','
                << num(s.q3) << ',' << num(s.max) << ',' << num(s.mean) << ',' << num(s.stddev) << '\n';
            for (const auto& p : d.points) points << d.model << ',' << p.rank << ',' << to_string(p.bucket) << '\n';
        }
        write_text(dir / "rank_boxplot.csv", box.str());
        write_text(dir / "rank_points.csv", points.str());
    }
    {
        std::ostringstream os;
        os << "model,mean_rank,good_proportion,fitted,residual\n";
        if (bundle.regression) {
            for (const auto& [model, p] : bundle.regression->points) {
                const double fitted = bundle.regression->intercept + bundle.regression->slope * p.first;
                os << model << ',' << num(p.first) << ',' << num(p.second) << ',' << num(fitted) << ','
                   << num(bundle.regression->residuals.at(model)) << '\n';
            }
        }
        write_text(dir / "regression.csv", os.str());
    }
    return bundle;
}

fs::path run_report_stage(const StudyStore& store) {
    const fs::path analysisPath = store.reports_dir() / kAnalysisFile;
    if (!fs::exists(analysisPath)) throw StageError("stage not complete: run analyze first", {analysisPath.string()});
    const auto analysis = read_json(analysisPath);
    const auto state = store.snapshot();
    const auto& config = store.config();
    const auto& filter = analysis.at("filter");

    std::ostringstream md;
    md << "# Study report: " << config.studyId << "\n\n";
    md << "- Threads: " << state->dataset.threads.size() << "\n";
    md << "- Candidates: " << state->dataset.candidates.size() << " (" << config.candidatesPerThread << " per thread)\n";
    md << "- Assessors: " << state->dataset.assessors.size() << "\n";
    md << "- Assessments: " << state->dataset.assessments.size() << "\n\n";

    md << "## Agreement filtering\n\n";
    const auto retained = filter.at("retainedItems").get<std::size_t>();
    const auto total = state->dataset.candidates.size();
    md << "- Chosen threshold: " << num(filter.at("chosenThreshold").get<double>(), 4) << "\n";
    md << "- Krippendorff's alpha (ordinal) on retained data: " << num(filter.at("alpha").get<double>(), 4) << "\n";
    md << "- Retained items: " << retained << " of " << total << " ("
       << pct(total ? static_cast<double>(retained) / static_cast<double>(total) : 0.0) << ")\n";
    md << "- Retained assessments: " << filter.at("retainedAssessmentCount").get<std::size_t>() << "\n\n";

    md << "### Ratings before and after filtering\n\n";
    md << "| Bucket | Before | After | Retained | Reduction |\n|---|---:|---:|---:|---:|\n";
    for (const char* bucket : {"Good", "Fair", "Poor"}) {
        const auto& r = filter.at("perBucketRetention").at(bucket);
        const double before = r.at("before").get<double>(), after = r.at("after").get<double>();
        const double kept = before > 0 ? after / before : 0.0;
        md << "| " << bucket << " | " << r.at("before") << " | " << r.at("after") << " | " << pct(kept) << " | "
           << pct(before > 0 ? 1.0 - kept : 0.0) << " |\n";
    }
    md << "\n### Retention per model\n\n| Model | Retained | Total | Ratio |\n|---|---:|---:|---:|\n";
    for (const auto& [model, r] : filter.at("perModelRetention").items()) {
        md << "| " << model << " | " << r.at("count") << " | " << r.at("total") << " | " << pct(r.at("ratio").get<double>()) << " |\n";
    }

    md << "\n## Ratings and ranks per model\n\n";
    md << "| Model | Good | Fair | Poor | Mean rank | Median | SD | Q1 | Q3 |\n|---|---:|---:|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& s : analysis.at("modelSummaries")) {
        if (s.at("empty").get<bool>()) {
            md << "| " << s.at("model").get<std::string>() << " | no retained items | | | | | | | |\n";
            continue;
        }
        const auto& sh = s.at("ratingShares");
        const auto& st = s.at("rankStats");
        md << "| " << s.at("model").get<std::string>() << " | " << pct(sh.at("Good").get<double>()) << " | "
           << pct(sh.at("Fair").get<double>()) << " | " << pct(sh.at("Poor").get<double>()) << " | "
           << num(st.at("mean").get<double>(), 3) << " | " << num(st.at("median").get<double>(), 3) << " | "
           << num(st.at("stddev").get<double>(), 3) << " | " << num(st.at("q1").get<double>(), 3) << " | "
           << num(st.at("q3").get<double>(), 3) << " |\n";
    }

    md << "\n## Assessor agreement\n\n| Metric | Human-Human | AI-AI | Human-AI |\n|---|---:|---:|---:|\n";
    for (const char* key : {"spearman", "kendall"}) {
        const auto& m = analysis.at(key);
        auto cell = [&](const char* field) {
            const auto& v = m.at(field);
            if (v.is_null()) return std::string("n/a");
            std::string out = num(v.get<double>(), 3);
            if (std::string(key) == "kendall") out += " (" + std::string(to_string(classify_tau_agreement(v.get<double>()))) + ")";
            return out;
        };
        md << "| " << (std::string(key) == "spearman" ? "Spearman rho (ratings)" : "Kendall tau (rankings)") << " | "
           << cell("humanHumanMean") << " | " << cell("aiAiMean") << " | " << cell("humanAiMean") << " |\n";
    }

    md << "\n## Good proportion vs mean rank\n\n";
    const auto& reg = analysis.at("regression");
    if (reg.is_null()) {
        md << "Regression undefined (fewer than three models with retained items, or no spread in mean rank).\n";
    } else {
        md << "- Fit: y = " << num(reg.at("slope").get<double>(), 4) << " x + " << num(reg.at("intercept").get<double>(), 4) << "\n";
        md << "- R^2 = " << num(reg.at("rSquared").get<double>(), 4) << ", Pearson r = " << num(reg.at("pearson").get<double>(), 4)
           << ", Spearman rho = " << num(reg.at("spearman").get<double>(), 4) << "\n\n";
        md << "| Model | Mean rank | Good | Residual |\n|---|---:|---:|---:|\n";
        for (const auto& [model, p] : reg.at("points").items()) {
            md << "| " << model << " | " << num(p.at("meanRank").get<double>(), 3) << " | "
               << pct(p.at("goodProportion").get<double>()) << " | " << num(reg.at("residuals").at(model).get<double>(), 3)
               << " |\n";
        }
    }
    md << "\nTabular data for every section is in this directory as CSV.\n";

    const fs::path out = store.reports_dir() / "report.md";
    write_text(out, md.str());
    return out;
}

json export_study(const StudyStore& store) {
    const auto state = store.snapshot();
    json config = store.config();
    return {{"config", config}, {"dataset", state->dataset}};
}

}  // namespace tierrank
