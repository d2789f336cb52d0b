#pragma once

#include "osdx/domain.hpp"
#include "osdx/engine.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace osdx {

struct MetricReport {
    std::string metric;
    double value = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int n_trials = 0;
    int sample_size = 0;
    int redraws = 0;
    std::size_t n_items = 0;
};

// Trapezoidal area under the ROC curve with tie averaging, i.e. the
// rank/Mann-Whitney statistic. Throws std::invalid_argument when only one
// class is present.
double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels);

struct BootstrapOptions {
    int n_trials = 2000;
    int sample_size = 2500;
    std::uint64_t seed = 0;
    int max_redraws_per_trial = 1000;
};

// Non-parametric percentile bootstrap: n_trials resamples with replacement
// of sample_size items; returns the 2.5 and 97.5 percentiles (linear
// interpolation between order statistics). Items are canonicalized by
// sorting before resampling, so the interval is invariant to input order;
// each trial draws from its own derived (seed, trial) stream. A metric
// failure (thrown exception) on a resample triggers a redraw on the same
// stream; redraws are capped per trial and the total is reported.
template <typename T>
std::pair<double, double> bootstrap_ci(
    const std::function<double(const std::vector<T>&)>& metric,
    std::vector<T> items, const BootstrapOptions& options,
    int* total_redraws = nullptr);

// Scored binary item for AUC bootstraps.
struct ScoredItem {
    double score = 0.0;
    int label = 0;

    auto operator<=>(const ScoredItem&) const = default;
};

double auc_of_items(const std::vector<ScoredItem>& items);

struct SensSpec {
    std::optional<double> sensitivity;  // TP / (TP + FN)
    std::optional<double> specificity;  // TN / (TN + FP)
};

// One-vs-rest counts treating Unknown as a class of its own. Zero
// denominators leave the ratio unset rather than forcing 0.
SensSpec sensitivity_specificity(const std::vector<DiagnosisClass>& preds,
                                 const std::vector<DiagnosisClass>& truths,
                                 DiagnosisClass positive_class);

// Fraction of exact label matches.
double accuracy(const std::vector<DiagnosisClass>& preds,
                const std::vector<DiagnosisClass>& truths);

struct ExamUsage {
    std::array<long, kNumExamKinds> requests{};
    std::array<long, kNumExamKinds> grants{};
    std::array<long, kNumExamKinds> refusals{};
};

// Per-kind totals across traces; grants + refusals == requests per kind.
ExamUsage exam_usage_table(const std::vector<StrategyTrace>& traces);

struct CensusRow {
    ExamSet strategy;  // granted kinds
    long ad = 0;
    long cn = 0;
    long unknown = 0;

    long total() const { return ad + cn + unknown; }
};

// Distinct granted-exam sets with per-final-label counts, sorted by
// frequency (descending), ties by canonical strategy order. The final label
// counted is the trace's own diagnosis.
std::vector<CensusRow> strategy_census(const std::vector<StrategyTrace>& traces);

}  // namespace osdx
