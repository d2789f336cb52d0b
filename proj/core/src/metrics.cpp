#include "osdx/metrics.hpp"

#include "osdx/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace osdx {

double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw std::invalid_argument("roc_auc: bad input sizes");
    }
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += static_cast<std::size_t>(l != 0);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw std::invalid_argument("roc_auc: both classes required");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });

    // Average ranks over ties, then the Mann-Whitney identity.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double auc_of_items(const std::vector<ScoredItem>& items) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(items.size());
    labels.reserve(items.size());
    for (const ScoredItem& it : items) {
        scores.push_back(it.score);
        labels.push_back(it.label);
    }
    return roc_auc(scores, labels);
}

namespace {

double percentile(const std::vector<double>& sorted, double p) {
    // Linear interpolation between order statistics (the R-7 rule).
    const double h = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

template <typename T>
std::pair<double, double> bootstrap_ci(
    const std::function<double(const std::vector<T>&)>& metric,
    std::vector<T> items, const BootstrapOptions& options,
    int* total_redraws) {
    if (items.empty()) {
        throw std::invalid_argument("bootstrap_ci: empty items");
    }
    if (options.n_trials < 1 || options.sample_size < 1) {
        throw std::invalid_argument("bootstrap_ci: bad options");
    }
    std::sort(items.begin(), items.end());

    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(options.n_trials));
    int redraws = 0;
    std::vector<T> sample(static_cast<std::size_t>(options.sample_size));
    for (int trial = 0; trial < options.n_trials; ++trial) {
        Rng rng = Rng::derive(options.seed, static_cast<std::uint64_t>(trial));
        for (int attempt = 0;; ++attempt) {
            for (int s = 0; s < options.sample_size; ++s) {
                sample[static_cast<std::size_t>(s)] =
                    items[rng.index(items.size())];
            }
            try {
                values.push_back(metric(sample));
                break;
            } catch (const std::exception&) {
                ++redraws;
                if (attempt + 1 >= options.max_redraws_per_trial) {
                    throw std::runtime_error(
                        "bootstrap_ci: redraw cap exceeded on trial " +
                        std::to_string(trial));
                }
            }
        }
    }
    if (total_redraws) *total_redraws = redraws;
    std::sort(values.begin(), values.end());
    return {percentile(values, 0.025), percentile(values, 0.975)};
}

template std::pair<double, double> bootstrap_ci<ScoredItem>(
    const std::function<double(const std::vector<ScoredItem>&)>&,
    std::vector<ScoredItem>, const BootstrapOptions&, int*);
template std::pair<double, double> bootstrap_ci<double>(
    const std::function<double(const std::vector<double>&)>&,
    std::vector<double>, const BootstrapOptions&, int*);
template std::pair<double, double> bootstrap_ci<int>(
    const std::function<double(const std::vector<int>&)>&, std::vector<int>,
    const BootstrapOptions&, int*);

SensSpec sensitivity_specificity(const std::vector<DiagnosisClass>& preds,
                                 const std::vector<DiagnosisClass>& truths,
                                 DiagnosisClass positive_class) {
    if (preds.size() != truths.size() || preds.empty()) {
        throw std::invalid_argument("sensitivity_specificity: bad inputs");
    }
    long tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool pred_pos = preds[i] == positive_class;
        const bool true_pos = truths[i] == positive_class;
        if (true_pos) {
            (pred_pos ? tp : fn)++;
        } else {
            (pred_pos ? fp : tn)++;
        }
    }
    SensSpec out;
    if (tp + fn > 0) {
        out.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    if (tn + fp > 0) {
        out.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
    }
    return out;
}

double accuracy(const std::vector<DiagnosisClass>& preds,
                const std::vector<DiagnosisClass>& truths) {
    if (preds.size() != truths.size() || preds.empty()) {
        throw std::invalid_argument("accuracy: bad inputs");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        correct += static_cast<std::size_t>(preds[i] == truths[i]);
    }
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

ExamUsage exam_usage_table(const std::vector<StrategyTrace>& traces) {
    if (traces.empty()) {
        throw std::invalid_argument("exam_usage_table: no traces");
    }
    ExamUsage usage;
    for (const StrategyTrace& t : traces) {
        for (const TraceRequest& r : t.requested) {
            const std::size_t k = static_cast<std::size_t>(r.kind);
            usage.requests[k]++;
            (r.granted ? usage.grants[k] : usage.refusals[k])++;
        }
    }
    return usage;
}

std::vector<CensusRow> strategy_census(const std::vector<StrategyTrace>& traces) {
    if (traces.empty()) {
        throw std::invalid_argument("strategy_census: no traces");
    }
    std::map<std::uint16_t, CensusRow> rows;
    for (const StrategyTrace& t : traces) {
        const ExamSet s = t.granted_kinds();
        CensusRow& row = rows[s.mask()];
        row.strategy = s;
        switch (t.final.cls) {
            case DiagnosisClass::AD: row.ad++; break;
            case DiagnosisClass::CN: row.cn++; break;
            case DiagnosisClass::Unknown: row.unknown++; break;
        }
    }
    std::vector<CensusRow> out;
    out.reserve(rows.size());
    for (auto& [mask, row] : rows) out.push_back(row);
    std::sort(out.begin(), out.end(), [](const CensusRow& a, const CensusRow& b) {
        if (a.total() != b.total()) return a.total() > b.total();
        return ExamSet::canonical_less(a.strategy, b.strategy);
    });
    return out;
}

}  // namespace osdx
