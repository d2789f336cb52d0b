#include "osdx/strategy.hpp"

#include <algorithm>
#include <stdexcept>

namespace osdx {

StrategySet enumerate_strategies(const VisitRecord& v, std::size_t cap) {
    const ExamSet present = v.present_kinds();
    std::vector<ExamKind> optional_kinds;
    for (ExamKind k : present.kinds()) {
        if (k != ExamKind::Base) optional_kinds.push_back(k);
    }
    const std::size_t m = optional_kinds.size();

    StrategySet out;
    out.strategies.reserve(std::min<std::size_t>(cap, std::size_t{1} << m));
    for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << m); ++mask) {
        ExamSet s{ExamKind::Base};
        for (std::size_t j = 0; j < m; ++j) {
            if (mask & (std::uint32_t{1} << j)) s.insert(optional_kinds[j]);
        }
        out.strategies.push_back(s);
    }
    std::sort(out.strategies.begin(), out.strategies.end(),
              ExamSet::canonical_less);
    if (out.strategies.size() > cap) out.strategies.resize(cap);
    return out;
}

Eigen::Vector2d known_slice(const Eigen::Vector3d& pred_internal) {
    Eigen::Vector2d known(pred_internal[1], pred_internal[2]);
    const double sum = known.sum();
    if (sum <= 1e-12) {
        // All mass on Unknown; the known split is uninformative.
        return Eigen::Vector2d(0.5, 0.5);
    }
    return known / sum;
}

std::vector<RewardRecord> compute_rewards(
    const StrategySet& ds, const std::vector<Eigen::Vector3d>& preds,
    const Eigen::Vector2d& y_true) {
    if (preds.size() != ds.strategies.size()) {
        throw std::invalid_argument(
            "compute_rewards: one prediction per strategy required");
    }
    const int n = static_cast<int>(ds.strategies.size());
    std::vector<Eigen::Vector2d> known(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        known[i] = known_slice(preds[i]);
    }

    std::vector<RewardRecord> out;
    for (int q = 0; q < n; ++q) {
        for (int v = q + 1; v < n; ++v) {
            const ExamSet& sq = ds.strategies[static_cast<std::size_t>(q)];
            const ExamSet& sv = ds.strategies[static_cast<std::size_t>(v)];
            if (!sq.strict_subset_of(sv)) continue;
            const Eigen::Vector2d& pq = known[static_cast<std::size_t>(q)];
            const Eigen::Vector2d& pv = known[static_cast<std::size_t>(v)];
            const double r = (y_true.array() * (pv - pq).array()).sum() +
                             ((1.0 - y_true.array()) * (pq - pv).array()).sum();
            if (r > 0.0) {
                out.push_back(RewardRecord{
                    sq, preds[static_cast<std::size_t>(q)],
                    sv.set_difference(sq), r, q, v});
            }
        }
    }
    return out;
}

std::vector<ExaminationRecord> build_examination_dataset(
    const std::vector<VisitRecord>& visits, const BackboneNet& net,
    const OpenMaxCalibration& cal, std::size_t cap) {
    const Eigen::Index width = net.config().width;
    std::vector<ExaminationRecord> out;
    Eigen::VectorXd dense(net.config().input_size());
    for (std::size_t vi = 0; vi < visits.size(); ++vi) {
        const VisitRecord& visit = visits[vi];
        if (!visit.label.is_known()) continue;
        const StrategySet ds = enumerate_strategies(visit, cap);
        std::vector<Eigen::Vector3d> preds;
        preds.reserve(ds.strategies.size());
        for (const ExamSet& s : ds.strategies) {
            materialize_dense(visit, s, width, dense);
            preds.push_back(
                openmax_predict(cal, net.forward(dense)).internal_order());
        }
        Eigen::Vector2d y_true = Eigen::Vector2d::Zero();
        y_true[static_cast<int>(visit.label.cls)] = 1.0;
        for (RewardRecord& r : compute_rewards(ds, preds, y_true)) {
            out.push_back(ExaminationRecord{vi, std::move(r)});
        }
    }
    return out;
}

OARTuple to_oar_tuple(const VisitRecord& visit, const RewardRecord& record) {
    OARTuple t;
    for (const auto& [kind, row] : visit.rows) {
        if (record.obs_kinds.contains(kind)) t.obs.rows.emplace(kind, row);
    }
    t.obs.pred = DiagnosisProbs(record.pred);
    t.action = record.action;
    t.reward = record.reward;
    return t;
}

}  // namespace osdx
