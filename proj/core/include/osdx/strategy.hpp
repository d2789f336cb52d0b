#pragma once

#include "osdx/backbone.hpp"
#include "osdx/domain.hpp"
#include "osdx/openmax.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace osdx {

// One positive-reward training record: the smaller strategy's observation,
// the examinations that were added, and the resulting prediction gain.
struct RewardRecord {
    ExamSet obs_kinds;       // ds_q
    Eigen::Vector3d pred;    // prediction for ds_q, internal (Unknown-first)
    ExamSet action;          // ds_v - ds_q, never contains Base
    double reward = 0.0;     // > 0
    int pair_q = 0;          // indices into the sorted StrategySet
    int pair_v = 0;
};

// All Base-containing subsets of the visit's present kinds, sorted by
// ExamSet::canonical_less and truncated to at most `cap` entries.
StrategySet enumerate_strategies(const VisitRecord& v, std::size_t cap = 4096);

// Reward sweep over every ordered strict-subset pair (ds_q, ds_v) of the
// strategy set. `preds` is parallel to `ds.strategies`. For the one-hot
// known-class truth y:
//   r = sum(y * (pv - pq)) + sum((1 - y) * (pq - pv))
// over the known entries of the predictions renormalized to sum 1; a record
// is emitted iff r > 0, in ascending (q, v) order.
std::vector<RewardRecord> compute_rewards(
    const StrategySet& ds, const std::vector<Eigen::Vector3d>& preds,
    const Eigen::Vector2d& y_true);

// Renormalized known-class slice of an (Unknown, AD, CN) prediction.
Eigen::Vector2d known_slice(const Eigen::Vector3d& pred_internal);

struct ExaminationRecord {
    std::size_t visit_index = 0;  // into the originating cohort vector
    RewardRecord reward;
};

// Runs the classifier over every enumerated strategy of every known-class
// visit and concatenates the per-visit reward sweeps. Unknown-labeled
// visits contribute nothing (there is no known one-hot truth for them).
std::vector<ExaminationRecord> build_examination_dataset(
    const std::vector<VisitRecord>& visits, const BackboneNet& net,
    const OpenMaxCalibration& cal, std::size_t cap = 4096);

// Materializes the full (observation, action, reward) triple for a record.
OARTuple to_oar_tuple(const VisitRecord& visit, const RewardRecord& record);

}  // namespace osdx
