#pragma once

#include "osdx/backbone.hpp"
#include "osdx/cohort.hpp"
#include "osdx/domain.hpp"
#include "osdx/engine.hpp"
#include "osdx/openmax.hpp"
#include "osdx/recommender.hpp"
#include "osdx/strategy.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace osdx {

// Cohort files: JSON Lines, one visit per line, keys in documented order
// (subject_id, visit_index, label, subtype, rows). rows maps kind names to
// float arrays in canonical kind order. Writes are byte-deterministic.
void write_cohort_jsonl(const std::vector<VisitRecord>& cohort,
                        const std::string& path);
std::vector<VisitRecord> read_cohort_jsonl(const std::string& path);

void write_institutions_json(const std::vector<InstitutionProfile>& profiles,
                             const std::string& path);
std::vector<InstitutionProfile> read_institutions_json(const std::string& path);

void write_calibration_json(const OpenMaxCalibration& cal,
                            const std::string& path);
OpenMaxCalibration read_calibration_json(const std::string& path);

// Reward records: JSON Lines {subject_id, visit_index, obs_kinds, pred,
// action_kinds, reward}; the subject/visit keys re-anchor records to their
// cohort on read.
void write_rewards_jsonl(const std::vector<VisitRecord>& cohort,
                         const std::vector<ExaminationRecord>& records,
                         const std::string& path);
std::vector<ExaminationRecord> read_rewards_jsonl(
    const std::vector<VisitRecord>& cohort, const std::string& path);

// One engine trace tied to the visit it diagnosed.
struct TraceRecord {
    std::string subject_id;
    int visit_index = 0;
    DiagnosisLabel truth;
    int institution = 0;
    StrategyTrace trace;
};

void write_traces_jsonl(const std::vector<TraceRecord>& traces,
                        const std::string& path);
std::vector<TraceRecord> read_traces_jsonl(const std::string& path);

// Network parameters: "OSDXPAR1" magic, a little-endian u64 header length,
// a JSON header (kind, config, tensor shapes), then raw little-endian f64
// parameter data.
void save_backbone(const BackboneNet& net, const std::string& path);
BackboneNet load_backbone(const std::string& path);
void save_recommender(const RecommenderNet& net, const std::string& path);
RecommenderNet load_recommender(const std::string& path);

CohortSpec cohort_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json cohort_spec_to_json(const CohortSpec& spec);
CohortSpec read_cohort_spec(const std::string& path);

}  // namespace osdx
