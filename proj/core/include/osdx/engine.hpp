#pragma once

#include "osdx/domain.hpp"
#include "osdx/openmax.hpp"
#include "osdx/recommender.hpp"

#include <Eigen/Core>

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace osdx {

// What a medical institution can execute. Base is always executable.
struct InstitutionProfile {
    ExamSet executable{ExamKind::Base};

    bool can_execute(ExamKind k) const { return executable.contains(k); }
};

// Per-kind data provider for one subject visit. A kind the source cannot
// provide behaves exactly like an institution refusal.
class DataSource {
public:
    virtual ~DataSource() = default;
    virtual bool has(ExamKind k) const = 0;
    virtual const FeatureRow& get(ExamKind k) const = 0;
};

class VisitDataSource final : public DataSource {
public:
    explicit VisitDataSource(const VisitRecord* visit) : visit_(visit) {}
    bool has(ExamKind k) const override { return visit_->rows.contains(k); }
    const FeatureRow& get(ExamKind k) const override {
        return visit_->rows.at(k);
    }

private:
    const VisitRecord* visit_;
};

struct EngineConfig {
    // Decision thresholds in engine scan order (AD, CN, Unknown-last).
    std::array<double, kNumKnownClasses + 1> delta{0.95, 0.95, 0.95};
    // Recommendation thresholds per recommendable kind (canonical order).
    std::array<double, kNumRecommendable> gamma = [] {
        std::array<double, kNumRecommendable> g{};
        g.fill(0.5);
        return g;
    }();
    // Fallback preference: cheapest first.
    std::vector<ExamKind> cost_order = {
        ExamKind::Cog,   ExamKind::CE,  ExamKind::Neur, ExamKind::FB,
        ExamKind::PE,    ExamKind::Blood, ExamKind::Urine, ExamKind::MRI,
        ExamKind::FDG,   ExamKind::AV45, ExamKind::Gene, ExamKind::CSF,
    };
    // The loop is bounded by exam exhaustion anyway; this guards against
    // misconfigured providers.
    int max_steps = kNumExamKinds;

    double gamma_for(ExamKind k) const {
        return gamma[static_cast<std::size_t>(k) - 1];
    }
};

struct TraceRequest {
    int step = 0;
    ExamKind kind = ExamKind::Base;
    bool granted = false;
};

// Everything one diagnosis did: ordered requests with grant/refusal, the
// refusal count (strategy adjustments), the final label, and step count.
struct StrategyTrace {
    std::vector<TraceRequest> requested;
    int adjustments = 0;
    DiagnosisLabel final;
    int steps = 0;
    bool max_steps_hit = false;
    Eigen::Vector3d final_pred = Eigen::Vector3d::Zero();  // internal order

    ExamSet granted_kinds() const;
};

// The two model callbacks the loop needs; production wiring is
// make_diagnosis_model, test scenarios script their own.
struct DiagnosisModel {
    std::function<DiagnosisProbs(const ExamRowMap&)> classify;
    std::function<Recommendation(const Observation&)> recommend;
};

DiagnosisModel make_diagnosis_model(const BackboneNet& net,
                                    const OpenMaxCalibration& cal,
                                    const RecommenderNet& recommender);

// The dynamic diagnosis loop:
//   1. classify the data gathered so far;
//   2. return the first class (scan order AD, CN, Unknown) whose
//      probability reaches its delta threshold;
//   3. otherwise request every recommendable exam whose head fires at or
//      above gamma; a request is granted only when the institution can
//      execute it and the source can provide it, and no exam is ever
//      requested twice;
//   4. if nothing new was granted, fall back to the cheapest not-yet-
//      requested exam that is executable and providable;
//   5. if still nothing was added, return Unknown.
std::pair<DiagnosisLabel, StrategyTrace> diagnose(const DataSource& source,
                                                  const InstitutionProfile& inst,
                                                  const DiagnosisModel& model,
                                                  const EngineConfig& cfg);

}  // namespace osdx
