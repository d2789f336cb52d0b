#include "osdx/engine.hpp"

#include <stdexcept>

namespace osdx {

ExamSet StrategyTrace::granted_kinds() const {
    ExamSet s;
    for (const TraceRequest& r : requested) {
        if (r.granted) s.insert(r.kind);
    }
    return s;
}

DiagnosisModel make_diagnosis_model(const BackboneNet& net,
                                    const OpenMaxCalibration& cal,
                                    const RecommenderNet& recommender) {
    DiagnosisModel model;
    model.classify = [&net, &cal](const ExamRowMap& rows) {
        return openmax_predict(cal, net.forward(flatten(rows)));
    };
    model.recommend = [&recommender](const Observation& obs) {
        return recommender.recommend(obs);
    };
    return model;
}

std::pair<DiagnosisLabel, StrategyTrace> diagnose(const DataSource& source,
                                                  const InstitutionProfile& inst,
                                                  const DiagnosisModel& model,
                                                  const EngineConfig& cfg) {
    if (!source.has(ExamKind::Base)) {
        throw std::invalid_argument("diagnose: source must provide Base");
    }
    if (!inst.can_execute(ExamKind::Base)) {
        throw std::invalid_argument("diagnose: institution must execute Base");
    }

    StrategyTrace trace;
    ExamRowMap data;
    data.emplace(ExamKind::Base, source.get(ExamKind::Base));
    trace.requested.push_back(TraceRequest{0, ExamKind::Base, true});
    ExamSet handled{ExamKind::Base};

    const auto available = [&](ExamKind k) {
        return inst.can_execute(k) && source.has(k);
    };

    static const std::array<DiagnosisClass, 3> scan_order = {
        DiagnosisClass::AD, DiagnosisClass::CN, DiagnosisClass::Unknown};

    for (int step = 1; step <= cfg.max_steps; ++step) {
        trace.steps = step;
        const DiagnosisProbs pred = model.classify(data);
        trace.final_pred = pred.internal_order();

        for (std::size_t i = 0; i < scan_order.size(); ++i) {
            if (pred.of(scan_order[i]) >= cfg.delta[i]) {
                trace.final = DiagnosisLabel{scan_order[i], std::nullopt};
                return {trace.final, trace};
            }
        }

        Observation obs{data, pred};
        const Recommendation rec = model.recommend(obs);

        bool added = false;
        for (ExamKind k : canonical_exam_order()) {
            if (k == ExamKind::Base) continue;
            if (rec.of(k) < cfg.gamma_for(k)) continue;
            if (handled.contains(k)) continue;  // never request twice
            handled.insert(k);
            const bool granted = available(k);
            trace.requested.push_back(TraceRequest{step, k, granted});
            if (granted) {
                data.emplace(k, source.get(k));
                added = true;
            } else {
                ++trace.adjustments;
            }
        }

        if (!added) {
            // Cheapest common examination not yet requested this visit.
            for (ExamKind k : cfg.cost_order) {
                if (handled.contains(k) || !available(k)) continue;
                handled.insert(k);
                trace.requested.push_back(TraceRequest{step, k, true});
                data.emplace(k, source.get(k));
                added = true;
                break;
            }
        }

        if (!added) {
            trace.final = DiagnosisLabel{DiagnosisClass::Unknown, std::nullopt};
            return {trace.final, trace};
        }
    }

    trace.max_steps_hit = true;
    trace.final = DiagnosisLabel{DiagnosisClass::Unknown, std::nullopt};
    return {trace.final, trace};
}

}  // namespace osdx
