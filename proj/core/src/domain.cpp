#include "osdx/domain.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace osdx {

const std::array<ExamKind, kNumExamKinds>& canonical_exam_order() {
    static const std::array<ExamKind, kNumExamKinds> order = {
        ExamKind::Base, ExamKind::Cog,  ExamKind::CE,   ExamKind::Neur,
        ExamKind::FB,   ExamKind::PE,   ExamKind::Blood, ExamKind::Urine,
        ExamKind::MRI,  ExamKind::FDG,  ExamKind::AV45, ExamKind::Gene,
        ExamKind::CSF,
    };
    return order;
}

const std::string& exam_kind_name(ExamKind k) {
    static const std::array<std::string, kNumExamKinds> names = {
        "Base", "Cog", "CE", "Neur", "FB", "PE", "Blood",
        "Urine", "MRI", "FDG", "AV45", "Gene", "CSF",
    };
    return names.at(static_cast<std::size_t>(k));
}

std::optional<ExamKind> exam_kind_from_name(const std::string& name) {
    for (ExamKind k : canonical_exam_order()) {
        if (exam_kind_name(k) == name) return k;
    }
    return std::nullopt;
}

int cost_rank(ExamKind k) { return static_cast<int>(k); }

std::vector<ExamKind> ExamSet::kinds() const {
    std::vector<ExamKind> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (ExamKind k : canonical_exam_order()) {
        if (contains(k)) out.push_back(k);
    }
    return out;
}

bool ExamSet::canonical_less(const ExamSet& a, const ExamSet& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    // Lexicographic on ascending kind indices, i.e. first differing member.
    std::uint16_t diff = static_cast<std::uint16_t>(a.mask_ ^ b.mask_);
    if (diff == 0) return false;
    const int lowest = __builtin_ctz(diff);
    return (a.mask_ >> lowest) & 1u;  // a owns the smaller differing kind
}

const std::string& diagnosis_class_name(DiagnosisClass c) {
    static const std::array<std::string, 3> names = {"AD", "CN", "Unknown"};
    return names.at(static_cast<std::size_t>(c));
}

std::optional<DiagnosisClass> diagnosis_class_from_name(const std::string& name) {
    for (DiagnosisClass c :
         {DiagnosisClass::AD, DiagnosisClass::CN, DiagnosisClass::Unknown}) {
        if (diagnosis_class_name(c) == name) return c;
    }
    return std::nullopt;
}

ExamSet VisitRecord::present_kinds() const {
    ExamSet s;
    for (const auto& [kind, row] : rows) s.insert(kind);
    return s;
}

DiagnosisProbs::DiagnosisProbs(const Eigen::Vector3d& unknown_first)
    : p_(unknown_first) {
    const double sum = p_.sum();
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("probability vector must sum to 1");
    }
    for (int i = 0; i < 3; ++i) {
        if (!(p_[i] >= 0.0 && p_[i] <= 1.0 + 1e-12)) {
            throw std::invalid_argument("probability entries must be in [0,1]");
        }
    }
}

DiagnosisClass DiagnosisProbs::argmax() const {
    // Ties resolve toward the engine scan order (AD, CN, Unknown).
    DiagnosisClass best = DiagnosisClass::AD;
    double best_p = known(DiagnosisClass::AD);
    if (known(DiagnosisClass::CN) > best_p) {
        best = DiagnosisClass::CN;
        best_p = known(DiagnosisClass::CN);
    }
    if (unknown() > best_p) best = DiagnosisClass::Unknown;
    return best;
}

ExamSet Observation::present_kinds() const {
    ExamSet s;
    for (const auto& [kind, row] : rows) s.insert(kind);
    return s;
}

Eigen::VectorXd FlattenResult::dense() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(kNumExamKinds * width);
    Eigen::Index row = 0;
    for (int slot = 0; slot < kNumExamKinds; ++slot) {
        if (!mask[static_cast<std::size_t>(slot)]) continue;
        out.segment(slot * width, width) = matrix.row(row).transpose();
        ++row;
    }
    return out;
}

std::vector<std::string> validate_visit(const VisitRecord& v, Eigen::Index width) {
    std::vector<std::string> violations;
    if (!v.rows.contains(ExamKind::Base)) {
        violations.push_back("Base absent");
    }
    for (const auto& [kind, row] : v.rows) {
        if (row.kind != kind) {
            violations.push_back("row key does not match row kind for " +
                                 exam_kind_name(kind));
        }
        if (row.values.size() != width) {
            std::ostringstream os;
            os << exam_kind_name(kind) << ": wrong width " << row.values.size()
               << " (expected " << width << ")";
            violations.push_back(os.str());
        }
        if (!row.values.allFinite()) {
            violations.push_back(exam_kind_name(kind) + ": non-finite value");
        }
    }
    return violations;
}

FlattenResult flatten(const ExamRowMap& rows,
                      const std::array<ExamKind, kNumExamKinds>& order) {
    if (!rows.contains(ExamKind::Base)) {
        throw std::invalid_argument("flatten: Base row is required");
    }
    const Eigen::Index width = rows.begin()->second.values.size();
    for (const auto& [kind, row] : rows) {
        if (row.values.size() != width) {
            throw std::invalid_argument("flatten: rows disagree on width");
        }
    }
    FlattenResult out;
    out.width = width;
    out.matrix.resize(static_cast<Eigen::Index>(rows.size()), width);
    Eigen::Index next = 0;
    for (std::size_t slot = 0; slot < order.size(); ++slot) {
        const auto it = rows.find(order[slot]);
        if (it == rows.end()) continue;
        out.mask[slot] = true;  // mask indexes positions of `order`
        out.matrix.row(next++) = it->second.values.transpose();
    }
    return out;
}

}  // namespace osdx
