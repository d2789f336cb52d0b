#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace osdx {

// The 13 examination categories, in canonical (cheap-to-expensive) order.
// The enumerator value doubles as the default cost rank: Base is the intake
// examination every visit starts with, CSF is the most expensive.
enum class ExamKind : std::uint8_t {
    Base = 0,
    Cog,
    CE,
    Neur,
    FB,
    PE,
    Blood,
    Urine,
    MRI,
    FDG,
    AV45,
    Gene,
    CSF,
};

inline constexpr int kNumExamKinds = 13;
// Base is never recommendable; the other 12 kinds are.
inline constexpr int kNumRecommendable = kNumExamKinds - 1;
// Known diagnosis classes (AD, CN).
inline constexpr int kNumKnownClasses = 2;

const std::array<ExamKind, kNumExamKinds>& canonical_exam_order();
const std::string& exam_kind_name(ExamKind k);
std::optional<ExamKind> exam_kind_from_name(const std::string& name);
int cost_rank(ExamKind k);

// A set of examination kinds backed by a 13-bit mask. Iteration and
// comparison follow the canonical order.
class ExamSet {
public:
    ExamSet() = default;
    explicit ExamSet(std::uint16_t mask) : mask_(mask) {}
    ExamSet(std::initializer_list<ExamKind> kinds) {
        for (ExamKind k : kinds) insert(k);
    }

    void insert(ExamKind k) { mask_ |= bit(k); }
    void erase(ExamKind k) { mask_ &= static_cast<std::uint16_t>(~bit(k)); }
    bool contains(ExamKind k) const { return (mask_ & bit(k)) != 0; }
    bool empty() const { return mask_ == 0; }
    int size() const { return __builtin_popcount(mask_); }
    std::uint16_t mask() const { return mask_; }

    bool subset_of(const ExamSet& other) const {
        return (mask_ & other.mask_) == mask_;
    }
    bool strict_subset_of(const ExamSet& other) const {
        return subset_of(other) && mask_ != other.mask_;
    }
    ExamSet set_union(const ExamSet& other) const {
        return ExamSet(static_cast<std::uint16_t>(mask_ | other.mask_));
    }
    ExamSet set_difference(const ExamSet& other) const {
        return ExamSet(static_cast<std::uint16_t>(mask_ & ~other.mask_));
    }
    bool disjoint_with(const ExamSet& other) const {
        return (mask_ & other.mask_) == 0;
    }

    // Members in canonical order.
    std::vector<ExamKind> kinds() const;

    bool operator==(const ExamSet& other) const = default;

    // Ascending cardinality, then lexicographic on the canonical kind
    // sequence. This is the deterministic order strategy enumeration uses.
    static bool canonical_less(const ExamSet& a, const ExamSet& b);

private:
    static std::uint16_t bit(ExamKind k) {
        return static_cast<std::uint16_t>(1u << static_cast<unsigned>(k));
    }
    std::uint16_t mask_ = 0;
};

// One examination's feature block: a fixed-width row of dimensionless values.
struct FeatureRow {
    ExamKind kind = ExamKind::Base;
    Eigen::VectorXd values;
};

enum class DiagnosisClass : std::uint8_t { AD = 0, CN = 1, Unknown = 2 };

const std::string& diagnosis_class_name(DiagnosisClass c);
std::optional<DiagnosisClass> diagnosis_class_from_name(const std::string& name);

// Diagnosis label. Subjects whose true condition is outside the known
// classes carry class Unknown plus the true subtype tag (evaluation only;
// the subtype is never visible to training).
struct DiagnosisLabel {
    DiagnosisClass cls = DiagnosisClass::Unknown;
    std::optional<std::string> true_subtype;

    bool is_known() const { return cls != DiagnosisClass::Unknown; }
    bool operator==(const DiagnosisLabel& other) const = default;
};

using ExamRowMap = std::map<ExamKind, FeatureRow>;

// A subject's visit: label plus one feature row per performed examination.
// Base is always present.
struct VisitRecord {
    std::string subject_id;
    int visit_index = 0;
    DiagnosisLabel label;
    ExamRowMap rows;

    ExamSet present_kinds() const;
};

// The set of examination subsets derived from one visit, each containing
// Base, sorted by ExamSet::canonical_less, no duplicates.
struct StrategySet {
    std::vector<ExamSet> strategies;

    std::size_t size() const { return strategies.size(); }
};

// Class-probability vector over {Unknown, AD, CN}. Internally Unknown sits
// at index 0 (the slot the activation revision allocates); the engine scans
// thresholds in (AD, CN, Unknown) order, with Unknown last. engine_order()
// is the single permutation mapping between the two layouts.
class DiagnosisProbs {
public:
    DiagnosisProbs() : p_(Eigen::Vector3d::Zero()) {}
    explicit DiagnosisProbs(const Eigen::Vector3d& unknown_first);

    double unknown() const { return p_[0]; }
    // c in {AD, CN}.
    double known(DiagnosisClass c) const { return p_[1 + static_cast<int>(c)]; }
    double of(DiagnosisClass c) const {
        return c == DiagnosisClass::Unknown ? unknown() : known(c);
    }

    // Internal layout: (Unknown, AD, CN).
    const Eigen::Vector3d& internal_order() const { return p_; }
    // Engine threshold layout: (AD, CN, Unknown).
    Eigen::Vector3d engine_order() const {
        return Eigen::Vector3d(p_[1], p_[2], p_[0]);
    }

    DiagnosisClass argmax() const;

private:
    Eigen::Vector3d p_;
};

// What the recommender sees: the rows gathered so far plus the current
// intermediate class probabilities.
struct Observation {
    ExamRowMap rows;
    DiagnosisProbs pred;

    ExamSet present_kinds() const;
};

// One (observation, action, reward) training triple. Actions never include
// Base and never overlap the observation; only positive rewards are kept.
struct OARTuple {
    Observation obs;
    ExamSet action;
    double reward = 0.0;
};

// Stacked feature matrix for the rows present in an observation, in a fixed
// canonical order, plus the presence mask over that order.
struct FlattenResult {
    Eigen::MatrixXd matrix;        // n_present x width
    std::array<bool, kNumExamKinds> mask{};
    Eigen::Index width = 0;

    // Dense vector of length kNumExamKinds * width with absent kinds
    // zero-filled; this is the classifier's fixed-size input.
    Eigen::VectorXd dense() const;
};

// Returns every invariant violation of the visit (missing Base, wrong row
// width, non-finite value, kind/key mismatch); empty means ok.
std::vector<std::string> validate_visit(const VisitRecord& v, Eigen::Index width);

// Stacks the observation's rows in the given order. Throws
// std::invalid_argument on width mismatch or when Base is absent.
FlattenResult flatten(const ExamRowMap& rows,
                      const std::array<ExamKind, kNumExamKinds>& order =
                          canonical_exam_order());

}  // namespace osdx
