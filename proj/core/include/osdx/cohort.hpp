#pragma once

#include "osdx/domain.hpp"
#include "osdx/engine.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace osdx {

// Latent-class feature model for one examination kind: a visit lacks the
// exam with probability `missingness`; when present, each coordinate is
// N(position * separation, stddev^2) for the subject's class.
struct ExamGenSpec {
    double missingness = 0.0;
    double separation = 1.0;
};

struct ClassGenSpec {
    double prior = 0.0;
    double position = 0.0;  // -1 .. +1 axis between the known classes
    double stddev = 1.0;
    bool known = false;     // known classes train; the rest are subtypes
};

struct CohortSpec {
    std::uint64_t seed = 7;
    int n_subjects = 2000;
    Eigen::Index width = 16;
    // Keyed by class name; AD and CN must be present and known.
    std::map<std::string, ClassGenSpec> classes;
    std::array<ExamGenSpec, kNumExamKinds> exams;
    std::vector<double> visits_per_subject = {0.55, 0.30, 0.15};  // P(1), P(2), ...
    int n_institutions = 40;
    double refusal_rate = 0.25;

    // Throws std::invalid_argument when priors do not sum to 1, a stddev or
    // missingness is out of range, or Base has nonzero missingness.
    void validate() const;
};

// The spec the end-to-end synthetic run uses: 2 known classes (AD, CN) with
// an informativeness gradient along the cost order, and 2 unknown subtypes
// (MCI, SMC) placed between the known-class means.
CohortSpec default_cohort_spec();

std::vector<VisitRecord> generate_cohort(const CohortSpec& spec);

struct SplitFractions {
    double train = 0.70;
    double val = 0.05;
    double test = 0.25;
};

struct CohortSplit {
    std::vector<VisitRecord> train;
    std::vector<VisitRecord> val;
    std::vector<VisitRecord> test;
};

// Subject-level split: all visits of a subject land in one part, and every
// subject with an unknown-labeled visit goes to test regardless of the
// fractions. Within each part, visits are ordered by (subject_id,
// visit_index).
CohortSplit split(const std::vector<VisitRecord>& cohort,
                  const SplitFractions& fractions, std::uint64_t seed);

// n profiles; each non-Base exam is excluded independently with
// probability refusal_rate. Base is always executable.
std::vector<InstitutionProfile> generate_institutions(std::uint64_t seed, int n,
                                                      double refusal_rate);

}  // namespace osdx
