#include "osdx/cohort.hpp"

#include "osdx/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace osdx {

void CohortSpec::validate() const {
    if (n_subjects < 1) throw std::invalid_argument("CohortSpec: n_subjects");
    if (width < 1) throw std::invalid_argument("CohortSpec: width");
    double prior_sum = 0.0;
    bool has_ad = false, has_cn = false;
    for (const auto& [name, cls] : classes) {
        prior_sum += cls.prior;
        if (cls.prior < 0.0) throw std::invalid_argument("CohortSpec: prior < 0");
        if (cls.stddev <= 0.0) {
            throw std::invalid_argument("CohortSpec: stddev must be > 0");
        }
        if (name == "AD" && cls.known) has_ad = true;
        if (name == "CN" && cls.known) has_cn = true;
    }
    if (std::abs(prior_sum - 1.0) > 1e-9) {
        throw std::invalid_argument("CohortSpec: priors must sum to 1");
    }
    if (!has_ad || !has_cn) {
        throw std::invalid_argument("CohortSpec: AD and CN must be known classes");
    }
    for (std::size_t e = 0; e < exams.size(); ++e) {
        const double miss = exams[e].missingness;
        if (miss < 0.0 || miss >= 1.0) {
            throw std::invalid_argument("CohortSpec: missingness out of [0,1)");
        }
    }
    if (exams[0].missingness != 0.0) {
        throw std::invalid_argument("CohortSpec: Base missingness must be 0");
    }
    if (visits_per_subject.empty()) {
        throw std::invalid_argument("CohortSpec: visits_per_subject empty");
    }
    double vsum = 0.0;
    for (double p : visits_per_subject) vsum += p;
    if (std::abs(vsum - 1.0) > 1e-9) {
        throw std::invalid_argument("CohortSpec: visit distribution must sum to 1");
    }
    if (refusal_rate < 0.0 || refusal_rate >= 1.0) {
        throw std::invalid_argument("CohortSpec: refusal_rate out of [0,1)");
    }
}

CohortSpec default_cohort_spec() {
    CohortSpec spec;
    spec.seed = 7;
    spec.n_subjects = 2000;
    spec.width = 16;
    spec.classes["AD"] = ClassGenSpec{0.30, +1.00, 1.00, true};
    spec.classes["CN"] = ClassGenSpec{0.30, -1.00, 1.00, true};
    spec.classes["MCI"] = ClassGenSpec{0.25, +0.05, 1.15, false};
    spec.classes["SMC"] = ClassGenSpec{0.15, -0.45, 1.15, false};
    // Separation grows along the cost order so the policy has a real
    // cost/information trade-off; missingness grows with it, mirroring how
    // rarely expensive examinations appear in practice.
    const std::array<double, kNumExamKinds> separation = {
        0.10, 0.25, 0.30, 0.30, 0.35, 0.35, 0.45,
        0.45, 0.90, 1.10, 1.20, 1.40, 1.60};
    const std::array<double, kNumExamKinds> missingness = {
        0.00, 0.15, 0.30, 0.35, 0.40, 0.40, 0.50,
        0.55, 0.55, 0.65, 0.70, 0.70, 0.75};
    for (std::size_t e = 0; e < kNumExamKinds; ++e) {
        spec.exams[e] = ExamGenSpec{missingness[e], separation[e]};
    }
    spec.visits_per_subject = {0.55, 0.30, 0.15};
    spec.n_institutions = 40;
    spec.refusal_rate = 0.25;
    return spec;
}

namespace {

std::size_t sample_categorical(Rng& rng, const std::vector<double>& probs) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

}  // namespace

std::vector<VisitRecord> generate_cohort(const CohortSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    std::vector<std::string> class_names;
    std::vector<const ClassGenSpec*> class_specs;
    std::vector<double> priors;
    for (const auto& [name, cls] : spec.classes) {
        class_names.push_back(name);
        class_specs.push_back(&cls);
        priors.push_back(cls.prior);
    }

    std::vector<VisitRecord> cohort;
    for (int s = 0; s < spec.n_subjects; ++s) {
        std::ostringstream id;
        id << "S";
        id.width(6);
        id.fill('0');
        id << s;

        const std::size_t ci = sample_categorical(rng, priors);
        const ClassGenSpec& cls = *class_specs[ci];
        DiagnosisLabel label;
        if (cls.known) {
            label.cls = class_names[ci] == "AD" ? DiagnosisClass::AD
                                                : DiagnosisClass::CN;
        } else {
            label.cls = DiagnosisClass::Unknown;
            label.true_subtype = class_names[ci];
        }
        const int n_visits =
            static_cast<int>(sample_categorical(rng, spec.visits_per_subject)) +
            1;

        for (int v = 0; v < n_visits; ++v) {
            VisitRecord visit;
            visit.subject_id = id.str();
            visit.visit_index = v;
            visit.label = label;
            for (ExamKind kind : canonical_exam_order()) {
                const ExamGenSpec& exam =
                    spec.exams[static_cast<std::size_t>(kind)];
                if (kind != ExamKind::Base &&
                    rng.uniform() < exam.missingness) {
                    continue;
                }
                FeatureRow row;
                row.kind = kind;
                row.values.resize(spec.width);
                const double mean = cls.position * exam.separation;
                for (Eigen::Index i = 0; i < spec.width; ++i) {
                    row.values[i] = rng.normal(mean, cls.stddev);
                }
                visit.rows.emplace(kind, std::move(row));
            }
            cohort.push_back(std::move(visit));
        }
    }
    return cohort;
}

CohortSplit split(const std::vector<VisitRecord>& cohort,
                  const SplitFractions& fractions, std::uint64_t seed) {
    const double fsum = fractions.train + fractions.val + fractions.test;
    if (std::abs(fsum - 1.0) > 1e-9) {
        throw std::invalid_argument("split: fractions must sum to 1");
    }

    // Subjects in first-appearance order; a subject is unknown when any of
    // its visits carries an unknown label.
    std::vector<std::string> subjects;
    std::map<std::string, bool> is_known;
    for (const VisitRecord& v : cohort) {
        auto [it, inserted] = is_known.emplace(v.subject_id, true);
        if (inserted) subjects.push_back(v.subject_id);
        if (!v.label.is_known()) it->second = false;
    }

    std::vector<std::string> known_subjects;
    for (const std::string& s : subjects) {
        if (is_known[s]) known_subjects.push_back(s);
    }

    Rng rng(seed);
    rng.shuffle(known_subjects);
    const std::size_t n = known_subjects.size();
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(fractions.train * static_cast<double>(n)));
    const std::size_t n_val =
        static_cast<std::size_t>(std::floor(fractions.val * static_cast<double>(n)));

    std::map<std::string, int> part;  // 0 train, 1 val, 2 test
    for (std::size_t i = 0; i < known_subjects.size(); ++i) {
        part[known_subjects[i]] =
            i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
    }
    for (const std::string& s : subjects) {
        if (!is_known[s]) part[s] = 2;
    }

    CohortSplit out;
    for (const VisitRecord& v : cohort) {
        switch (part[v.subject_id]) {
            case 0: out.train.push_back(v); break;
            case 1: out.val.push_back(v); break;
            default: out.test.push_back(v); break;
        }
    }
    const auto by_subject = [](const VisitRecord& a, const VisitRecord& b) {
        return a.subject_id != b.subject_id ? a.subject_id < b.subject_id
                                            : a.visit_index < b.visit_index;
    };
    std::sort(out.train.begin(), out.train.end(), by_subject);
    std::sort(out.val.begin(), out.val.end(), by_subject);
    std::sort(out.test.begin(), out.test.end(), by_subject);
    return out;
}

std::vector<InstitutionProfile> generate_institutions(std::uint64_t seed, int n,
                                                      double refusal_rate) {
    if (refusal_rate < 0.0 || refusal_rate >= 1.0) {
        throw std::invalid_argument("generate_institutions: refusal_rate");
    }
    Rng rng(seed);
    std::vector<InstitutionProfile> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        InstitutionProfile p;
        for (ExamKind kind : canonical_exam_order()) {
            if (kind == ExamKind::Base) continue;
            if (rng.uniform() >= refusal_rate) p.executable.insert(kind);
        }
        out.push_back(p);
    }
    return out;
}

}  // namespace osdx
