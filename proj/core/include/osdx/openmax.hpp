#pragma once

#include "osdx/backbone.hpp"
#include "osdx/clustering.hpp"
#include "osdx/domain.hpp"
#include "osdx/evt.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace osdx {

struct OpenMaxConfig {
    int centers_per_class = 3;   // N[i]
    double quantile = 0.95;      // Q[i], shared default
    std::size_t tail_size = 0;   // 0 = default_tail_size(per-class count)
    int alpha = kNumKnownClasses;  // number of top classes to revise
    bool flag_f = true;          // abnormality-score correction
    // Revision weight per rank i (1-based): (alpha - i)/alpha by default;
    // the classic variant uses (alpha - i + 1)/alpha.
    bool classic_weights = false;
    // Optional unit-norm embedding preprocessing so the (1 - d_other) term
    // of the composite distance acts on distances concentrated in [0, 2].
    bool unit_normalize = false;
    KMeansOptions kmeans;
};

// Per-class multi-center Weibull calibration plus quantile thresholds.
struct OpenMaxCalibration {
    std::vector<CenterSet> centers;        // one per known class
    std::vector<WeibullTailModel> models;  // one per known class
    std::vector<double> thresholds;        // Thr[i], Q[i]-quantile of distances
    std::vector<double> quantiles;         // Q[i]
    int alpha = kNumKnownClasses;
    bool flag_f = true;
    bool classic_weights = false;
    bool unit_normalize = false;

    int n_classes() const { return static_cast<int>(centers.size()); }
};

// Per-class composite distances of one embedding against the calibration.
std::vector<double> calibration_distances(const OpenMaxCalibration& cal,
                                          const Eigen::VectorXd& embedding);

// Fits the calibration from correctly-classified training embeddings,
// grouped per known class (one matrix per class, samples in rows):
// per class, mini-batch k-means centers, composite distances of every
// sample to (own centers, all other classes' centers), a Weibull tail model
// over those distances, and the empirical Q-quantile threshold.
// Throws std::invalid_argument when a class has fewer samples than
// max(centers_per_class, tail_size); degenerate distance geometry surfaces
// as EvtError from the tail fit.
OpenMaxCalibration calibrate(const std::vector<Eigen::MatrixXd>& embeddings,
                             const OpenMaxConfig& config, std::uint64_t seed);

// Activation revision and unknown-probability estimation. Classes are
// ranked by descending activation; rank i in 1..alpha gets
//   omega = 1 - weight(i) * w_score(model, dist)
// with its own class's model and distance. The revised vector and the
// reallocated mass pass through a softmax over (v0_hat, v_hat...); when
// flag_f is set, each known probability is scaled by 1 - clamp((dist -
// Thr)/Thr, 0, 1) and the unknown entry absorbs the remainder.
DiagnosisProbs openmax_predict(const OpenMaxCalibration& cal,
                               const BackboneOutput& out);

// Empirical q-quantile: smallest order statistic whose rank covers at
// least a q fraction of the sample.
double empirical_quantile(std::vector<double> values, double q);

}  // namespace osdx
