#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace osdx {

// k cluster centers of dimension d, stored row-wise.
struct CenterSet {
    Eigen::MatrixXd centers;  // k x d

    int k() const { return static_cast<int>(centers.rows()); }
    Eigen::Index dim() const { return centers.cols(); }

    // Union of two center sets (same dimension).
    static CenterSet merged(const std::vector<const CenterSet*>& sets);
};

struct KMeansOptions {
    int batch = 256;
    int epochs = 10;
    std::uint64_t seed = 0;
};

// Mini-batch k-means with k-means++ seeding. When batch >= n the epochs are
// plain Lloyd iterations (assign all, recompute means), which keeps the
// objective non-increasing; otherwise centers follow the streaming rule
//   v[c] += 1;  c += (1/v[c]) * (x - c)
// over seeded shuffles. Empty clusters are re-seeded with the farthest point
// of the largest cluster. Deterministic for fixed seed and data order.
CenterSet minibatch_kmeans(const Eigen::MatrixXd& data, int k,
                           const KMeansOptions& options = {});

// Euclidean distance to the nearest center.
double min_distance(const Eigen::VectorXd& x, const CenterSet& centers);

// sqrt(min_distance(x, own)^2 + (1 - min_distance(x, others))^2).
// The second term is kept literal: it can exceed zero in both directions
// before squaring. unit_normalize_rows() is the optional preprocessing that
// concentrates distances near [0, 2].
double composite_distance(const Eigen::VectorXd& x, const CenterSet& own,
                          const CenterSet& others);

// Sum of squared distances from every row to its nearest center.
double kmeans_objective(const Eigen::MatrixXd& data, const CenterSet& centers);

// Scales every row to unit L2 norm (zero rows stay zero).
Eigen::MatrixXd unit_normalize_rows(const Eigen::MatrixXd& data);

}  // namespace osdx
