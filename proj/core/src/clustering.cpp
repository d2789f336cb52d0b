#include "osdx/clustering.hpp"

#include "osdx/rng.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace osdx {

CenterSet CenterSet::merged(const std::vector<const CenterSet*>& sets) {
    Eigen::Index rows = 0;
    Eigen::Index dim = -1;
    for (const CenterSet* s : sets) {
        rows += s->centers.rows();
        if (dim < 0) dim = s->centers.cols();
        if (s->centers.cols() != dim) {
            throw std::invalid_argument("CenterSet::merged: dimension mismatch");
        }
    }
    CenterSet out;
    out.centers.resize(rows, dim < 0 ? 0 : dim);
    Eigen::Index at = 0;
    for (const CenterSet* s : sets) {
        out.centers.middleRows(at, s->centers.rows()) = s->centers;
        at += s->centers.rows();
    }
    return out;
}

namespace {

int nearest_center(const Eigen::MatrixXd& centers, const Eigen::VectorXd& x,
                   double* best_sq = nullptr) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < centers.rows(); ++c) {
        const double d = (centers.row(c).transpose() - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (best_sq) *best_sq = best_d;
    return best;
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& data, int k, Rng& rng) {
    const Eigen::Index n = data.rows();
    Eigen::MatrixXd centers(k, data.cols());
    std::vector<double> dist_sq(static_cast<std::size_t>(n),
                                std::numeric_limits<double>::infinity());

    Eigen::Index first = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    centers.row(0) = data.row(first);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d =
                (data.row(i) - centers.row(c - 1)).squaredNorm();
            if (d < dist_sq[static_cast<std::size_t>(i)]) {
                dist_sq[static_cast<std::size_t>(i)] = d;
            }
            total += dist_sq[static_cast<std::size_t>(i)];
        }
        Eigen::Index chosen = 0;
        if (total <= 0.0) {
            // All mass at existing centers (duplicate points); fall back to
            // a uniform draw.
            chosen = static_cast<Eigen::Index>(
                rng.index(static_cast<std::size_t>(n)));
        } else {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += dist_sq[static_cast<std::size_t>(i)];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
        }
        centers.row(c) = data.row(chosen);
    }
    return centers;
}

// Re-seed any empty cluster with the farthest member of the largest cluster.
void fix_empty_clusters(const Eigen::MatrixXd& data, Eigen::MatrixXd& centers,
                        std::vector<int>& assign,
                        std::vector<Eigen::Index>& counts) {
    const int k = static_cast<int>(centers.rows());
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) continue;
        int largest = 0;
        for (int j = 1; j < k; ++j) {
            if (counts[static_cast<std::size_t>(j)] >
                counts[static_cast<std::size_t>(largest)]) {
                largest = j;
            }
        }
        Eigen::Index far_idx = -1;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            if (assign[static_cast<std::size_t>(i)] != largest) continue;
            const double d = (data.row(i) - centers.row(largest)).squaredNorm();
            if (d > far_d) {
                far_d = d;
                far_idx = i;
            }
        }
        if (far_idx < 0) continue;  // nothing to steal
        centers.row(c) = data.row(far_idx);
        assign[static_cast<std::size_t>(far_idx)] = c;
        counts[static_cast<std::size_t>(largest)] -= 1;
        counts[static_cast<std::size_t>(c)] += 1;
    }
}

void lloyd_epochs(const Eigen::MatrixXd& data, Eigen::MatrixXd& centers,
                  int epochs) {
    const Eigen::Index n = data.rows();
    const int k = static_cast<int>(centers.rows());
    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            assign[static_cast<std::size_t>(i)] =
                nearest_center(centers, data.row(i).transpose());
            counts[static_cast<std::size_t>(
                assign[static_cast<std::size_t>(i)])]++;
        }
        fix_empty_clusters(data, centers, assign, counts);
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, data.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assign[static_cast<std::size_t>(i)]) += data.row(i);
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centers.row(c) =
                    sums.row(c) /
                    static_cast<double>(counts[static_cast<std::size_t>(c)]);
            }
        }
    }
}

void streaming_epochs(const Eigen::MatrixXd& data, Eigen::MatrixXd& centers,
                      int batch, int epochs, Rng& rng) {
    const Eigen::Index n = data.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(centers.rows()), 0);
    std::vector<int> batch_assign;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (Eigen::Index start = 0; start < n; start += batch) {
            const Eigen::Index stop = std::min<Eigen::Index>(start + batch, n);
            batch_assign.resize(static_cast<std::size_t>(stop - start));
            // Assignments are cached for the whole batch before any update.
            for (Eigen::Index i = start; i < stop; ++i) {
                batch_assign[static_cast<std::size_t>(i - start)] =
                    nearest_center(
                        centers,
                        data.row(order[static_cast<std::size_t>(i)]).transpose());
            }
            for (Eigen::Index i = start; i < stop; ++i) {
                const int c = batch_assign[static_cast<std::size_t>(i - start)];
                counts[static_cast<std::size_t>(c)] += 1;
                const double eta =
                    1.0 / static_cast<double>(counts[static_cast<std::size_t>(c)]);
                centers.row(c) +=
                    eta * (data.row(order[static_cast<std::size_t>(i)]) -
                           centers.row(c));
            }
        }
    }
}

}  // namespace

CenterSet minibatch_kmeans(const Eigen::MatrixXd& data, int k,
                           const KMeansOptions& options) {
    const Eigen::Index n = data.rows();
    if (k < 1) throw std::invalid_argument("minibatch_kmeans: k must be >= 1");
    if (n < k) throw std::invalid_argument("minibatch_kmeans: k > n");
    if (options.batch < 1 || options.epochs < 1) {
        throw std::invalid_argument("minibatch_kmeans: bad batch/epochs");
    }

    Rng rng(options.seed);
    CenterSet out;
    out.centers = kmeanspp_init(data, k, rng);
    if (options.batch >= n) {
        lloyd_epochs(data, out.centers, options.epochs);
    } else {
        streaming_epochs(data, out.centers, options.batch, options.epochs, rng);
    }
    return out;
}

double min_distance(const Eigen::VectorXd& x, const CenterSet& centers) {
    if (x.size() != centers.dim()) {
        throw std::invalid_argument("min_distance: dimension mismatch");
    }
    double best_sq = 0.0;
    nearest_center(centers.centers, x, &best_sq);
    return std::sqrt(best_sq);
}

double composite_distance(const Eigen::VectorXd& x, const CenterSet& own,
                          const CenterSet& others) {
    const double d_own = min_distance(x, own);
    const double d_other = min_distance(x, others);
    const double t = 1.0 - d_other;
    return std::sqrt(d_own * d_own + t * t);
}

double kmeans_objective(const Eigen::MatrixXd& data, const CenterSet& centers) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        double best_sq = 0.0;
        nearest_center(centers.centers, data.row(i).transpose(), &best_sq);
        total += best_sq;
    }
    return total;
}

Eigen::MatrixXd unit_normalize_rows(const Eigen::MatrixXd& data) {
    Eigen::MatrixXd out = data;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double norm = out.row(i).norm();
        if (norm > 0.0) out.row(i) /= norm;
    }
    return out;
}

}  // namespace osdx
