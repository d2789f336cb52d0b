#include "osdx/openmax.hpp"

#include "osdx/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace osdx {

double empirical_quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw std::invalid_argument("empirical_quantile: empty sample");
    }
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    const double rank = std::ceil(q * n);
    const std::size_t idx = static_cast<std::size_t>(
        std::clamp(rank - 1.0, 0.0, n - 1.0));
    return values[idx];
}

namespace {

CenterSet others_merged(const std::vector<CenterSet>& centers, int skip) {
    std::vector<const CenterSet*> rest;
    for (int j = 0; j < static_cast<int>(centers.size()); ++j) {
        if (j != skip) rest.push_back(&centers[j]);
    }
    return CenterSet::merged(rest);
}

Eigen::VectorXd maybe_normalize(const Eigen::VectorXd& x, bool unit) {
    if (!unit) return x;
    const double n = x.norm();
    return n > 0.0 ? Eigen::VectorXd(x / n) : x;
}

}  // namespace

std::vector<double> calibration_distances(const OpenMaxCalibration& cal,
                                          const Eigen::VectorXd& embedding) {
    const Eigen::VectorXd x = maybe_normalize(embedding, cal.unit_normalize);
    std::vector<double> dist(static_cast<std::size_t>(cal.n_classes()));
    for (int c = 0; c < cal.n_classes(); ++c) {
        dist[static_cast<std::size_t>(c)] =
            composite_distance(x, cal.centers[c], others_merged(cal.centers, c));
    }
    return dist;
}

OpenMaxCalibration calibrate(const std::vector<Eigen::MatrixXd>& embeddings,
                             const OpenMaxConfig& config, std::uint64_t seed) {
    const int n_classes = static_cast<int>(embeddings.size());
    if (n_classes < 2) {
        throw std::invalid_argument("calibrate: need at least two classes");
    }
    if (config.alpha < 1 || config.alpha > n_classes) {
        throw std::invalid_argument("calibrate: alpha out of range");
    }

    OpenMaxCalibration cal;
    cal.alpha = config.alpha;
    cal.flag_f = config.flag_f;
    cal.classic_weights = config.classic_weights;
    cal.unit_normalize = config.unit_normalize;

    std::vector<Eigen::MatrixXd> data;
    data.reserve(embeddings.size());
    for (const Eigen::MatrixXd& m : embeddings) {
        data.push_back(config.unit_normalize ? unit_normalize_rows(m) : m);
    }

    for (int c = 0; c < n_classes; ++c) {
        const std::size_t n = static_cast<std::size_t>(data[c].rows());
        const std::size_t tail = config.tail_size > 0 ? config.tail_size
                                                      : default_tail_size(n);
        if (n < std::max<std::size_t>(
                    static_cast<std::size_t>(config.centers_per_class), tail)) {
            throw std::invalid_argument(
                "calibrate: class " + std::to_string(c) + " has too few samples");
        }
        KMeansOptions km = config.kmeans;
        km.seed = Rng::derive(seed, static_cast<std::uint64_t>(c)).next_u64();
        cal.centers.push_back(
            minibatch_kmeans(data[c], config.centers_per_class, km));
    }

    for (int c = 0; c < n_classes; ++c) {
        const CenterSet others = others_merged(cal.centers, c);
        std::vector<double> dist;
        dist.reserve(static_cast<std::size_t>(data[c].rows()));
        for (Eigen::Index i = 0; i < data[c].rows(); ++i) {
            dist.push_back(composite_distance(data[c].row(i).transpose(),
                                              cal.centers[c], others));
        }
        const std::size_t tail = config.tail_size > 0
                                     ? config.tail_size
                                     : default_tail_size(dist.size());
        cal.models.push_back(fit_high(dist, tail));
        cal.thresholds.push_back(empirical_quantile(dist, config.quantile));
        cal.quantiles.push_back(config.quantile);
    }
    return cal;
}

DiagnosisProbs openmax_predict(const OpenMaxCalibration& cal,
                               const BackboneOutput& out) {
    const int n_classes = cal.n_classes();
    if (n_classes != kNumKnownClasses) {
        throw std::invalid_argument("openmax_predict: calibration class count");
    }
    if (out.activation.size() != n_classes) {
        throw std::invalid_argument("openmax_predict: activation size mismatch");
    }

    const std::vector<double> dist = calibration_distances(cal, out.embedding);

    // Rank classes by descending activation (stable: lower index wins ties).
    std::vector<int> ranked(static_cast<std::size_t>(n_classes));
    std::iota(ranked.begin(), ranked.end(), 0);
    std::stable_sort(ranked.begin(), ranked.end(), [&](int a, int b) {
        return out.activation[a] > out.activation[b];
    });

    Eigen::VectorXd omega = Eigen::VectorXd::Ones(n_classes);
    for (int i = 1; i <= cal.alpha; ++i) {
        const int c = ranked[static_cast<std::size_t>(i - 1)];
        const double weight =
            cal.classic_weights
                ? static_cast<double>(cal.alpha - i + 1) / cal.alpha
                : static_cast<double>(cal.alpha - i) / cal.alpha;
        omega[c] = 1.0 - weight * cal.models[static_cast<std::size_t>(c)]
                                      .w_score(dist[static_cast<std::size_t>(c)]);
    }

    Eigen::VectorXd scores(n_classes + 1);
    scores[0] = 0.0;  // v0_hat accumulates the removed activation mass
    for (int c = 0; c < n_classes; ++c) {
        scores[c + 1] = out.activation[c] * omega[c];
        scores[0] += out.activation[c] * (1.0 - omega[c]);
    }
    Eigen::VectorXd probs = nn::softmax(scores);

    if (cal.flag_f) {
        double known_sum = 0.0;
        for (int c = 0; c < n_classes; ++c) {
            const double thr = cal.thresholds[static_cast<std::size_t>(c)];
            double abnormal = 0.0;
            if (dist[static_cast<std::size_t>(c)] > thr) {
                abnormal = thr > 0.0
                               ? std::min(
                                     (dist[static_cast<std::size_t>(c)] - thr) /
                                         thr,
                                     1.0)
                               : 1.0;
            }
            probs[c + 1] *= 1.0 - abnormal;
            known_sum += probs[c + 1];
        }
        probs[0] = 1.0 - known_sum;
    }
    return DiagnosisProbs(Eigen::Vector3d(probs[0], probs[1], probs[2]));
}

}  // namespace osdx
