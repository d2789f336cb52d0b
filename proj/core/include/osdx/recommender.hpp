#pragma once

#include "osdx/domain.hpp"
#include "osdx/nn.hpp"
#include "osdx/strategy.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace osdx {

// Probability that each recommendable examination (every kind except Base,
// canonical order) should be performed next.
struct Recommendation {
    std::array<double, kNumRecommendable> probs{};

    double of(ExamKind k) const {
        return probs[static_cast<std::size_t>(k) - 1];
    }
};

enum class EncoderKind { Bilstm, MeanPool };

struct RecommenderConfig {
    Eigen::Index width = 16;  // feature row width W
    int hidden = 16;          // LSTM state size per direction
    int layers = 3;           // stacked bidirectional layers
    EncoderKind encoder = EncoderKind::Bilstm;
    int predictor_layers = 13;
    Eigen::Index predictor_width = 16;
    double forget_bias = 1.0;
    nn::Activation hidden_activation = nn::Activation::Tanh;

    // Each timestep is a feature row tagged with its examination-kind
    // one-hot, so the encoder sees which category a row belongs to.
    Eigen::Index input_dim() const { return width + kNumExamKinds; }
    Eigen::Index encoder_out() const { return 2 * hidden; }
};

// One training element derived from a RewardRecord: the observation's rows
// as a kind-tagged sequence, the intermediate prediction, the multi-hot
// action target over the 12 recommendable kinds, and the reward weight.
struct RecommenderExample {
    Eigen::MatrixXd sequence;  // T x input_dim, canonical row order
    Eigen::Vector3d pred;      // internal (Unknown, AD, CN)
    Eigen::VectorXd targets;   // length 12, in {0, 1}
    double weight = 1.0;       // reward, > 0
};

class RecommenderSampleSource {
public:
    virtual ~RecommenderSampleSource() = default;
    virtual std::size_t size() const = 0;
    virtual RecommenderExample example(std::size_t i) const = 0;
};

// Eager in-memory dataset.
class RecommenderDataset final : public RecommenderSampleSource {
public:
    explicit RecommenderDataset(std::vector<RecommenderExample> examples)
        : examples_(std::move(examples)) {}
    std::size_t size() const override { return examples_.size(); }
    RecommenderExample example(std::size_t i) const override {
        return examples_[i];
    }

private:
    std::vector<RecommenderExample> examples_;
};

// Lazy dataset over (cohort, examination records).
class ExaminationDataset final : public RecommenderSampleSource {
public:
    ExaminationDataset(const std::vector<VisitRecord>* visits,
                       std::vector<ExaminationRecord> records,
                       Eigen::Index width);
    std::size_t size() const override { return records_.size(); }
    RecommenderExample example(std::size_t i) const override;

private:
    const std::vector<VisitRecord>* visits_;
    std::vector<ExaminationRecord> records_;
    Eigen::Index width_;
};

// Kind-tagged sequence for a row map, rows in canonical order.
Eigen::MatrixXd sequence_from_rows(const ExamRowMap& rows, Eigen::Index width);
// Multi-hot target over recommendable kinds.
Eigen::VectorXd action_targets(const ExamSet& action);

// Sequence encoder (3 stacked bidirectional LSTM layers by default, or a
// mean-pool feedforward drop-in), a dense predictor that consumes the
// encoding concatenated with the classifier confidence, and 12 independent
// sigmoid heads with per-head log-noise parameters for the
// uncertainty-weighted loss
//   sum_j [ bce_j / (2 delta_j^2) + log delta_j ].
class RecommenderNet {
public:
    RecommenderNet(RecommenderConfig cfg, std::uint64_t seed);

    const RecommenderConfig& config() const { return cfg_; }
    nn::ParamPack& params() { return params_; }
    const nn::ParamPack& params() const { return params_; }

    Recommendation recommend(const Observation& obs) const;
    Recommendation recommend(const Eigen::MatrixXd& sequence,
                             const Eigen::Vector3d& pred) const;

    // Per-head reward-weighted mean binary cross entropy, combined with the
    // log-noise weights; gradients replace params().grads().
    double loss_and_grad(const std::vector<RecommenderExample>& batch);
    double loss(const std::vector<RecommenderExample>& batch) const;

private:
    struct Trace;
    void forward_one(const Eigen::MatrixXd& sequence,
                     const Eigen::Vector3d& pred, Trace& trace) const;
    void backward_one(const Trace& trace, const Eigen::VectorXd& dlogits);

    RecommenderConfig cfg_;
    nn::ParamPack params_;
    // tensor ids: [layer][direction]
    std::vector<std::array<int, 2>> lstm_w_, lstm_u_, lstm_b_;
    int mp_w_ = -1, mp_b_ = -1;
    std::vector<int> pred_w_, pred_b_;
    int head_w_ = -1, head_b_ = -1, log_delta_ = -1;
};

struct RecommenderTrainOptions {
    double learning_rate = 0.0005;
    int batch_size = 32;
    int max_epochs = 50;
    int patience = 5;
    std::uint64_t seed = 0;
};

TrainCurve train_recommender(RecommenderNet& net,
                             const RecommenderSampleSource& train,
                             const RecommenderSampleSource* val,
                             const RecommenderTrainOptions& options);

}  // namespace osdx
