#pragma once

#include "osdx/domain.hpp"
#include "osdx/nn.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace osdx {

// Classifier backbone: a dense encoder, a mirrored decoder, and a stacked
// classifier head. Each decoder hidden layer's output is concatenated into
// the same-index classifier layer input (switchable), so reconstruction
// features stay visible to the classification path.
struct BackboneConfig {
    Eigen::Index width = 16;  // feature row width W
    int n_kinds = kNumExamKinds;
    std::vector<Eigen::Index> encoder_widths = {64, 32};
    std::vector<Eigen::Index> classifier_widths = {16, 8};
    int n_classes = kNumKnownClasses;
    bool decoder_classifier_link = true;
    nn::Activation hidden_activation = nn::Activation::Tanh;
    // Loss: alpha * cross_entropy + beta * sum-of-squared-weights
    //       + mu * reconstruction.
    double alpha = 1.0;
    double beta = 1e-4;
    double mu = 0.5;

    Eigen::Index input_size() const { return width * n_kinds; }
};

struct BackboneOutput {
    Eigen::VectorXd activation;      // pre-softmax, length n_classes
    Eigen::VectorXd embedding;       // penultimate classifier layer output
    Eigen::VectorXd reconstruction;  // decoder output, input-shaped
};

// Dataset interface for training: samples are materialized into dense
// input vectors on demand so strategy-expanded cohorts do not need to be
// held in memory all at once.
class SampleSource {
public:
    virtual ~SampleSource() = default;
    virtual std::size_t size() const = 0;
    virtual void materialize(std::size_t i,
                             Eigen::Ref<Eigen::VectorXd> out) const = 0;
    virtual int label(std::size_t i) const = 0;
};

// Eager dataset over an explicit input matrix (one column per sample).
class DenseDataset final : public SampleSource {
public:
    DenseDataset(Eigen::MatrixXd inputs, std::vector<int> labels);
    std::size_t size() const override { return labels_.size(); }
    void materialize(std::size_t i,
                     Eigen::Ref<Eigen::VectorXd> out) const override;
    int label(std::size_t i) const override { return labels_[i]; }

private:
    Eigen::MatrixXd inputs_;
    std::vector<int> labels_;
};

// One classification sample: a visit restricted to a strategy's kinds.
struct DiagnosisSample {
    std::size_t visit_index = 0;  // index into the cohort vector
    ExamSet kinds;
    DiagnosisLabel label;
};

// One labeled sample per (visit, strategy) pair, in input order.
std::vector<DiagnosisSample> build_diagnosis_dataset(
    const std::vector<VisitRecord>& visits,
    const std::vector<StrategySet>& strategies);

// Lazy dataset over known-class diagnosis samples.
class DiagnosisDataset final : public SampleSource {
public:
    DiagnosisDataset(const std::vector<VisitRecord>* visits,
                     std::vector<DiagnosisSample> samples, Eigen::Index width);
    std::size_t size() const override { return samples_.size(); }
    void materialize(std::size_t i,
                     Eigen::Ref<Eigen::VectorXd> out) const override;
    int label(std::size_t i) const override;
    const DiagnosisSample& sample(std::size_t i) const { return samples_[i]; }

private:
    const std::vector<VisitRecord>* visits_;
    std::vector<DiagnosisSample> samples_;
    Eigen::Index width_;
};

// Fills `out` (length n_kinds * width) with the visit's rows restricted to
// `kinds`, zero-filling absent slots.
void materialize_dense(const VisitRecord& visit, const ExamSet& kinds,
                       Eigen::Index width, Eigen::Ref<Eigen::VectorXd> out);

class BackboneNet {
public:
    BackboneNet(BackboneConfig cfg, std::uint64_t seed);

    const BackboneConfig& config() const { return cfg_; }
    nn::ParamPack& params() { return params_; }
    const nn::ParamPack& params() const { return params_; }

    BackboneOutput forward(const Eigen::VectorXd& dense_input) const;
    BackboneOutput forward(const FlattenResult& flat) const {
        return forward(flat.dense());
    }

    // Mean-reduced loss over the batch (columns of `inputs`); gradients are
    // accumulated into params().grads(), replacing previous content.
    double loss_and_grad(const Eigen::MatrixXd& inputs,
                         const std::vector<int>& labels);
    double loss(const Eigen::MatrixXd& inputs,
                const std::vector<int>& labels) const;

private:
    struct Trace;
    void forward_batch(const Eigen::MatrixXd& inputs, Trace& trace) const;

    BackboneConfig cfg_;
    nn::ParamPack params_;
    // tensor ids per layer group
    std::vector<int> enc_w_, enc_b_, dec_w_, dec_b_, cls_w_, cls_b_;
};

struct BackboneTrainOptions {
    double learning_rate = 0.0005;
    int batch_size = 64;
    int max_epochs = 200;
    int patience = 10;  // epochs without validation improvement
    std::uint64_t seed = 0;
};

struct TrainCurve {
    std::vector<double> train_loss;
    std::vector<double> val_loss;  // empty when no validation set
    int epochs = 0;
};

// Adam mini-batch training with seeded shuffling. When `val` is non-null
// and patience is positive, stops once validation loss has not improved for
// `patience` epochs and restores the best parameters.
TrainCurve train_backbone(BackboneNet& net, const SampleSource& train,
                          const SampleSource* val,
                          const BackboneTrainOptions& options);

}  // namespace osdx
