#include "osdx/backbone.hpp"

#include "osdx/rng.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace osdx {

DenseDataset::DenseDataset(Eigen::MatrixXd inputs, std::vector<int> labels)
    : inputs_(std::move(inputs)), labels_(std::move(labels)) {
    if (static_cast<std::size_t>(inputs_.cols()) != labels_.size()) {
        throw std::invalid_argument("DenseDataset: inputs/labels mismatch");
    }
}

void DenseDataset::materialize(std::size_t i,
                               Eigen::Ref<Eigen::VectorXd> out) const {
    out = inputs_.col(static_cast<Eigen::Index>(i));
}

std::vector<DiagnosisSample> build_diagnosis_dataset(
    const std::vector<VisitRecord>& visits,
    const std::vector<StrategySet>& strategies) {
    if (visits.size() != strategies.size()) {
        throw std::invalid_argument(
            "build_diagnosis_dataset: one StrategySet per visit required");
    }
    std::vector<DiagnosisSample> samples;
    for (std::size_t v = 0; v < visits.size(); ++v) {
        for (const ExamSet& ds : strategies[v].strategies) {
            samples.push_back(DiagnosisSample{v, ds, visits[v].label});
        }
    }
    return samples;
}

void materialize_dense(const VisitRecord& visit, const ExamSet& kinds,
                       Eigen::Index width, Eigen::Ref<Eigen::VectorXd> out) {
    out.setZero();
    for (const auto& [kind, row] : visit.rows) {
        if (!kinds.contains(kind)) continue;
        if (row.values.size() != width) {
            throw std::invalid_argument("materialize_dense: row width mismatch");
        }
        const Eigen::Index slot = static_cast<Eigen::Index>(kind);
        out.segment(slot * width, width) = row.values;
    }
}

DiagnosisDataset::DiagnosisDataset(const std::vector<VisitRecord>* visits,
                                   std::vector<DiagnosisSample> samples,
                                   Eigen::Index width)
    : visits_(visits), samples_(std::move(samples)), width_(width) {}

void DiagnosisDataset::materialize(std::size_t i,
                                   Eigen::Ref<Eigen::VectorXd> out) const {
    const DiagnosisSample& s = samples_[i];
    materialize_dense((*visits_)[s.visit_index], s.kinds, width_, out);
}

int DiagnosisDataset::label(std::size_t i) const {
    const DiagnosisSample& s = samples_[i];
    if (!s.label.is_known()) {
        throw std::logic_error("DiagnosisDataset: unknown-class sample");
    }
    return static_cast<int>(s.label.cls);
}

namespace {

Eigen::MatrixXd act_cols(nn::Activation a, const Eigen::MatrixXd& z) {
    switch (a) {
        case nn::Activation::Linear:
            return z;
        case nn::Activation::Tanh:
            return z.array().tanh().matrix();
        case nn::Activation::Relu:
            return z.array().max(0.0).matrix();
        case nn::Activation::Sigmoid:
            return z.unaryExpr([](double v) { return nn::sigmoid(v); });
    }
    throw std::logic_error("unreachable");
}

Eigen::MatrixXd act_grad_cols(nn::Activation a, const Eigen::MatrixXd& y) {
    switch (a) {
        case nn::Activation::Linear:
            return Eigen::MatrixXd::Ones(y.rows(), y.cols());
        case nn::Activation::Tanh:
            return (1.0 - y.array().square()).matrix();
        case nn::Activation::Relu:
            return (y.array() > 0.0).cast<double>().matrix();
        case nn::Activation::Sigmoid:
            return (y.array() * (1.0 - y.array())).matrix();
    }
    throw std::logic_error("unreachable");
}

}  // namespace

struct BackboneNet::Trace {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> enc_out;  // per encoder layer, activated
    std::vector<Eigen::MatrixXd> dec_out;  // per decoder layer; last = xhat
    std::vector<Eigen::MatrixXd> cls_in;   // concatenated classifier inputs
    std::vector<Eigen::MatrixXd> cls_out;  // hidden outputs, activated
    Eigen::MatrixXd logits;                // n_classes x B
};

BackboneNet::BackboneNet(BackboneConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)) {
    if (cfg_.encoder_widths.empty() || cfg_.n_classes < 2) {
        throw std::invalid_argument("BackboneNet: bad configuration");
    }
    const Eigen::Index input = cfg_.input_size();
    const std::size_t n_enc = cfg_.encoder_widths.size();
    const std::size_t n_dec_hidden = n_enc - 1;

    Eigen::Index in = input;
    for (std::size_t i = 0; i < n_enc; ++i) {
        const Eigen::Index out = cfg_.encoder_widths[i];
        enc_w_.push_back(params_.add_matrix("enc_w" + std::to_string(i), out, in));
        enc_b_.push_back(params_.add_vector("enc_b" + std::to_string(i), out));
        in = out;
    }
    // Mirror: latent -> ... -> input.
    for (std::size_t j = 0; j < n_enc; ++j) {
        const Eigen::Index out = (j + 1 < n_enc)
                                     ? cfg_.encoder_widths[n_enc - 2 - j]
                                     : input;
        dec_w_.push_back(params_.add_matrix("dec_w" + std::to_string(j), out, in));
        dec_b_.push_back(params_.add_vector("dec_b" + std::to_string(j), out));
        in = out;
    }
    in = cfg_.encoder_widths.back();
    for (std::size_t k = 0; k <= cfg_.classifier_widths.size(); ++k) {
        Eigen::Index layer_in = in;
        if (cfg_.decoder_classifier_link && k < n_dec_hidden) {
            layer_in += cfg_.encoder_widths[n_enc - 2 - k];
        }
        const Eigen::Index out = (k < cfg_.classifier_widths.size())
                                     ? cfg_.classifier_widths[k]
                                     : cfg_.n_classes;
        cls_w_.push_back(
            params_.add_matrix("cls_w" + std::to_string(k), out, layer_in));
        cls_b_.push_back(params_.add_vector("cls_b" + std::to_string(k), out));
        in = out;
    }
    params_.finalize();

    Rng rng(seed);
    for (int id : enc_w_) nn::glorot_init(params_.mat(id), rng);
    for (int id : dec_w_) nn::glorot_init(params_.mat(id), rng);
    for (int id : cls_w_) nn::glorot_init(params_.mat(id), rng);
}

void BackboneNet::forward_batch(const Eigen::MatrixXd& inputs,
                                Trace& trace) const {
    if (inputs.rows() != cfg_.input_size()) {
        throw std::invalid_argument("BackboneNet: input size mismatch");
    }
    const nn::Activation act = cfg_.hidden_activation;
    const std::size_t n_enc = enc_w_.size();
    const std::size_t n_dec_hidden = n_enc - 1;

    trace.input = inputs;
    trace.enc_out.clear();
    trace.dec_out.clear();
    trace.cls_in.clear();
    trace.cls_out.clear();

    const Eigen::MatrixXd* h = &trace.input;
    for (std::size_t i = 0; i < n_enc; ++i) {
        Eigen::MatrixXd z =
            (params_.mat(enc_w_[i]) * (*h)).colwise() + params_.vec(enc_b_[i]);
        trace.enc_out.push_back(act_cols(act, z));
        h = &trace.enc_out.back();
    }
    const Eigen::MatrixXd& latent = trace.enc_out.back();

    h = &latent;
    for (std::size_t j = 0; j < dec_w_.size(); ++j) {
        Eigen::MatrixXd z =
            (params_.mat(dec_w_[j]) * (*h)).colwise() + params_.vec(dec_b_[j]);
        const bool last = (j + 1 == dec_w_.size());
        trace.dec_out.push_back(last ? std::move(z) : act_cols(act, z));
        h = &trace.dec_out.back();
    }

    h = &latent;
    for (std::size_t k = 0; k < cls_w_.size(); ++k) {
        Eigen::MatrixXd in;
        if (cfg_.decoder_classifier_link && k < n_dec_hidden) {
            in.resize(h->rows() + trace.dec_out[k].rows(), h->cols());
            in.topRows(h->rows()) = *h;
            in.bottomRows(trace.dec_out[k].rows()) = trace.dec_out[k];
        } else {
            in = *h;
        }
        trace.cls_in.push_back(std::move(in));
        Eigen::MatrixXd z = (params_.mat(cls_w_[k]) * trace.cls_in.back())
                                .colwise() +
                            params_.vec(cls_b_[k]);
        if (k + 1 == cls_w_.size()) {
            trace.logits = std::move(z);
        } else {
            trace.cls_out.push_back(act_cols(act, z));
            h = &trace.cls_out.back();
        }
    }
}

BackboneOutput BackboneNet::forward(const Eigen::VectorXd& dense_input) const {
    Trace trace;
    forward_batch(dense_input, trace);
    BackboneOutput out;
    out.activation = trace.logits.col(0);
    out.embedding = trace.cls_out.empty() ? trace.enc_out.back().col(0)
                                          : trace.cls_out.back().col(0);
    out.reconstruction = trace.dec_out.back().col(0);
    return out;
}

namespace {

// Mean cross entropy of softmax(logits) against integer labels, plus the
// logit gradient scaled by alpha / B.
double softmax_ce(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                  Eigen::MatrixXd* dlogits) {
    const Eigen::Index batch = logits.cols();
    double total = 0.0;
    if (dlogits) dlogits->resize(logits.rows(), batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const Eigen::VectorXd p = nn::softmax(logits.col(b));
        const int y = labels[static_cast<std::size_t>(b)];
        total -= std::log(std::max(p[y], 1e-300));
        if (dlogits) {
            dlogits->col(b) = p;
            (*dlogits)(y, b) -= 1.0;
        }
    }
    return total / static_cast<double>(batch);
}

}  // namespace

double BackboneNet::loss(const Eigen::MatrixXd& inputs,
                         const std::vector<int>& labels) const {
    Trace trace;
    forward_batch(inputs, trace);
    const double batch = static_cast<double>(inputs.cols());
    double total = cfg_.alpha * softmax_ce(trace.logits, labels, nullptr);
    if (cfg_.beta != 0.0) {
        double l2 = 0.0;
        for (int id : enc_w_) l2 += params_.mat(id).squaredNorm();
        for (int id : dec_w_) l2 += params_.mat(id).squaredNorm();
        for (int id : cls_w_) l2 += params_.mat(id).squaredNorm();
        total += cfg_.beta * l2;
    }
    if (cfg_.mu != 0.0) {
        total += cfg_.mu *
                 (trace.dec_out.back() - trace.input).squaredNorm() / batch;
    }
    return total;
}

double BackboneNet::loss_and_grad(const Eigen::MatrixXd& inputs,
                                  const std::vector<int>& labels) {
    if (static_cast<std::size_t>(inputs.cols()) != labels.size() ||
        labels.empty()) {
        throw std::invalid_argument("BackboneNet: bad batch");
    }
    Trace trace;
    forward_batch(inputs, trace);
    params_.zero_grads();

    const nn::Activation act = cfg_.hidden_activation;
    const double batch = static_cast<double>(inputs.cols());
    const std::size_t n_enc = enc_w_.size();
    const std::size_t n_dec_hidden = n_enc - 1;

    Eigen::MatrixXd dlogits;
    double total = cfg_.alpha * softmax_ce(trace.logits, labels, &dlogits);
    dlogits *= cfg_.alpha / batch;

    double l2 = 0.0;
    if (cfg_.beta != 0.0) {
        for (int id : enc_w_) l2 += params_.mat(id).squaredNorm();
        for (int id : dec_w_) l2 += params_.mat(id).squaredNorm();
        for (int id : cls_w_) l2 += params_.mat(id).squaredNorm();
        total += cfg_.beta * l2;
    }

    Eigen::MatrixXd dxhat;
    if (cfg_.mu != 0.0) {
        const Eigen::MatrixXd resid = trace.dec_out.back() - trace.input;
        total += cfg_.mu * resid.squaredNorm() / batch;
        dxhat = (2.0 * cfg_.mu / batch) * resid;
    } else {
        dxhat = Eigen::MatrixXd::Zero(trace.input.rows(), trace.input.cols());
    }

    // Classifier backward; link slices feed gradients to decoder hiddens.
    std::vector<Eigen::MatrixXd> d_dec_hidden(n_dec_hidden);
    const Eigen::Index latent_dim = cfg_.encoder_widths.back();
    Eigen::MatrixXd d_latent =
        Eigen::MatrixXd::Zero(latent_dim, trace.input.cols());

    Eigen::MatrixXd delta = std::move(dlogits);
    for (std::size_t k = cls_w_.size(); k-- > 0;) {
        params_.grad_mat(cls_w_[k]) += delta * trace.cls_in[k].transpose();
        params_.grad_vec(cls_b_[k]) += delta.rowwise().sum();
        Eigen::MatrixXd dinput = params_.mat(cls_w_[k]).transpose() * delta;
        Eigen::Index prev_rows = dinput.rows();
        if (cfg_.decoder_classifier_link && k < n_dec_hidden) {
            const Eigen::Index link_rows = trace.dec_out[k].rows();
            prev_rows -= link_rows;
            if (d_dec_hidden[k].size() == 0) {
                d_dec_hidden[k] = dinput.bottomRows(link_rows);
            } else {
                d_dec_hidden[k] += dinput.bottomRows(link_rows);
            }
        }
        if (k == 0) {
            d_latent += dinput.topRows(prev_rows);
        } else {
            delta = dinput.topRows(prev_rows).cwiseProduct(
                act_grad_cols(act, trace.cls_out[k - 1]));
        }
    }

    // Decoder backward (last layer is linear).
    Eigen::MatrixXd ddec = std::move(dxhat);
    for (std::size_t j = dec_w_.size(); j-- > 0;) {
        if (j + 1 < dec_w_.size()) {
            // Hidden layer: incoming gradient plus any classifier link.
            if (d_dec_hidden[j].size() != 0) ddec += d_dec_hidden[j];
            ddec = ddec.cwiseProduct(act_grad_cols(act, trace.dec_out[j]));
        }
        const Eigen::MatrixXd& input =
            (j == 0) ? trace.enc_out.back() : trace.dec_out[j - 1];
        params_.grad_mat(dec_w_[j]) += ddec * input.transpose();
        params_.grad_vec(dec_b_[j]) += ddec.rowwise().sum();
        ddec = params_.mat(dec_w_[j]).transpose() * ddec;
    }
    d_latent += ddec;

    // Encoder backward.
    Eigen::MatrixXd denc =
        d_latent.cwiseProduct(act_grad_cols(act, trace.enc_out.back()));
    for (std::size_t i = enc_w_.size(); i-- > 0;) {
        const Eigen::MatrixXd& input =
            (i == 0) ? trace.input : trace.enc_out[i - 1];
        params_.grad_mat(enc_w_[i]) += denc * input.transpose();
        params_.grad_vec(enc_b_[i]) += denc.rowwise().sum();
        if (i > 0) {
            denc = (params_.mat(enc_w_[i]).transpose() * denc)
                       .cwiseProduct(act_grad_cols(act, trace.enc_out[i - 1]));
        }
    }

    if (cfg_.beta != 0.0) {
        for (int id : enc_w_) {
            params_.grad_mat(id) += 2.0 * cfg_.beta * params_.mat(id);
        }
        for (int id : dec_w_) {
            params_.grad_mat(id) += 2.0 * cfg_.beta * params_.mat(id);
        }
        for (int id : cls_w_) {
            params_.grad_mat(id) += 2.0 * cfg_.beta * params_.mat(id);
        }
    }
    return total;
}

namespace {

double dataset_loss(const BackboneNet& net, const SampleSource& data,
                    int batch_size) {
    const Eigen::Index input = net.config().input_size();
    const std::size_t n = data.size();
    double total = 0.0;
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop =
            std::min(n, start + static_cast<std::size_t>(batch_size));
        Eigen::MatrixXd batch(input, static_cast<Eigen::Index>(stop - start));
        std::vector<int> labels(stop - start);
        for (std::size_t i = start; i < stop; ++i) {
            data.materialize(i, batch.col(static_cast<Eigen::Index>(i - start)));
            labels[i - start] = data.label(i);
        }
        total += net.loss(batch, labels) * static_cast<double>(stop - start);
    }
    return total / static_cast<double>(n);
}

}  // namespace

TrainCurve train_backbone(BackboneNet& net, const SampleSource& train,
                          const SampleSource* val,
                          const BackboneTrainOptions& options) {
    if (train.size() == 0) {
        throw std::invalid_argument("train_backbone: empty dataset");
    }
    const Eigen::Index input = net.config().input_size();
    nn::AdamOptimizer adam(net.params().size(), {options.learning_rate});
    Rng rng(options.seed);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    TrainCurve curve;
    double best_val = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_params;
    int since_best = 0;

    for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(options.batch_size)) {
            const std::size_t stop =
                std::min(order.size(),
                         start + static_cast<std::size_t>(options.batch_size));
            Eigen::MatrixXd batch(input, static_cast<Eigen::Index>(stop - start));
            std::vector<int> labels(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                train.materialize(order[i],
                                  batch.col(static_cast<Eigen::Index>(i - start)));
                labels[i - start] = train.label(order[i]);
            }
            const double loss = net.loss_and_grad(batch, labels);
            epoch_loss += loss * static_cast<double>(stop - start);
            adam.step(net.params().values(), net.params().grads());
        }
        curve.train_loss.push_back(epoch_loss /
                                   static_cast<double>(order.size()));
        curve.epochs = epoch + 1;

        if (val && val->size() > 0) {
            const double vloss = dataset_loss(net, *val, options.batch_size);
            curve.val_loss.push_back(vloss);
            if (vloss < best_val - 1e-12) {
                best_val = vloss;
                best_params = net.params().values();
                since_best = 0;
            } else {
                ++since_best;
            }
            if (options.patience > 0 && since_best >= options.patience) break;
        }
    }
    if (best_params.size() > 0) net.params().values() = best_params;
    return curve;
}

}  // namespace osdx
