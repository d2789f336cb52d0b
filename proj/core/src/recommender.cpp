#include "osdx/recommender.hpp"

#include "osdx/rng.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace osdx {

ExaminationDataset::ExaminationDataset(const std::vector<VisitRecord>* visits,
                                       std::vector<ExaminationRecord> records,
                                       Eigen::Index width)
    : visits_(visits), records_(std::move(records)), width_(width) {}

RecommenderExample ExaminationDataset::example(std::size_t i) const {
    const ExaminationRecord& rec = records_[i];
    const VisitRecord& visit = (*visits_)[rec.visit_index];
    ExamRowMap rows;
    for (const auto& [kind, row] : visit.rows) {
        if (rec.reward.obs_kinds.contains(kind)) rows.emplace(kind, row);
    }
    RecommenderExample ex;
    ex.sequence = sequence_from_rows(rows, width_);
    ex.pred = rec.reward.pred;
    ex.targets = action_targets(rec.reward.action);
    ex.weight = rec.reward.reward;
    return ex;
}

Eigen::MatrixXd sequence_from_rows(const ExamRowMap& rows, Eigen::Index width) {
    Eigen::MatrixXd seq(static_cast<Eigen::Index>(rows.size()),
                        width + kNumExamKinds);
    Eigen::Index t = 0;
    for (const auto& [kind, row] : rows) {  // map iterates in canonical order
        if (row.values.size() != width) {
            throw std::invalid_argument("sequence_from_rows: width mismatch");
        }
        seq.row(t).setZero();
        seq.row(t).head(width) = row.values.transpose();
        seq(t, width + static_cast<Eigen::Index>(kind)) = 1.0;
        ++t;
    }
    return seq;
}

Eigen::VectorXd action_targets(const ExamSet& action) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(kNumRecommendable);
    for (ExamKind k : action.kinds()) {
        if (k == ExamKind::Base) {
            throw std::invalid_argument("action_targets: Base is not an action");
        }
        y[static_cast<Eigen::Index>(k) - 1] = 1.0;
    }
    return y;
}

namespace {

Eigen::VectorXd sigmoid_vec(const Eigen::VectorXd& z) {
    return z.unaryExpr([](double v) { return nn::sigmoid(v); });
}

// Per-direction LSTM pass state, indexed by processing step (not original
// position). The step-to-position map is pos = reverse ? T-1-s : s.
struct DirCache {
    std::vector<Eigen::VectorXd> i, f, g, o, c, tc, h;

    void reserve(std::size_t t) {
        i.reserve(t); f.reserve(t); g.reserve(t);
        o.reserve(t); c.reserve(t); tc.reserve(t); h.reserve(t);
    }
};

void lstm_forward_dir(const Eigen::Ref<const Eigen::MatrixXd>& w,
                      const Eigen::Ref<const Eigen::MatrixXd>& u,
                      const Eigen::Ref<const Eigen::VectorXd>& b,
                      const Eigen::MatrixXd& in, bool reverse, int hidden,
                      DirCache& cache) {
    const Eigen::Index steps = in.rows();
    cache.reserve(static_cast<std::size_t>(steps));
    Eigen::VectorXd h = Eigen::VectorXd::Zero(hidden);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(hidden);
    for (Eigen::Index s = 0; s < steps; ++s) {
        const Eigen::Index pos = reverse ? steps - 1 - s : s;
        const Eigen::VectorXd z = w * in.row(pos).transpose() + u * h + b;
        Eigen::VectorXd gi = sigmoid_vec(z.head(hidden));
        Eigen::VectorXd gf = sigmoid_vec(z.segment(hidden, hidden));
        Eigen::VectorXd gg = z.segment(2 * hidden, hidden).array().tanh();
        Eigen::VectorXd go = sigmoid_vec(z.tail(hidden));
        c = gf.cwiseProduct(c) + gi.cwiseProduct(gg);
        Eigen::VectorXd tc = c.array().tanh();
        h = go.cwiseProduct(tc);
        cache.i.push_back(std::move(gi));
        cache.f.push_back(std::move(gf));
        cache.g.push_back(std::move(gg));
        cache.o.push_back(std::move(go));
        cache.c.push_back(c);
        cache.tc.push_back(std::move(tc));
        cache.h.push_back(h);
    }
}

// dh_ext rows are indexed by original position. din accumulates input
// gradients; gw/gu/gb accumulate parameter gradients.
void lstm_backward_dir(const Eigen::Ref<const Eigen::MatrixXd>& w,
                       const Eigen::Ref<const Eigen::MatrixXd>& u,
                       const Eigen::MatrixXd& in, bool reverse, int hidden,
                       const DirCache& cache,
                       const Eigen::Ref<const Eigen::MatrixXd>& dh_ext,
                       Eigen::MatrixXd& din, Eigen::Ref<Eigen::MatrixXd> gw,
                       Eigen::Ref<Eigen::MatrixXd> gu,
                       Eigen::Ref<Eigen::VectorXd> gb) {
    const Eigen::Index steps = in.rows();
    Eigen::VectorXd dh_carry = Eigen::VectorXd::Zero(hidden);
    Eigen::VectorXd dc_carry = Eigen::VectorXd::Zero(hidden);
    Eigen::VectorXd dz(4 * hidden);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(hidden);
    for (Eigen::Index s = steps - 1; s >= 0; --s) {
        const Eigen::Index pos = reverse ? steps - 1 - s : s;
        const std::size_t us = static_cast<std::size_t>(s);
        const Eigen::VectorXd dh =
            dh_ext.row(pos).transpose() + dh_carry;
        const Eigen::VectorXd& gi = cache.i[us];
        const Eigen::VectorXd& gf = cache.f[us];
        const Eigen::VectorXd& gg = cache.g[us];
        const Eigen::VectorXd& go = cache.o[us];
        const Eigen::VectorXd& tc = cache.tc[us];
        const Eigen::VectorXd& c_prev = s > 0 ? cache.c[us - 1] : zero;
        const Eigen::VectorXd& h_prev = s > 0 ? cache.h[us - 1] : zero;

        const Eigen::VectorXd do_ = dh.cwiseProduct(tc);
        const Eigen::VectorXd dct =
            (dh.array() * go.array() * (1.0 - tc.array().square())).matrix() +
            dc_carry;
        dz.head(hidden) = (dct.array() * gg.array() * gi.array() *
                           (1.0 - gi.array()))
                              .matrix();
        dz.segment(hidden, hidden) = (dct.array() * c_prev.array() *
                                      gf.array() * (1.0 - gf.array()))
                                         .matrix();
        dz.segment(2 * hidden, hidden) =
            (dct.array() * gi.array() * (1.0 - gg.array().square())).matrix();
        dz.tail(hidden) =
            (do_.array() * go.array() * (1.0 - go.array())).matrix();
        dc_carry = dct.cwiseProduct(gf);

        gw += dz * in.row(pos);
        gu += dz * h_prev.transpose();
        gb += dz;
        din.row(pos) += (w.transpose() * dz).transpose();
        dh_carry = u.transpose() * dz;
    }
}

}  // namespace

struct RecommenderNet::Trace {
    std::vector<Eigen::MatrixXd> layer_in;  // [0] = tagged sequence
    std::vector<std::array<DirCache, 2>> caches;
    Eigen::VectorXd mp_mean;
    Eigen::VectorXd enc;
    std::vector<Eigen::VectorXd> pred_in;
    std::vector<Eigen::VectorXd> pred_out;
    Eigen::VectorXd logits;
};

RecommenderNet::RecommenderNet(RecommenderConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)) {
    if (cfg_.hidden < 1 || cfg_.layers < 1 || cfg_.predictor_layers < 1) {
        throw std::invalid_argument("RecommenderNet: bad configuration");
    }
    const Eigen::Index h = cfg_.hidden;
    if (cfg_.encoder == EncoderKind::Bilstm) {
        Eigen::Index in = cfg_.input_dim();
        for (int l = 0; l < cfg_.layers; ++l) {
            std::array<int, 2> wid{}, uid{}, bid{};
            for (int d = 0; d < 2; ++d) {
                const std::string tag =
                    "lstm" + std::to_string(l) + (d == 0 ? "f" : "b");
                wid[d] = params_.add_matrix(tag + "_w", 4 * h, in);
                uid[d] = params_.add_matrix(tag + "_u", 4 * h, h);
                bid[d] = params_.add_vector(tag + "_b", 4 * h);
            }
            lstm_w_.push_back(wid);
            lstm_u_.push_back(uid);
            lstm_b_.push_back(bid);
            in = 2 * h;
        }
    } else {
        mp_w_ = params_.add_matrix("mp_w", cfg_.encoder_out(), cfg_.input_dim());
        mp_b_ = params_.add_vector("mp_b", cfg_.encoder_out());
    }

    Eigen::Index in = cfg_.encoder_out() + 3;
    for (int k = 0; k < cfg_.predictor_layers; ++k) {
        pred_w_.push_back(params_.add_matrix("pred_w" + std::to_string(k),
                                             cfg_.predictor_width, in));
        pred_b_.push_back(
            params_.add_vector("pred_b" + std::to_string(k),
                               cfg_.predictor_width));
        in = cfg_.predictor_width;
    }
    head_w_ = params_.add_matrix("head_w", kNumRecommendable, in);
    head_b_ = params_.add_vector("head_b", kNumRecommendable);
    log_delta_ = params_.add_vector("log_delta", kNumRecommendable);
    params_.finalize();

    Rng rng(seed);
    if (cfg_.encoder == EncoderKind::Bilstm) {
        for (int l = 0; l < cfg_.layers; ++l) {
            for (int d = 0; d < 2; ++d) {
                nn::glorot_init(params_.mat(lstm_w_[l][d]), rng);
                nn::glorot_init(params_.mat(lstm_u_[l][d]), rng);
                params_.vec(lstm_b_[l][d]).segment(h, h).setConstant(
                    cfg_.forget_bias);
            }
        }
    } else {
        nn::glorot_init(params_.mat(mp_w_), rng);
    }
    for (int id : pred_w_) nn::glorot_init(params_.mat(id), rng);
    nn::glorot_init(params_.mat(head_w_), rng);
}

void RecommenderNet::forward_one(const Eigen::MatrixXd& sequence,
                                 const Eigen::Vector3d& pred,
                                 Trace& trace) const {
    if (sequence.rows() < 1 || sequence.cols() != cfg_.input_dim()) {
        throw std::invalid_argument("RecommenderNet: bad sequence shape");
    }
    const int h = cfg_.hidden;
    trace.layer_in.clear();
    trace.caches.clear();
    trace.pred_in.clear();
    trace.pred_out.clear();
    trace.layer_in.push_back(sequence);

    if (cfg_.encoder == EncoderKind::Bilstm) {
        const Eigen::Index steps = sequence.rows();
        for (int l = 0; l < cfg_.layers; ++l) {
            trace.caches.emplace_back();
            auto& dirs = trace.caches.back();
            lstm_forward_dir(params_.mat(lstm_w_[l][0]),
                             params_.mat(lstm_u_[l][0]),
                             params_.vec(lstm_b_[l][0]), trace.layer_in[l],
                             false, h, dirs[0]);
            lstm_forward_dir(params_.mat(lstm_w_[l][1]),
                             params_.mat(lstm_u_[l][1]),
                             params_.vec(lstm_b_[l][1]), trace.layer_in[l],
                             true, h, dirs[1]);
            Eigen::MatrixXd out(steps, 2 * h);
            for (Eigen::Index pos = 0; pos < steps; ++pos) {
                out.row(pos).head(h) =
                    dirs[0].h[static_cast<std::size_t>(pos)].transpose();
                // Backward direction processed positions back-to-front, so
                // its state at original position pos sits at step T-1-pos.
                out.row(pos).tail(h) =
                    dirs[1].h[static_cast<std::size_t>(steps - 1 - pos)]
                        .transpose();
            }
            trace.layer_in.push_back(std::move(out));
        }
        const Eigen::MatrixXd& top = trace.layer_in.back();
        trace.enc.resize(2 * h);
        trace.enc.head(h) = top.row(top.rows() - 1).head(h).transpose();
        trace.enc.tail(h) = top.row(0).tail(h).transpose();
    } else {
        trace.mp_mean = sequence.colwise().mean().transpose();
        trace.enc = nn::apply_activation(
            cfg_.hidden_activation,
            params_.mat(mp_w_) * trace.mp_mean + params_.vec(mp_b_));
    }

    Eigen::VectorXd in(trace.enc.size() + 3);
    in.head(trace.enc.size()) = trace.enc;
    in.tail(3) = pred;
    for (std::size_t k = 0; k < pred_w_.size(); ++k) {
        trace.pred_in.push_back(in);
        const Eigen::VectorXd z =
            params_.mat(pred_w_[k]) * in + params_.vec(pred_b_[k]);
        trace.pred_out.push_back(nn::apply_activation(cfg_.hidden_activation, z));
        in = trace.pred_out.back();
    }
    trace.logits = params_.mat(head_w_) * in + params_.vec(head_b_);
}

Recommendation RecommenderNet::recommend(const Eigen::MatrixXd& sequence,
                                         const Eigen::Vector3d& pred) const {
    Trace trace;
    forward_one(sequence, pred, trace);
    Recommendation rec;
    for (int j = 0; j < kNumRecommendable; ++j) {
        rec.probs[static_cast<std::size_t>(j)] = nn::sigmoid(trace.logits[j]);
    }
    return rec;
}

Recommendation RecommenderNet::recommend(const Observation& obs) const {
    return recommend(sequence_from_rows(obs.rows, cfg_.width),
                     obs.pred.internal_order());
}

void RecommenderNet::backward_one(const Trace& trace,
                                  const Eigen::VectorXd& dlogits) {
    const int h = cfg_.hidden;
    params_.grad_mat(head_w_) += dlogits * trace.pred_out.back().transpose();
    params_.grad_vec(head_b_) += dlogits;
    Eigen::VectorXd dp = params_.mat(head_w_).transpose() * dlogits;

    for (std::size_t k = pred_w_.size(); k-- > 0;) {
        const Eigen::VectorXd dz = dp.cwiseProduct(nn::activation_grad_from_output(
            cfg_.hidden_activation, trace.pred_out[k]));
        params_.grad_mat(pred_w_[k]) += dz * trace.pred_in[k].transpose();
        params_.grad_vec(pred_b_[k]) += dz;
        dp = params_.mat(pred_w_[k]).transpose() * dz;
    }
    Eigen::VectorXd denc = dp.head(cfg_.encoder_out());

    if (cfg_.encoder == EncoderKind::MeanPool) {
        const Eigen::VectorXd dz = denc.cwiseProduct(
            nn::activation_grad_from_output(cfg_.hidden_activation, trace.enc));
        params_.grad_mat(mp_w_) += dz * trace.mp_mean.transpose();
        params_.grad_vec(mp_b_) += dz;
        return;
    }

    const Eigen::Index steps = trace.layer_in[0].rows();
    Eigen::MatrixXd dout = Eigen::MatrixXd::Zero(steps, 2 * h);
    dout.row(steps - 1).head(h) = denc.head(h).transpose();
    dout.row(0).tail(h) = denc.tail(h).transpose();

    for (int l = cfg_.layers - 1; l >= 0; --l) {
        const Eigen::MatrixXd& in = trace.layer_in[static_cast<std::size_t>(l)];
        Eigen::MatrixXd din = Eigen::MatrixXd::Zero(in.rows(), in.cols());
        const auto& dirs = trace.caches[static_cast<std::size_t>(l)];
        lstm_backward_dir(params_.mat(lstm_w_[l][0]), params_.mat(lstm_u_[l][0]),
                          in, false, h, dirs[0], dout.leftCols(h), din,
                          params_.grad_mat(lstm_w_[l][0]),
                          params_.grad_mat(lstm_u_[l][0]),
                          params_.grad_vec(lstm_b_[l][0]));
        lstm_backward_dir(params_.mat(lstm_w_[l][1]), params_.mat(lstm_u_[l][1]),
                          in, true, h, dirs[1], dout.rightCols(h), din,
                          params_.grad_mat(lstm_w_[l][1]),
                          params_.grad_mat(lstm_u_[l][1]),
                          params_.grad_vec(lstm_b_[l][1]));
        dout = std::move(din);
    }
}

double RecommenderNet::loss(const std::vector<RecommenderExample>& batch) const {
    if (batch.empty()) {
        throw std::invalid_argument("RecommenderNet: empty batch");
    }
    const double b = static_cast<double>(batch.size());
    Eigen::VectorXd bce_mean = Eigen::VectorXd::Zero(kNumRecommendable);
    Trace trace;
    for (const RecommenderExample& ex : batch) {
        forward_one(ex.sequence, ex.pred, trace);
        for (int j = 0; j < kNumRecommendable; ++j) {
            bce_mean[j] += ex.weight *
                           nn::bce_from_logit(trace.logits[j], ex.targets[j]) /
                           b;
        }
    }
    const auto log_delta = params_.vec(log_delta_);
    double total = 0.0;
    for (int j = 0; j < kNumRecommendable; ++j) {
        total += 0.5 * std::exp(-2.0 * log_delta[j]) * bce_mean[j] +
                 log_delta[j];
    }
    return total;
}

double RecommenderNet::loss_and_grad(
    const std::vector<RecommenderExample>& batch) {
    if (batch.empty()) {
        throw std::invalid_argument("RecommenderNet: empty batch");
    }
    params_.zero_grads();
    const double b = static_cast<double>(batch.size());
    Eigen::VectorXd precision(kNumRecommendable);  // 1 / (2 delta_j^2)
    {
        const auto log_delta = params_.vec(log_delta_);
        for (int j = 0; j < kNumRecommendable; ++j) {
            precision[j] = 0.5 * std::exp(-2.0 * log_delta[j]);
        }
    }

    Eigen::VectorXd bce_mean = Eigen::VectorXd::Zero(kNumRecommendable);
    Eigen::VectorXd dlogits(kNumRecommendable);
    Trace trace;
    for (const RecommenderExample& ex : batch) {
        forward_one(ex.sequence, ex.pred, trace);
        for (int j = 0; j < kNumRecommendable; ++j) {
            bce_mean[j] += ex.weight *
                           nn::bce_from_logit(trace.logits[j], ex.targets[j]) /
                           b;
            dlogits[j] = precision[j] * ex.weight / b *
                         (nn::sigmoid(trace.logits[j]) - ex.targets[j]);
        }
        backward_one(trace, dlogits);
    }

    double total = 0.0;
    const auto log_delta = params_.vec(log_delta_);
    auto g_log_delta = params_.grad_vec(log_delta_);
    for (int j = 0; j < kNumRecommendable; ++j) {
        total += precision[j] * bce_mean[j] + log_delta[j];
        // d/d log_delta of bce/(2 delta^2) + log delta.
        g_log_delta[j] += -2.0 * precision[j] * bce_mean[j] + 1.0;
    }
    return total;
}

TrainCurve train_recommender(RecommenderNet& net,
                             const RecommenderSampleSource& train,
                             const RecommenderSampleSource* val,
                             const RecommenderTrainOptions& options) {
    if (train.size() == 0) {
        throw std::invalid_argument("train_recommender: empty dataset");
    }
    nn::AdamOptimizer adam(net.params().size(), {options.learning_rate});
    Rng rng(options.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    const auto eval = [&](const RecommenderSampleSource& data) {
        std::vector<RecommenderExample> all;
        all.reserve(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            all.push_back(data.example(i));
        }
        return net.loss(all);
    };

    TrainCurve curve;
    double best_val = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_params;
    int since_best = 0;

    std::vector<RecommenderExample> batch;
    for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(options.batch_size)) {
            const std::size_t stop =
                std::min(order.size(),
                         start + static_cast<std::size_t>(options.batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) {
                batch.push_back(train.example(order[i]));
            }
            epoch_loss += net.loss_and_grad(batch);
            ++n_batches;
            adam.step(net.params().values(), net.params().grads());
        }
        curve.train_loss.push_back(epoch_loss /
                                   static_cast<double>(n_batches));
        curve.epochs = epoch + 1;

        if (val && val->size() > 0) {
            const double vloss = eval(*val);
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
