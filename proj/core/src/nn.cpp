#include "osdx/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace osdx {
namespace nn {

int ParamPack::add_matrix(std::string name, Eigen::Index rows,
                          Eigen::Index cols) {
    if (finalized_) throw std::logic_error("ParamPack: already finalized");
    TensorSpec spec{std::move(name), rows, cols, total_};
    total_ += spec.size();
    specs_.push_back(std::move(spec));
    return static_cast<int>(specs_.size()) - 1;
}

int ParamPack::add_vector(std::string name, Eigen::Index size) {
    return add_matrix(std::move(name), size, 1);
}

void ParamPack::finalize() {
    values_ = Eigen::VectorXd::Zero(total_);
    grads_ = Eigen::VectorXd::Zero(total_);
    finalized_ = true;
}

Eigen::Map<Eigen::MatrixXd> ParamPack::mat(int id) {
    const TensorSpec& s = specs_.at(static_cast<std::size_t>(id));
    return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const Eigen::MatrixXd> ParamPack::mat(int id) const {
    const TensorSpec& s = specs_.at(static_cast<std::size_t>(id));
    return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<Eigen::VectorXd> ParamPack::vec(int id) {
    const TensorSpec& s = specs_.at(static_cast<std::size_t>(id));
    return {values_.data() + s.offset, s.size()};
}

Eigen::Map<const Eigen::VectorXd> ParamPack::vec(int id) const {
    const TensorSpec& s = specs_.at(static_cast<std::size_t>(id));
    return {values_.data() + s.offset, s.size()};
}

Eigen::Map<Eigen::MatrixXd> ParamPack::grad_mat(int id) {
    const TensorSpec& s = specs_.at(static_cast<std::size_t>(id));
    return {grads_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<Eigen::VectorXd> ParamPack::grad_vec(int id) {
    const TensorSpec& s = specs_.at(static_cast<std::size_t>(id));
    return {grads_.data() + s.offset, s.size()};
}

AdamOptimizer::AdamOptimizer(Eigen::Index n, const AdamOptions& options)
    : opt_(options),
      m_(Eigen::VectorXd::Zero(n)),
      v_(Eigen::VectorXd::Zero(n)) {}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
    ++t_;
    m_ = opt_.beta1 * m_ + (1.0 - opt_.beta1) * grads;
    v_ = opt_.beta2 * v_.array().matrix() +
         (1.0 - opt_.beta2) * grads.array().square().matrix();
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    params.array() -= opt_.lr * (m_.array() / bc1) /
                      ((v_.array() / bc2).sqrt() + opt_.epsilon);
}

Activation activation_from_name(const std::string& name) {
    if (name == "linear") return Activation::Linear;
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    if (name == "sigmoid") return Activation::Sigmoid;
    throw std::invalid_argument("unknown activation: " + name);
}

const std::string& activation_name(Activation a) {
    static const std::string names[] = {"linear", "tanh", "relu", "sigmoid"};
    return names[static_cast<int>(a)];
}

Eigen::VectorXd apply_activation(Activation a, const Eigen::VectorXd& z) {
    switch (a) {
        case Activation::Linear:
            return z;
        case Activation::Tanh:
            return z.array().tanh().matrix();
        case Activation::Relu:
            return z.array().max(0.0).matrix();
        case Activation::Sigmoid:
            return z.unaryExpr([](double v) { return sigmoid(v); });
    }
    throw std::logic_error("unreachable");
}

Eigen::VectorXd activation_grad_from_output(Activation a,
                                            const Eigen::VectorXd& y) {
    switch (a) {
        case Activation::Linear:
            return Eigen::VectorXd::Ones(y.size());
        case Activation::Tanh:
            return (1.0 - y.array().square()).matrix();
        case Activation::Relu:
            return (y.array() > 0.0).cast<double>().matrix();
        case Activation::Sigmoid:
            return (y.array() * (1.0 - y.array())).matrix();
    }
    throw std::logic_error("unreachable");
}

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    Eigen::VectorXd e(v.size());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        e[i] = std::exp(v[i] - m);
        sum += e[i];
    }
    return e / sum;
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_from_logit(double logit, double target) {
    return std::max(logit, 0.0) - logit * target +
           std::log1p(std::exp(-std::abs(logit)));
}

void glorot_init(Eigen::Map<Eigen::MatrixXd> w, Rng& rng) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            w(r, c) = rng.uniform(-limit, limit);
        }
    }
}

}  // namespace nn
}  // namespace osdx
