#pragma once

#include <Eigen/Core>

#include "osdx/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace osdx {
namespace nn {

// One named tensor inside a flat parameter vector. cols == 1 means vector.
struct TensorSpec {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 1;
    Eigen::Index offset = 0;

    Eigen::Index size() const { return rows * cols; }
};

// All of a network's parameters in one contiguous vector, with named
// matrix/vector views. Gradients live in a parallel vector of the same
// layout, so optimizers and finite-difference checks operate on flat
// vectors.
class ParamPack {
public:
    int add_matrix(std::string name, Eigen::Index rows, Eigen::Index cols);
    int add_vector(std::string name, Eigen::Index size);
    void finalize();

    bool finalized() const { return finalized_; }
    Eigen::Index size() const { return values_.size(); }
    const std::vector<TensorSpec>& specs() const { return specs_; }

    Eigen::Map<Eigen::MatrixXd> mat(int id);
    Eigen::Map<const Eigen::MatrixXd> mat(int id) const;
    Eigen::Map<Eigen::VectorXd> vec(int id);
    Eigen::Map<const Eigen::VectorXd> vec(int id) const;
    Eigen::Map<Eigen::MatrixXd> grad_mat(int id);
    Eigen::Map<Eigen::VectorXd> grad_vec(int id);

    Eigen::VectorXd& values() { return values_; }
    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd& grads() { return grads_; }
    const Eigen::VectorXd& grads() const { return grads_; }
    void zero_grads() { grads_.setZero(); }

private:
    std::vector<TensorSpec> specs_;
    Eigen::VectorXd values_;
    Eigen::VectorXd grads_;
    Eigen::Index total_ = 0;
    bool finalized_ = false;
};

struct AdamOptions {
    double lr = 0.0005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class AdamOptimizer {
public:
    explicit AdamOptimizer(Eigen::Index n, const AdamOptions& options = {});
    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads);

private:
    AdamOptions opt_;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
    long t_ = 0;
};

enum class Activation { Linear, Tanh, Relu, Sigmoid };

Activation activation_from_name(const std::string& name);
const std::string& activation_name(Activation a);

Eigen::VectorXd apply_activation(Activation a, const Eigen::VectorXd& z);
// Derivative expressed through the activated output y = f(z).
Eigen::VectorXd activation_grad_from_output(Activation a,
                                            const Eigen::VectorXd& y);

// Numerically stable softmax: exp(v - max) / sum. The summation order is
// fixed (ascending index) so results are reproducible bit-for-bit.
Eigen::VectorXd softmax(const Eigen::VectorXd& v);

// Stable binary cross entropy from the logit:
//   bce = max(z,0) - z*y + log(1 + exp(-|z|)),  d bce / d z = sigmoid(z) - y.
double bce_from_logit(double logit, double target);
double sigmoid(double z);

// Glorot-style uniform init on [-limit, limit], limit = sqrt(6/(fan_in+fan_out)).
void glorot_init(Eigen::Map<Eigen::MatrixXd> w, Rng& rng);

}  // namespace nn
}  // namespace osdx
