#include "gambo/nets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gambo/rng.hpp"
#include "kernels.hpp"

namespace gambo {

double Model::value(const VectorXd& z) const { return forward_batch(z.transpose())(0); }

VectorXd Model::gradient(const VectorXd& z) const {
  return forward_and_input_grads(z.transpose()).grads.row(0).transpose();
}

namespace {

void validate_dims(std::span<const int> dims) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp needs at least an input and an output layer");
  for (int d : dims)
    if (d <= 0) throw std::invalid_argument("Mlp layer widths must be positive");
  if (dims.back() != 1) throw std::invalid_argument("Mlp output layer must have width 1");
}

RowMatrix to_rows(const MatrixXd& Z) { return RowMatrix(Z); }

// Forward pass over a row-major batch. pre[l] holds the pre-activations of
// layer l (B x dims[l+1]); acts[l] holds the input to layer l.
struct Tape {
  std::vector<RowMatrix> acts;
  std::vector<RowMatrix> pre;
};

}  // namespace

Mlp Mlp::init(std::span<const int> layer_dims, std::uint64_t seed, double negative_slope) {
  Mlp net = zeros(layer_dims, negative_slope);
  Rng rng(derive_seed(seed, "mlp-init"));
  for (std::size_t l = 0; l < net.weights_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.dims_[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    RowMatrix& W = net.weights_[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = u(rng);
  }
  return net;
}

Mlp Mlp::zeros(std::span<const int> layer_dims, double negative_slope) {
  validate_dims(layer_dims);
  Mlp net;
  net.dims_.assign(layer_dims.begin(), layer_dims.end());
  net.slope_ = negative_slope;
  for (std::size_t l = 0; l + 1 < net.dims_.size(); ++l) {
    net.weights_.push_back(RowMatrix::Zero(net.dims_[l + 1], net.dims_[l]));
    net.biases_.push_back(VectorXd::Zero(net.dims_[l + 1]));
  }
  return net;
}

Mlp Mlp::from_parameters(std::vector<RowMatrix> weights, std::vector<VectorXd> biases,
                         double negative_slope) {
  if (weights.empty() || weights.size() != biases.size())
    throw std::invalid_argument("Mlp::from_parameters: need one bias per weight matrix");
  std::vector<int> dims{static_cast<int>(weights.front().cols())};
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].cols() != dims.back() || biases[l].size() != weights[l].rows())
      throw std::invalid_argument("Mlp::from_parameters: inconsistent layer shapes");
    dims.push_back(static_cast<int>(weights[l].rows()));
  }
  Mlp net = zeros(dims, negative_slope);
  net.weights_ = std::move(weights);
  net.biases_ = std::move(biases);
  return net;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return n;
}

void Mlp::check_input(Eigen::Index cols) const {
  if (dims_.empty()) throw std::logic_error("Mlp is uninitialized");
  if (cols != dims_.front())
    throw DimensionError("Mlp input has " + std::to_string(cols) + " features, expected " +
                         std::to_string(dims_.front()));
}

namespace {

// Inference paths use the fixed-order kernel so batch rows match single
// calls exactly; parameter gradients have no such contract and use Eigen.
enum class Gemm { fixed_order, fast };

Tape run_forward(const Mlp& net, RowMatrix X, Gemm mode = Gemm::fixed_order) {
  Tape tape;
  const auto& W = net.weights();
  const auto& b = net.biases();
  const double slope = net.negative_slope();
  tape.acts.reserve(W.size());
  tape.pre.reserve(W.size());
  tape.acts.push_back(std::move(X));
  for (std::size_t l = 0; l < W.size(); ++l) {
    RowMatrix H;
    if (mode == Gemm::fixed_order) {
      detail::gemm_nt(tape.acts.back(), W[l], H);
    } else {
      H.noalias() = tape.acts.back() * W[l].transpose();
    }
    H.rowwise() += b[l].transpose();
    tape.pre.push_back(H);
    if (l + 1 < W.size()) {
      RowMatrix A = H.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
      tape.acts.push_back(std::move(A));
    }
  }
  return tape;
}

// Backpropagates output sensitivities delta (B x 1) to per-layer sensitivities.
// Returns deltas[l] = dLoss/dpre[l], plus the input gradient when requested.
std::vector<RowMatrix> run_backward(const Mlp& net, const Tape& tape, RowMatrix delta,
                                    RowMatrix* input_grad, Gemm mode = Gemm::fixed_order) {
  const auto& W = net.weights();
  const double slope = net.negative_slope();
  std::vector<RowMatrix> deltas(W.size());
  deltas.back() = std::move(delta);
  for (std::size_t l = W.size(); l-- > 0;) {
    if (l == 0 && input_grad == nullptr) break;
    RowMatrix G;
    if (mode == Gemm::fixed_order) {
      RowMatrix Wt = W[l].transpose();
      detail::gemm_nt(deltas[l], Wt, G);
    } else {
      G.noalias() = deltas[l] * W[l];
    }
    if (l == 0) {
      *input_grad = std::move(G);
      break;
    }
    const RowMatrix& P = tape.pre[l - 1];
    for (Eigen::Index i = 0; i < G.rows(); ++i)
      for (Eigen::Index j = 0; j < G.cols(); ++j)
        if (!(P(i, j) > 0.0)) G(i, j) *= slope;
    deltas[l - 1] = std::move(G);
  }
  return deltas;
}

}  // namespace

double Mlp::forward(const VectorXd& z) const {
  check_input(z.size());
  RowMatrix X = z.transpose();
  return run_forward(*this, std::move(X)).pre.back()(0, 0);
}

VectorXd Mlp::input_grad(const VectorXd& z) const {
  MatrixXd Z = z.transpose();
  return forward_and_input_grads(Z).grads.row(0).transpose();
}

VectorXd Mlp::forward_batch(const MatrixXd& Z) const {
  check_input(Z.cols());
  Tape tape = run_forward(*this, to_rows(Z));
  return tape.pre.back().col(0);
}

double Mlp::mean_output(const MatrixXd& Z) const {
  check_input(Z.cols());
  if (Z.rows() < 1) throw DimensionError("mean_output needs at least one row");
  return run_forward(*this, to_rows(Z), Gemm::fast).pre.back().mean();
}

BatchResult Mlp::forward_and_input_grads(const MatrixXd& Z) const {
  check_input(Z.cols());
  if (Z.rows() < 1) throw DimensionError("forward_and_input_grads needs at least one row");
  Tape tape = run_forward(*this, to_rows(Z));
  RowMatrix grad;
  run_backward(*this, tape, RowMatrix::Ones(Z.rows(), 1), &grad);
  return {tape.pre.back().col(0), MatrixXd(grad)};
}

ParamGrads Mlp::param_grads(const MatrixXd& Z, const VectorXd& output_weights) const {
  return param_grads(Z, [&output_weights](const VectorXd&) { return output_weights; });
}

ParamGrads Mlp::param_grads(const MatrixXd& Z,
                            const std::function<VectorXd(const VectorXd&)>& weight_fn) const {
  check_input(Z.cols());
  Tape tape = run_forward(*this, to_rows(Z), Gemm::fast);
  const VectorXd output_weights = weight_fn(tape.pre.back().col(0));
  if (output_weights.size() != Z.rows())
    throw DimensionError("param_grads: one output weight per row required");
  std::vector<RowMatrix> deltas = run_backward(*this, tape, RowMatrix(output_weights), nullptr, Gemm::fast);
  ParamGrads g;
  g.weights.resize(weights_.size());
  g.biases.resize(weights_.size());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.weights[l].noalias() = deltas[l].transpose() * tape.acts[l];
    g.biases[l] = deltas[l].colwise().sum().transpose();
  }
  return g;
}

void Mlp::clip_weights(double bound) {
  if (!(bound > 0.0)) throw std::invalid_argument("clip_weights: bound must be positive");
  for (auto& W : weights_) W = W.cwiseMax(-bound).cwiseMin(bound);
  for (auto& b : biases_) b = b.cwiseMax(-bound).cwiseMin(bound);
}

Mlp clip_weights(Mlp net, double bound) {
  net.clip_weights(bound);
  return net;
}

double Mlp::lipschitz_upper_bound() const {
  double k = 1.0;
  for (const auto& W : weights_) {
    if (W.isZero(0.0)) return 0.0;
    // Largest eigenvalue of the smaller Gram matrix is the squared spectral norm.
    const MatrixXd gram = W.rows() <= W.cols() ? MatrixXd(W * W.transpose()) : MatrixXd(W.transpose() * W);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    k *= std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
  }
  return k * std::pow(std::max(1.0, std::abs(slope_)), static_cast<double>(weights_.size() - 1));
}

bool Mlp::operator==(const Mlp& other) const {
  if (dims_ != other.dims_ || slope_ != other.slope_) return false;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    if (weights_[l] != other.weights_[l] || biases_[l] != other.biases_[l]) return false;
  return true;
}

AdamState::AdamState(const Mlp& net, double lr) : learning_rate(lr) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    m_w.push_back(RowMatrix::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
    v_w.push_back(m_w.back());
    m_b.push_back(VectorXd::Zero(net.biases()[l].size()));
    v_b.push_back(m_b.back());
  }
}

void AdamState::apply(Mlp& net, const ParamGrads& grads) {
  ++step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  const double lr = learning_rate;
  const double eps = epsilon;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    update(net.weights()[l], m_w[l], v_w[l], grads.weights[l]);
    update(net.biases()[l], m_b[l], v_b[l], grads.biases[l]);
  }
}

void sgd_step(Mlp& net, const ParamGrads& grads, double scale) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    net.weights()[l] += scale * grads.weights[l];
    net.biases()[l] += scale * grads.biases[l];
  }
}

double mean_squared_error(const Mlp& net, const MatrixXd& Z, const VectorXd& y) {
  if (Z.rows() == 0) throw std::invalid_argument("mean_squared_error: empty dataset");
  return (net.forward_batch(Z) - y).squaredNorm() / static_cast<double>(y.size());
}

SurrogateFit train_surrogate(const MatrixXd& Z, const VectorXd& y, const SurrogateTrainConfig& cfg) {
  if (Z.rows() == 0) throw std::invalid_argument("train_surrogate: empty dataset");
  if (Z.rows() != y.size()) throw DimensionError("train_surrogate: designs and targets differ in length");
  if (cfg.batch_size < 1 || cfg.epochs < 0) throw std::invalid_argument("train_surrogate: bad schedule");
  std::vector<int> dims{static_cast<int>(Z.cols())};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(1);
  SurrogateFit fit{Mlp::init(dims, derive_seed(cfg.seed, "surrogate-init")), 0.0};
  AdamState adam(fit.net, cfg.learning_rate);
  Rng rng(derive_seed(cfg.seed, "surrogate-shuffle"));

  const Eigen::Index n = Z.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(cfg.batch_size, n - start);
      MatrixXd Zb(count, Z.cols());
      VectorXd yb(count);
      for (Eigen::Index i = 0; i < count; ++i) {
        Zb.row(i) = Z.row(order[static_cast<std::size_t>(start + i)]);
        yb(i) = y(order[static_cast<std::size_t>(start + i)]);
      }
      const double scale = 2.0 / static_cast<double>(count);
      adam.apply(fit.net, fit.net.param_grads(
                              Zb, [&](const VectorXd& out) -> VectorXd { return scale * (out - yb); }));
    }
  }
  fit.train_mse = mean_squared_error(fit.net, Z, y);
  return fit;
}

}  // namespace gambo
