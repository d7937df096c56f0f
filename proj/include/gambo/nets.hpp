#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gambo {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Gradients of a scalar loss with respect to every parameter of an Mlp.
struct ParamGrads {
  std::vector<RowMatrix> weights;
  std::vector<VectorXd> biases;
};

struct BatchResult {
  VectorXd values;  // B
  MatrixXd grads;   // B x d
};

/// A differentiable scalar field on R^d.
class Model {
 public:
  virtual ~Model() = default;
  virtual int input_dim() const = 0;
  virtual VectorXd forward_batch(const MatrixXd& Z) const = 0;
  /// Row i holds the value and input gradient at z_i.
  virtual BatchResult forward_and_input_grads(const MatrixXd& Z) const = 0;

  double value(const VectorXd& z) const;
  VectorXd gradient(const VectorXd& z) const;
};

/// Dense feed-forward network with leaky-rectifier hidden layers and an
/// affine scalar output. Weight matrix l has shape dims[l+1] x dims[l].
///
/// Evaluation is const and thread-safe. Training helpers mutate in place.
class Mlp final : public Model {
 public:
  static constexpr double kDefaultSlope = 0.01;

  Mlp() = default;

  /// Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
  static Mlp init(std::span<const int> layer_dims, std::uint64_t seed,
                  double negative_slope = kDefaultSlope);
  static Mlp init(std::initializer_list<int> layer_dims, std::uint64_t seed,
                  double negative_slope = kDefaultSlope) {
    return init(std::span<const int>(layer_dims.begin(), layer_dims.size()), seed, negative_slope);
  }
  static Mlp zeros(std::span<const int> layer_dims, double negative_slope = kDefaultSlope);
  static Mlp zeros(std::initializer_list<int> layer_dims, double negative_slope = kDefaultSlope) {
    return zeros(std::span<const int>(layer_dims.begin(), layer_dims.size()), negative_slope);
  }
  /// Builds from explicit parameters; validates shapes.
  static Mlp from_parameters(std::vector<RowMatrix> weights, std::vector<VectorXd> biases,
                             double negative_slope = kDefaultSlope);

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const override { return dims_.front(); }
  std::size_t num_layers() const { return weights_.size(); }
  double negative_slope() const { return slope_; }
  std::size_t parameter_count() const;

  const std::vector<RowMatrix>& weights() const { return weights_; }
  const std::vector<VectorXd>& biases() const { return biases_; }
  std::vector<RowMatrix>& weights() { return weights_; }
  std::vector<VectorXd>& biases() { return biases_; }

  double forward(const VectorXd& z) const;
  VectorXd input_grad(const VectorXd& z) const;

  /// Outputs for every row of Z (B x d).
  VectorXd forward_batch(const MatrixXd& Z) const override;
  /// Mean of forward_batch(Z) computed with Eigen's GEMM; rows are not
  /// bit-compatible with single calls.
  double mean_output(const MatrixXd& Z) const;

  using BatchResult = gambo::BatchResult;
  /// Row i equals (forward(z_i), input_grad(z_i)).
  BatchResult forward_and_input_grads(const MatrixXd& Z) const override;

  /// Parameter gradient of sum_i weights_i * out(z_i) over rows of Z.
  ParamGrads param_grads(const MatrixXd& Z, const VectorXd& output_weights) const;
  /// Same, with the output weights computed from the forward outputs in one pass.
  ParamGrads param_grads(const MatrixXd& Z,
                         const std::function<VectorXd(const VectorXd&)>& output_weights) const;

  /// Clamps every weight and bias into [-bound, bound].
  void clip_weights(double bound);

  /// Product of per-layer spectral norms; the leaky rectifier is 1-Lipschitz.
  double lipschitz_upper_bound() const;

  bool operator==(const Mlp& other) const;

 private:
  void check_input(Eigen::Index cols) const;

  std::vector<int> dims_;
  std::vector<RowMatrix> weights_;
  std::vector<VectorXd> biases_;
  double slope_ = kDefaultSlope;
};

Mlp clip_weights(Mlp net, double bound);

struct AdamState {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<RowMatrix> m_w, v_w;
  std::vector<VectorXd> m_b, v_b;

  explicit AdamState(const Mlp& net, double lr = 3e-4);

  /// Descent step: params -= lr * mhat / (sqrt(vhat) + eps).
  void apply(Mlp& net, const ParamGrads& grads);
};

/// Plain gradient step params += scale * grads (scale < 0 descends).
void sgd_step(Mlp& net, const ParamGrads& grads, double scale);

struct SurrogateTrainConfig {
  std::vector<int> hidden = {256, 256};
  double learning_rate = 3e-4;
  int epochs = 100;
  int batch_size = 128;
  std::uint64_t seed = 0;
};

struct SurrogateFit {
  Mlp net;
  double train_mse = 0.0;
};

/// Minimizes mean squared error of f(z_i) against y_i with Adam.
/// Throws std::invalid_argument on an empty dataset.
SurrogateFit train_surrogate(const MatrixXd& Z, const VectorXd& y, const SurrogateTrainConfig& cfg);

double mean_squared_error(const Mlp& net, const MatrixXd& Z, const VectorXd& y);

// Checkpoints. Binary blobs are bit-exact and carry an FNV-1a checksum;
// JSON stores doubles in shortest round-trip form.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string to_binary_checkpoint(const Mlp& net);
Mlp from_binary_checkpoint(const std::string& blob);
std::string to_json_checkpoint(const Mlp& net);
Mlp from_json_checkpoint(const std::string& text);

void save_checkpoint(const Mlp& net, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace gambo
