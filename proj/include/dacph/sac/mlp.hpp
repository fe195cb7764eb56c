#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

namespace dacph::sac {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { ReLU, Tanh };

struct DenseLayer {
  Matrix W;  // out x in
  Vector b;  // out
};

// Per-layer parameter gradients, same shapes as the layers.
struct MlpGradients {
  std::vector<Matrix> dW;
  std::vector<Vector> db;

  void set_zero();
  MlpGradients& operator+=(const MlpGradients& other);
};

// Intermediate values kept by a batched forward pass for the backward pass.
// Samples are columns.
struct MlpCache {
  std::vector<Matrix> inputs;  // input of every layer
  std::vector<Matrix> pre;     // pre-activation of every hidden layer
};

// Fully connected network: affine + activation on the hidden layers, affine
// output head.
class Mlp {
 public:
  Mlp() = default;

  // PyTorch-style uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
  Mlp(const std::vector<int>& sizes, std::mt19937_64& rng, Activation hidden = Activation::ReLU);

  static Mlp zeros(const std::vector<int>& sizes, Activation hidden = Activation::ReLU);

  Vector forward(const Vector& input) const;
  Matrix forward(const Matrix& inputs, MlpCache* cache = nullptr) const;

  // Reverse pass for upstream = dL/doutput (out x batch). Accumulates into
  // `grads` when non-null and returns dL/dinput.
  Matrix backward(const MlpCache& cache, const Matrix& upstream, MlpGradients* grads) const;

  MlpGradients zero_gradients() const;

  int input_size() const;
  int output_size() const;
  std::vector<int> sizes() const;
  Activation hidden_activation() const { return hidden_; }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t parameter_count() const;
  Vector flatten() const;
  void unflatten(const Vector& params);

  // this <- (1 - tau) this + tau source
  void polyak_from(const Mlp& source, double tau);

  bool all_finite() const;

 private:
  std::vector<DenseLayer> layers_;
  Activation hidden_ = Activation::ReLU;
};

Vector flatten(const MlpGradients& grads);

}  // namespace dacph::sac
