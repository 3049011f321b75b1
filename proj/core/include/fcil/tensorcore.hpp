#pragma once

// Dense numerics for the fair class-incremental learner: a rectifier MLP with
// a single shared softmax head, cross-entropy, analytic gradients (full model
// and last layer only) and SGD with momentum.
//
// Parameter flattening order is fixed and shared by every gradient routine:
// for each layer in order, the weight matrix in row-major order (input index
// major, output index minor) followed by the bias. The last layer therefore
// occupies the tail of the flat vector, so a last-layer gradient is exactly
// the tail slice of the full-model gradient.

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fcil {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Sample {
  Vector features;
  int label = 0;
  std::optional<int> sensitive;

  friend bool operator==(const Sample& a, const Sample& b) {
    return a.label == b.label && a.sensitive == b.sensitive &&
           a.features.size() == b.features.size() && a.features == b.features;
  }
};

struct DenseLayer {
  Matrix weights;  // fan_in x fan_out
  Vector bias;     // fan_out

  [[nodiscard]] Eigen::Index fan_in() const { return weights.rows(); }
  [[nodiscard]] Eigen::Index fan_out() const { return weights.cols(); }
  [[nodiscard]] std::size_t param_count() const {
    return static_cast<std::size_t>(weights.size() + bias.size());
  }
};

class MlpModel {
 public:
  MlpModel() = default;

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static MlpModel create(int input_dim, const std::vector<int>& hidden,
                         int num_classes, std::mt19937_64& rng);
  static MlpModel zeros(int input_dim, const std::vector<int>& hidden,
                        int num_classes);
  static MlpModel from_layers(std::vector<DenseLayer> layers);

  [[nodiscard]] int input_dim() const;
  [[nodiscard]] int num_classes() const;
  [[nodiscard]] const std::vector<DenseLayer>& layers() const { return layers_; }
  [[nodiscard]] std::vector<DenseLayer>& layers() { return layers_; }
  [[nodiscard]] const DenseLayer& head() const { return layers_.back(); }

  [[nodiscard]] std::size_t param_count() const;
  [[nodiscard]] std::size_t last_layer_offset() const;
  [[nodiscard]] std::size_t last_layer_size() const { return head().param_count(); }

  [[nodiscard]] Vector flat_params() const;
  void set_flat_params(const Vector& flat);
  [[nodiscard]] bool all_finite() const;

 private:
  explicit MlpModel(std::vector<DenseLayer> layers);
  std::vector<DenseLayer> layers_;
};

// Stacks sample features row-wise; throws ContractViolation on ragged input.
Matrix features_matrix(std::span<const Sample> samples);
std::vector<int> labels_of(std::span<const Sample> samples);

// Class probabilities, one row per input row. Rows sum to 1.
Matrix forward(const MlpModel& model, const Matrix& features);
Matrix forward(const MlpModel& model, std::span<const Sample> samples);

// Output of the last hidden layer, i.e. the features the head sees.
Matrix penultimate(const MlpModel& model, const Matrix& features);

std::vector<int> predict(const MlpModel& model, std::span<const Sample> samples);

inline constexpr double kProbabilityFloor = 1e-12;

struct CrossEntropy {
  double loss = 0.0;       // mean, nats
  std::size_t clamped = 0; // entries lifted to kProbabilityFloor
};

CrossEntropy cross_entropy(const Matrix& probs, std::span<const int> labels);
double mean_loss(const MlpModel& model, std::span<const Sample> samples);

enum class NormKind { raw, unit };

class GradientVector {
 public:
  GradientVector() = default;
  static GradientVector raw(Vector values);

  [[nodiscard]] const Vector& values() const { return values_; }
  [[nodiscard]] NormKind kind() const { return kind_; }
  [[nodiscard]] double norm() const { return values_.norm(); }
  // Set when unit() was asked to normalize an all-zero vector.
  [[nodiscard]] bool degenerate() const { return degenerate_; }

  [[nodiscard]] GradientVector unit() const;

 private:
  Vector values_;
  NormKind kind_ = NormKind::raw;
  bool degenerate_ = false;
};

// Gradient of the mean cross-entropy with respect to the head only.
GradientVector last_layer_grad(const MlpModel& model, std::span<const Sample> batch);

// One row per sample: that sample's head gradient.
Matrix per_sample_last_layer_grads(const MlpModel& model,
                                   std::span<const Sample> batch);

// (1/|batch|) * sum_i weight_i * grad l(d_i), over every parameter. Empty
// weights means all ones.
Vector full_grad(const MlpModel& model, std::span<const Sample> batch,
                 std::span<const double> weights = {});

// v <- momentum * v + grad; params <- params - lr * v.
void sgd_momentum_step(Eigen::Ref<Vector> params, const Vector& grad,
                       Vector& velocity, double lr, double momentum);

class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  void step(MlpModel& model, const Vector& grad);
  void reset() { velocity_.resize(0); }
  [[nodiscard]] const Vector& velocity() const { return velocity_; }

 private:
  double lr_;
  double momentum_;
  Vector velocity_;
};

}  // namespace fcil
