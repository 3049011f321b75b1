#include "fcil/tensorcore.hpp"

#include <cmath>
#include <string>

#include "fcil/error.hpp"

namespace fcil {
namespace {

void check(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

DenseLayer make_layer(int fan_in, int fan_out) {
  return DenseLayer{Matrix::Zero(fan_in, fan_out), Vector::Zero(fan_out)};
}

std::vector<DenseLayer> zero_layers(int input_dim, const std::vector<int>& hidden,
                                    int num_classes) {
  check(input_dim > 0, "MlpModel: input_dim must be positive");
  check(num_classes > 0, "MlpModel: num_classes must be positive");
  std::vector<DenseLayer> layers;
  int prev = input_dim;
  for (int width : hidden) {
    check(width > 0, "MlpModel: hidden widths must be positive");
    layers.push_back(make_layer(prev, width));
    prev = width;
  }
  layers.push_back(make_layer(prev, num_classes));
  return layers;
}

void softmax_rows(Matrix& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

// Pre-activations of every layer; the caller derives activations from them.
struct Trace {
  std::vector<Matrix> inputs;  // inputs[k] feeds layer k
  std::vector<Matrix> pre;     // pre[k] = inputs[k] * W_k + b_k
  Matrix probs;
};

Trace run_forward(const MlpModel& model, const Matrix& x) {
  check(x.cols() == model.input_dim(),
        "forward: feature dimension " + std::to_string(x.cols()) +
            " does not match model input " + std::to_string(model.input_dim()));
  Trace t;
  Matrix a = x;
  const auto& layers = model.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Matrix z = a * layers[k].weights;
    z.rowwise() += layers[k].bias.transpose();
    t.inputs.push_back(std::move(a));
    if (k + 1 < layers.size()) {
      a = z.cwiseMax(0.0);
    } else {
      t.probs = z;
      softmax_rows(t.probs);
    }
    t.pre.push_back(std::move(z));
  }
  return t;
}

Matrix one_hot(std::span<const int> labels, int num_classes) {
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check(labels[i] >= 0 && labels[i] < num_classes,
          "label " + std::to_string(labels[i]) + " outside [0, " +
              std::to_string(num_classes) + ")");
    y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return y;
}

void append_layer_grad(Vector& out, std::size_t& pos, const Matrix& dw,
                       const Vector& db) {
  for (Eigen::Index i = 0; i < dw.rows(); ++i)
    for (Eigen::Index j = 0; j < dw.cols(); ++j) out[static_cast<Eigen::Index>(pos++)] = dw(i, j);
  for (Eigen::Index j = 0; j < db.size(); ++j) out[static_cast<Eigen::Index>(pos++)] = db[j];
}

}  // namespace

MlpModel::MlpModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {}

MlpModel MlpModel::create(int input_dim, const std::vector<int>& hidden,
                          int num_classes, std::mt19937_64& rng) {
  auto layers = zero_layers(input_dim, hidden, num_classes);
  for (auto& layer : layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.fan_in()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) layer.weights(i, j) = dist(rng);
    for (Eigen::Index j = 0; j < layer.bias.size(); ++j) layer.bias[j] = dist(rng);
  }
  return MlpModel(std::move(layers));
}

MlpModel MlpModel::zeros(int input_dim, const std::vector<int>& hidden,
                         int num_classes) {
  return MlpModel(zero_layers(input_dim, hidden, num_classes));
}

MlpModel MlpModel::from_layers(std::vector<DenseLayer> layers) {
  check(!layers.empty(), "MlpModel: at least one layer required");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    check(layers[k].bias.size() == layers[k].fan_out(),
          "MlpModel: bias size mismatch in layer " + std::to_string(k));
    if (k > 0)
      check(layers[k].fan_in() == layers[k - 1].fan_out(),
            "MlpModel: layer " + std::to_string(k) + " fan_in mismatch");
  }
  return MlpModel(std::move(layers));
}

int MlpModel::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().fan_in());
}

int MlpModel::num_classes() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().fan_out());
}

std::size_t MlpModel::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.param_count();
  return n;
}

std::size_t MlpModel::last_layer_offset() const {
  return param_count() - last_layer_size();
}

Vector MlpModel::flat_params() const {
  Vector flat(static_cast<Eigen::Index>(param_count()));
  std::size_t pos = 0;
  for (const auto& l : layers_) append_layer_grad(flat, pos, l.weights, l.bias);
  return flat;
}

void MlpModel::set_flat_params(const Vector& flat) {
  check(static_cast<std::size_t>(flat.size()) == param_count(),
        "set_flat_params: size mismatch");
  Eigen::Index pos = 0;
  for (auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.weights.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weights.cols(); ++j) l.weights(i, j) = flat[pos++];
    for (Eigen::Index j = 0; j < l.bias.size(); ++j) l.bias[j] = flat[pos++];
  }
}

bool MlpModel::all_finite() const {
  for (const auto& l : layers_)
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

Matrix features_matrix(std::span<const Sample> samples) {
  if (samples.empty()) return Matrix(0, 0);
  const auto dim = samples.front().features.size();
  Matrix x(static_cast<Eigen::Index>(samples.size()), dim);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    check(samples[i].features.size() == dim, "features_matrix: ragged samples");
    x.row(static_cast<Eigen::Index>(i)) = samples[i].features.transpose();
  }
  return x;
}

std::vector<int> labels_of(std::span<const Sample> samples) {
  std::vector<int> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.label);
  return y;
}

Matrix forward(const MlpModel& model, const Matrix& features) {
  return run_forward(model, features).probs;
}

Matrix forward(const MlpModel& model, std::span<const Sample> samples) {
  return forward(model, features_matrix(samples));
}

Matrix penultimate(const MlpModel& model, const Matrix& features) {
  return run_forward(model, features).inputs.back();
}

std::vector<int> predict(const MlpModel& model, std::span<const Sample> samples) {
  std::vector<int> out;
  if (samples.empty()) return out;
  const Matrix p = forward(model, samples);
  out.reserve(samples.size());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    Eigen::Index arg = 0;
    p.row(r).maxCoeff(&arg);
    out.push_back(static_cast<int>(arg));
  }
  return out;
}

CrossEntropy cross_entropy(const Matrix& probs, std::span<const int> labels) {
  check(static_cast<std::size_t>(probs.rows()) == labels.size(),
        "cross_entropy: row count does not match label count");
  check(!labels.empty(), "cross_entropy: empty batch");
  CrossEntropy ce;
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check(labels[i] >= 0 && labels[i] < probs.cols(),
          "cross_entropy: label out of range");
    double p = probs(static_cast<Eigen::Index>(i), labels[i]);
    if (p < kProbabilityFloor) {
      p = kProbabilityFloor;
      ++ce.clamped;
    }
    sum -= std::log(p);
  }
  ce.loss = sum / static_cast<double>(labels.size());
  return ce;
}

double mean_loss(const MlpModel& model, std::span<const Sample> samples) {
  const auto labels = labels_of(samples);
  return cross_entropy(forward(model, samples), labels).loss;
}

GradientVector GradientVector::raw(Vector values) {
  GradientVector g;
  g.values_ = std::move(values);
  return g;
}

GradientVector GradientVector::unit() const {
  GradientVector g = *this;
  g.kind_ = NormKind::unit;
  const double n = values_.norm();
  if (n == 0.0) {
    g.degenerate_ = true;
  } else {
    g.values_ /= n;
  }
  return g;
}

Matrix per_sample_last_layer_grads(const MlpModel& model,
                                   std::span<const Sample> batch) {
  check(!batch.empty(), "last_layer_grad: empty batch");
  const Trace t = run_forward(model, features_matrix(batch));
  const Matrix& h = t.inputs.back();
  const Matrix delta = t.probs - one_hot(labels_of(batch), model.num_classes());
  const Eigen::Index hidden = h.cols();
  const Eigen::Index classes = delta.cols();
  Matrix out(static_cast<Eigen::Index>(batch.size()), hidden * classes + classes);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < hidden; ++i)
      for (Eigen::Index j = 0; j < classes; ++j) out(r, pos++) = h(r, i) * delta(r, j);
    for (Eigen::Index j = 0; j < classes; ++j) out(r, pos++) = delta(r, j);
  }
  return out;
}

GradientVector last_layer_grad(const MlpModel& model, std::span<const Sample> batch) {
  check(!batch.empty(), "last_layer_grad: empty batch");
  const Trace t = run_forward(model, features_matrix(batch));
  const Matrix delta = (t.probs - one_hot(labels_of(batch), model.num_classes())) /
                       static_cast<double>(batch.size());
  const Matrix dw = t.inputs.back().transpose() * delta;
  const Vector db = delta.colwise().sum().transpose();
  Vector flat(static_cast<Eigen::Index>(model.last_layer_size()));
  std::size_t pos = 0;
  append_layer_grad(flat, pos, dw, db);
  return GradientVector::raw(std::move(flat));
}

Vector full_grad(const MlpModel& model, std::span<const Sample> batch,
                 std::span<const double> weights) {
  check(!batch.empty(), "full_grad: empty batch");
  check(weights.empty() || weights.size() == batch.size(),
        "full_grad: weight count does not match batch size");
  const Trace t = run_forward(model, features_matrix(batch));
  Matrix delta = t.probs - one_hot(labels_of(batch), model.num_classes());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (Eigen::Index r = 0; r < delta.rows(); ++r)
    delta.row(r) *= inv_n * (weights.empty() ? 1.0 : weights[static_cast<std::size_t>(r)]);

  const auto& layers = model.layers();
  std::vector<Matrix> dws(layers.size());
  std::vector<Vector> dbs(layers.size());
  for (std::size_t k = layers.size(); k-- > 0;) {
    dws[k] = t.inputs[k].transpose() * delta;
    dbs[k] = delta.colwise().sum().transpose();
    if (k > 0) {
      Matrix back = delta * layers[k].weights.transpose();
      const Matrix& z = t.pre[k - 1];
      for (Eigen::Index i = 0; i < back.rows(); ++i)
        for (Eigen::Index j = 0; j < back.cols(); ++j)
          if (z(i, j) <= 0.0) back(i, j) = 0.0;
      delta = std::move(back);
    }
  }
  Vector flat(static_cast<Eigen::Index>(model.param_count()));
  std::size_t pos = 0;
  for (std::size_t k = 0; k < layers.size(); ++k) append_layer_grad(flat, pos, dws[k], dbs[k]);
  return flat;
}

void sgd_momentum_step(Eigen::Ref<Vector> params, const Vector& grad,
                       Vector& velocity, double lr, double momentum) {
  check(grad.size() == params.size(), "sgd_momentum_step: gradient shape mismatch");
  if (!grad.allFinite()) {
    for (Eigen::Index i = 0; i < grad.size(); ++i)
      if (!std::isfinite(grad[i]))
        throw ContractViolation("sgd_momentum_step: non-finite gradient entry at index " +
                                std::to_string(i));
  }
  if (velocity.size() == 0) velocity = Vector::Zero(params.size());
  check(velocity.size() == params.size(), "sgd_momentum_step: velocity shape mismatch");
  velocity = momentum * velocity + grad;
  params -= lr * velocity;
}

void SgdMomentum::step(MlpModel& model, const Vector& grad) {
  Vector params = model.flat_params();
  sgd_momentum_step(params, grad, velocity_, lr_, momentum_);
  model.set_flat_params(params);
}

}  // namespace fcil
