#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <optional>
#include <random>
#include <vector>

#include "fcil/tensorcore.hpp"

namespace fcil::test {

inline Sample sample(std::initializer_list<double> x, int y, std::optional<int> z = std::nullopt) {
  Sample s;
  s.features = Vector::Zero(static_cast<Eigen::Index>(x.size()));
  Eigen::Index i = 0;
  for (double v : x) s.features[i++] = v;
  s.label = y;
  s.sensitive = z;
  return s;
}

inline Vector vec(std::initializer_list<double> x) {
  Vector v(static_cast<Eigen::Index>(x.size()));
  Eigen::Index i = 0;
  for (double e : x) v[i++] = e;
  return v;
}

// 2-4-3 net with hand-picked weights.
inline MlpModel net_243() {
  DenseLayer l1{Matrix(2, 4), vec({0.1, -0.1, 0.0, 0.2})};
  l1.weights << 0.5, -0.3, 0.8, 0.1,
               -0.2, 0.7, 0.4, -0.6;
  DenseLayer l2{Matrix(4, 3), vec({0.05, -0.05, 0.0})};
  l2.weights << 0.3, -0.5, 0.2,
                0.6, 0.1, -0.4,
               -0.7, 0.2, 0.5,
                0.4, -0.3, 0.1;
  return MlpModel::from_layers({l1, l2});
}

inline std::vector<Sample> gaussian_batch(std::mt19937_64& rng, std::size_t n, int dim, int classes,
                                          bool with_z = false) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, classes - 1);
  std::uniform_int_distribution<int> bit(0, 1);
  std::vector<Sample> out(n);
  for (auto& s : out) {
    s.features.resize(dim);
    for (int j = 0; j < dim; ++j) s.features[j] = normal(rng);
    s.label = label(rng);
    if (with_z) s.sensitive = bit(rng);
  }
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("fcil_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fcil::test
