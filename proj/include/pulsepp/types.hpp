#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace pulsepp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;

/// Per-layer style vectors, one column per synthesis layer (k x L).
using StyleMatrix = Eigen::MatrixXd;

/// Per-layer latent noise vectors; layer l holds 4^(1+ceil(l/2)) entries,
/// i.e. the flattened spatial grid of that layer's resolution.
using NoiseSet = std::vector<Vector>;

/// Grayscale object raster with pixel values in the open interval (0,1),
/// row-major storage.
struct ObjectImage {
  int width = 0;
  int height = 0;
  Vector pixels;

  ObjectImage() = default;
  ObjectImage(int w, int h) : width(w), height(h), pixels(Vector::Zero(w * h)) {}

  int size() const { return width * height; }
  double& at(int y, int x) { return pixels[y * width + x]; }
  double at(int y, int x) const { return pixels[y * width + x]; }
};

inline void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace pulsepp
