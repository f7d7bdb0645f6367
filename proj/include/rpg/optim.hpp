#pragma once

#include <span>
#include <vector>

namespace rpg {

// Adaptive-moment gradient ascent/descent over a flat parameter vector.
class Adam {
public:
  struct Options {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  explicit Adam(size_t n) : m_(n, 0.0), v_(n, 0.0) {}
  Adam(size_t n, Options opt) : opt_(opt), m_(n, 0.0), v_(n, 0.0) {}

  // params -= lr * mhat / (sqrt(vhat) + eps); pass the gradient of the
  // quantity being minimized.
  void step(std::span<double> params, std::span<const double> grad);

  void set_lr(double lr) { opt_.lr = lr; }
  double lr() const { return opt_.lr; }
  size_t size() const { return m_.size(); }

private:
  Options opt_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

// Scales grad in place so its global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_global_norm(std::span<double> grad, double max_norm);

}  // namespace rpg
