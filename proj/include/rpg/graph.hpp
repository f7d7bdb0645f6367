#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rpg {

// Thrown when an elementary operation is asked to leave its domain
// (log of a non-positive value, non-finite inputs, overflow).
class DomainError : public std::runtime_error {
public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

enum class Op : uint8_t {
  leaf,
  constant,
  add,
  mul,
  neg,
  exp,
  log,
  tanh,
  elu,
  affine,
  sum,
  max,
  clamp,
};

class Graph;

// Handle to a scalar node on a Graph tape. Cheap to copy; only valid
// while the owning Graph is alive and not cleared.
struct Value {
  Graph* g = nullptr;
  uint32_t idx = 0;

  bool valid() const { return g != nullptr; }
  double val() const;
};

// Reverse-mode tape over scalar nodes. Construction order is a
// topological order, so the backward sweep is a single reverse pass.
// A Graph is confined to one execution context; independent graphs
// may run concurrently.
class Graph {
public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Value leaf(double v);
  Value constant(double v);

  // Generic recorder for the elementary op set. `aux` carries op
  // extras: clamp bounds (lo, hi). Affine goes through the dedicated
  // overload below because it needs the coefficient layout.
  Value record(Op op, std::span<const Value> inputs,
               std::span<const double> aux = {});

  // y_i = sum_j W[i*n+j] x[j] + b[i]; returns m outputs. W and b are
  // nodes so parameter gradients flow.
  std::vector<Value> affine(std::span<const Value> w,
                            std::span<const Value> b,
                            std::span<const Value> x);

  // Accumulates d(root)/d(node) into every node's adjoint. Exactly one
  // backward per tape between resets; a second call without
  // zero_adjoints()/clear() is rejected.
  void backward(Value root);

  void zero_adjoints();
  void clear();

  double value(Value v) const { return values_.at(check(v)); }
  double adjoint(Value v) const;
  size_t size() const { return values_.size(); }
  Op op(Value v) const { return ops_.at(check(v)); }

private:
  friend struct Value;

  uint32_t check(Value v) const;
  Value push(Op op, double value, std::span<const uint32_t> parents,
             std::span<const double> partials);
  static void require_finite(double v, const char* what);

  std::vector<double> values_;
  std::vector<double> adjoints_;
  std::vector<Op> ops_;
  std::vector<uint32_t> parent_begin_{0};
  std::vector<uint32_t> parents_;
  std::vector<double> partials_;
  bool backward_done_ = false;
};

// Operator sugar over the elementary set. Mixed Value/double forms
// promote the double to a constant on the Value's graph.
Value operator+(Value a, Value b);
Value operator+(Value a, double b);
Value operator+(double a, Value b);
Value operator-(Value a, Value b);
Value operator-(Value a, double b);
Value operator-(double a, Value b);
Value operator-(Value a);
Value operator*(Value a, Value b);
Value operator*(Value a, double b);
Value operator*(double a, Value b);

Value exp(Value a);
Value log(Value a);
Value tanh(Value a);
Value elu(Value a);
Value relu(Value a);  // max(x, 0)
Value clamp(Value a, double lo, double hi);
Value sum(std::span<const Value> xs);
Value max(std::span<const Value> xs);
Value square(Value a);
Value sigmoid(Value a);  // 0.5 * (tanh(x/2) + 1)

// Diagonal Gaussian log-density summed over dimensions:
//   sum_d [ -0.5 log(2 pi) - log sigma_d - 0.5 ((x_d - mu_d)/sigma_d)^2 ]
// log_sigma entries below log(kSigmaFloor) are rejected.
inline constexpr double kSigmaFloor = 1e-4;
Value gaussian_logpdf(std::span<const Value> x, std::span<const Value> mu,
                      std::span<const Value> log_sigma);
double gaussian_logpdf(std::span<const double> x, std::span<const double> mu,
                       std::span<const double> log_sigma);

}  // namespace rpg
