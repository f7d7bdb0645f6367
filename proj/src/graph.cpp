#include "rpg/graph.hpp"

#include <array>
#include <cmath>

namespace rpg {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;
}

double Value::val() const { return g->value(*this); }

uint32_t Graph::check(Value v) const {
  if (v.g != this) throw std::invalid_argument("value belongs to another graph");
  if (v.idx >= values_.size()) throw std::invalid_argument("stale value handle");
  return v.idx;
}

void Graph::require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DomainError(std::string(what) + " produced or received a non-finite value");
  }
}

Value Graph::push(Op op, double value, std::span<const uint32_t> parents,
                  std::span<const double> partials) {
  require_finite(value, "node");
  values_.push_back(value);
  adjoints_.push_back(0.0);
  ops_.push_back(op);
  parents_.insert(parents_.end(), parents.begin(), parents.end());
  partials_.insert(partials_.end(), partials.begin(), partials.end());
  parent_begin_.push_back(static_cast<uint32_t>(parents_.size()));
  return Value{this, static_cast<uint32_t>(values_.size() - 1)};
}

Value Graph::leaf(double v) {
  require_finite(v, "leaf");
  return push(Op::leaf, v, {}, {});
}

Value Graph::constant(double v) {
  require_finite(v, "constant");
  return push(Op::constant, v, {}, {});
}

Value Graph::record(Op op, std::span<const Value> inputs,
                    std::span<const double> aux) {
  std::array<uint32_t, 2> pbuf;
  std::array<double, 2> dbuf;
  auto in = [&](size_t i) { return values_[check(inputs[i])]; };

  switch (op) {
    case Op::add: {
      if (inputs.size() != 2) throw std::invalid_argument("add takes 2 inputs");
      pbuf = {inputs[0].idx, inputs[1].idx};
      dbuf = {1.0, 1.0};
      return push(op, in(0) + in(1), pbuf, dbuf);
    }
    case Op::mul: {
      if (inputs.size() != 2) throw std::invalid_argument("mul takes 2 inputs");
      pbuf = {inputs[0].idx, inputs[1].idx};
      dbuf = {in(1), in(0)};
      return push(op, in(0) * in(1), pbuf, dbuf);
    }
    case Op::neg: {
      if (inputs.size() != 1) throw std::invalid_argument("neg takes 1 input");
      pbuf[0] = inputs[0].idx;
      dbuf[0] = -1.0;
      return push(op, -in(0), {pbuf.data(), 1}, {dbuf.data(), 1});
    }
    case Op::exp: {
      if (inputs.size() != 1) throw std::invalid_argument("exp takes 1 input");
      double y = std::exp(in(0));
      require_finite(y, "exp");
      pbuf[0] = inputs[0].idx;
      dbuf[0] = y;
      return push(op, y, {pbuf.data(), 1}, {dbuf.data(), 1});
    }
    case Op::log: {
      if (inputs.size() != 1) throw std::invalid_argument("log takes 1 input");
      double x = in(0);
      if (!(x > 0.0)) {
        throw DomainError("log requires a strictly positive input, got " +
                          std::to_string(x));
      }
      pbuf[0] = inputs[0].idx;
      dbuf[0] = 1.0 / x;
      return push(op, std::log(x), {pbuf.data(), 1}, {dbuf.data(), 1});
    }
    case Op::tanh: {
      if (inputs.size() != 1) throw std::invalid_argument("tanh takes 1 input");
      double y = std::tanh(in(0));
      pbuf[0] = inputs[0].idx;
      dbuf[0] = 1.0 - y * y;
      return push(op, y, {pbuf.data(), 1}, {dbuf.data(), 1});
    }
    case Op::elu: {
      if (inputs.size() != 1) throw std::invalid_argument("elu takes 1 input");
      double x = in(0);
      double y = x > 0.0 ? x : std::expm1(x);
      pbuf[0] = inputs[0].idx;
      dbuf[0] = x > 0.0 ? 1.0 : std::exp(x);
      return push(op, y, {pbuf.data(), 1}, {dbuf.data(), 1});
    }
    case Op::sum: {
      if (inputs.empty()) return constant(0.0);
      double acc = 0.0;
      std::vector<uint32_t> ps(inputs.size());
      std::vector<double> ds(inputs.size(), 1.0);
      for (size_t i = 0; i < inputs.size(); ++i) {
        ps[i] = check(inputs[i]);
        acc += values_[ps[i]];
      }
      return push(op, acc, ps, ds);
    }
    case Op::max: {
      if (inputs.empty()) throw std::invalid_argument("max needs inputs");
      size_t best = 0;
      for (size_t i = 1; i < inputs.size(); ++i) {
        if (in(i) > in(best)) best = i;
      }
      std::vector<uint32_t> ps(inputs.size());
      std::vector<double> ds(inputs.size(), 0.0);
      for (size_t i = 0; i < inputs.size(); ++i) ps[i] = check(inputs[i]);
      ds[best] = 1.0;
      return push(op, in(best), ps, ds);
    }
    case Op::clamp: {
      if (inputs.size() != 1 || aux.size() != 2) {
        throw std::invalid_argument("clamp takes 1 input and (lo, hi)");
      }
      double lo = aux[0], hi = aux[1];
      if (!(lo <= hi)) throw std::invalid_argument("clamp bounds out of order");
      double x = in(0);
      bool inside = x > lo && x < hi;
      pbuf[0] = inputs[0].idx;
      dbuf[0] = inside ? 1.0 : 0.0;
      return push(op, std::min(std::max(x, lo), hi), {pbuf.data(), 1},
                  {dbuf.data(), 1});
    }
    case Op::affine:
      throw std::invalid_argument("use Graph::affine for affine nodes");
    case Op::leaf:
    case Op::constant:
      throw std::invalid_argument("leaf/constant are not recordable ops");
  }
  throw std::invalid_argument("unknown op");
}

std::vector<Value> Graph::affine(std::span<const Value> w,
                                 std::span<const Value> b,
                                 std::span<const Value> x) {
  const size_t n = x.size(), m = b.size();
  if (w.size() != n * m) throw std::invalid_argument("affine shape mismatch");
  std::vector<Value> out;
  out.reserve(m);
  std::vector<uint32_t> ps(2 * n + 1);
  std::vector<double> ds(2 * n + 1);
  for (size_t i = 0; i < m; ++i) {
    double acc = values_[check(b[i])];
    for (size_t j = 0; j < n; ++j) {
      const Value wij = w[i * n + j];
      const double wv = values_[check(wij)];
      const double xv = values_[check(x[j])];
      acc += wv * xv;
      ps[j] = x[j].idx;
      ds[j] = wv;
      ps[n + j] = wij.idx;
      ds[n + j] = xv;
    }
    ps[2 * n] = b[i].idx;
    ds[2 * n] = 1.0;
    out.push_back(push(Op::affine, acc, ps, ds));
  }
  return out;
}

void Graph::backward(Value root) {
  if (backward_done_) {
    throw std::logic_error("backward called twice without adjoint reset");
  }
  const uint32_t r = check(root);
  backward_done_ = true;
  adjoints_[r] = 1.0;
  for (uint32_t i = static_cast<uint32_t>(values_.size()); i-- > 0;) {
    const double a = adjoints_[i];
    if (a == 0.0) continue;
    const uint32_t pb = parent_begin_[i], pe = parent_begin_[i + 1];
    for (uint32_t p = pb; p < pe; ++p) {
      adjoints_[parents_[p]] += a * partials_[p];
    }
  }
}

double Graph::adjoint(Value v) const {
  double a = adjoints_.at(check(v));
  if (!std::isfinite(a)) throw DomainError("non-finite adjoint");
  return a;
}

void Graph::zero_adjoints() {
  std::fill(adjoints_.begin(), adjoints_.end(), 0.0);
  backward_done_ = false;
}

void Graph::clear() {
  values_.clear();
  adjoints_.clear();
  ops_.clear();
  parent_begin_.assign(1, 0);
  parents_.clear();
  partials_.clear();
  backward_done_ = false;
}

namespace {
Value rec2(Op op, Value a, Value b) {
  const Value in[2] = {a, b};
  return a.g->record(op, in);
}
Value rec1(Op op, Value a) { return a.g->record(op, {&a, 1}); }
}  // namespace

Value operator+(Value a, Value b) { return rec2(Op::add, a, b); }
Value operator+(Value a, double b) { return a + a.g->constant(b); }
Value operator+(double a, Value b) { return b.g->constant(a) + b; }
Value operator-(Value a) { return rec1(Op::neg, a); }
Value operator-(Value a, Value b) { return a + (-b); }
Value operator-(Value a, double b) { return a + (-b); }
Value operator-(double a, Value b) { return b.g->constant(a) + (-b); }
Value operator*(Value a, Value b) { return rec2(Op::mul, a, b); }
Value operator*(Value a, double b) { return a * a.g->constant(b); }
Value operator*(double a, Value b) { return b.g->constant(a) * b; }

Value exp(Value a) { return rec1(Op::exp, a); }
Value log(Value a) { return rec1(Op::log, a); }
Value tanh(Value a) { return rec1(Op::tanh, a); }
Value elu(Value a) { return rec1(Op::elu, a); }
Value relu(Value a) {
  const Value in[2] = {a, a.g->constant(0.0)};
  return a.g->record(Op::max, in);
}
Value clamp(Value a, double lo, double hi) {
  const double aux[2] = {lo, hi};
  return a.g->record(Op::clamp, {&a, 1}, aux);
}
Value sum(std::span<const Value> xs) {
  if (xs.empty()) throw std::invalid_argument("sum of empty span needs a graph");
  return xs[0].g->record(Op::sum, xs);
}
Value max(std::span<const Value> xs) {
  if (xs.empty()) throw std::invalid_argument("max of empty span");
  return xs[0].g->record(Op::max, xs);
}
Value square(Value a) { return a * a; }
Value sigmoid(Value a) { return 0.5 * (tanh(a * 0.5) + 1.0); }

Value gaussian_logpdf(std::span<const Value> x, std::span<const Value> mu,
                      std::span<const Value> log_sigma) {
  if (x.size() != mu.size() || x.size() != log_sigma.size() || x.empty()) {
    throw std::invalid_argument("gaussian_logpdf dimension mismatch");
  }
  Graph& g = *x[0].g;
  const double log_floor = std::log(kSigmaFloor);
  std::vector<Value> terms;
  terms.reserve(x.size());
  for (size_t d = 0; d < x.size(); ++d) {
    if (log_sigma[d].val() < log_floor - 1e-12) {
      throw DomainError("log_sigma below the sigma floor");
    }
    Value diff = x[d] - mu[d];
    Value inv_sigma = exp(-log_sigma[d]);
    Value zscore = diff * inv_sigma;
    terms.push_back(g.constant(-0.5 * kLogTwoPi) - log_sigma[d] -
                    0.5 * square(zscore));
  }
  return sum(terms);
}

double gaussian_logpdf(std::span<const double> x, std::span<const double> mu,
                       std::span<const double> log_sigma) {
  if (x.size() != mu.size() || x.size() != log_sigma.size() || x.empty()) {
    throw std::invalid_argument("gaussian_logpdf dimension mismatch");
  }
  const double log_floor = std::log(kSigmaFloor);
  double acc = 0.0;
  for (size_t d = 0; d < x.size(); ++d) {
    if (log_sigma[d] < log_floor - 1e-12) {
      throw DomainError("log_sigma below the sigma floor");
    }
    const double z = (x[d] - mu[d]) * std::exp(-log_sigma[d]);
    acc += -0.5 * kLogTwoPi - log_sigma[d] - 0.5 * z * z;
  }
  return acc;
}

}  // namespace rpg
