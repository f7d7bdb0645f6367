#include "rpg/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace rpg {

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "elu") return Activation::elu;
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation: " + s);
}

namespace {
double act_double(Activation a, double x) {
  switch (a) {
    case Activation::tanh: return std::tanh(x);
    case Activation::elu: return x > 0.0 ? x : std::expm1(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::identity: return x;
  }
  return x;
}

Value act_value(Activation a, Value x) {
  switch (a) {
    case Activation::tanh: return tanh(x);
    case Activation::elu: return elu(x);
    case Activation::relu: return relu(x);
    case Activation::identity: return x;
  }
  return x;
}
}  // namespace

DenseNet::DenseNet(size_t in_dim, std::span<const size_t> hidden,
                   size_t out_dim, Activation act, Rng& rng,
                   double final_scale)
    : act_(act) {
  if (in_dim == 0 || out_dim == 0) {
    throw std::invalid_argument("DenseNet needs non-zero dimensions");
  }
  std::vector<size_t> dims;
  dims.push_back(in_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out_dim);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.w.resize(layer.in * layer.out);
    layer.b.assign(layer.out, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    const double scale = (l + 2 == dims.size()) ? final_scale : 1.0;
    for (double& w : layer.w) w = scale * rng.uniform(-bound, bound);
    layers_.push_back(std::move(layer));
  }
}

size_t DenseNet::param_count() const {
  size_t n = 0;
  for (const Layer& l : layers_) n += l.w.size() + l.b.size();
  return n;
}

std::vector<double> DenseNet::forward(std::span<const double> x) const {
  if (x.size() != in_dim()) throw std::invalid_argument("DenseNet input size");
  std::vector<double> cur(x.begin(), x.end());
  for (size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    std::vector<double> next(layer.out);
    for (size_t i = 0; i < layer.out; ++i) {
      double acc = layer.b[i];
      const double* row = layer.w.data() + i * layer.in;
      for (size_t j = 0; j < layer.in; ++j) acc += row[j] * cur[j];
      next[i] = acc;
    }
    if (l + 1 < layers_.size()) {
      for (double& v : next) v = act_double(act_, v);
    }
    cur = std::move(next);
  }
  return cur;
}

DenseNet::Binding DenseNet::bind(Graph& g) const {
  Binding bind;
  bind.w.resize(layers_.size());
  bind.b.resize(layers_.size());
  for (size_t l = 0; l < layers_.size(); ++l) {
    bind.w[l].reserve(layers_[l].w.size());
    for (double w : layers_[l].w) bind.w[l].push_back(g.leaf(w));
    bind.b[l].reserve(layers_[l].b.size());
    for (double b : layers_[l].b) bind.b[l].push_back(g.leaf(b));
  }
  return bind;
}

std::vector<Value> DenseNet::apply(Graph& g, const Binding& bind,
                                   std::span<const Value> x) const {
  if (x.size() != in_dim()) throw std::invalid_argument("DenseNet input size");
  std::vector<Value> cur(x.begin(), x.end());
  for (size_t l = 0; l < layers_.size(); ++l) {
    cur = g.affine(bind.w[l], bind.b[l], cur);
    if (l + 1 < layers_.size()) {
      for (Value& v : cur) v = act_value(act_, v);
    }
  }
  return cur;
}

void DenseNet::copy_params_to(std::span<double> out) const {
  size_t k = 0;
  for (const Layer& l : layers_) {
    for (double w : l.w) out[k++] = w;
    for (double b : l.b) out[k++] = b;
  }
}

void DenseNet::set_params(std::span<const double> in) {
  size_t k = 0;
  for (Layer& l : layers_) {
    for (double& w : l.w) w = in[k++];
    for (double& b : l.b) b = in[k++];
  }
}

void DenseNet::accumulate_adjoints(const Binding& bind, const Graph& g,
                                   std::span<double> grad) const {
  size_t k = 0;
  for (size_t l = 0; l < layers_.size(); ++l) {
    for (Value v : bind.w[l]) grad[k++] += g.adjoint(v);
    for (Value v : bind.b[l]) grad[k++] += g.adjoint(v);
  }
}

}  // namespace rpg
