#pragma once

#include <span>
#include <string>
#include <vector>

#include "rpg/graph.hpp"
#include "rpg/rng.hpp"

namespace rpg {

enum class Activation { tanh, elu, relu, identity };

Activation activation_from_string(const std::string& s);

// Fully connected stack. Parameters live in plain double storage; a
// forward pass can either stay on doubles or be recorded onto a Graph
// through a Binding of parameter leaves.
class DenseNet {
public:
  struct Layer {
    std::vector<double> w;  // row-major out x in
    std::vector<double> b;
    size_t in = 0, out = 0;
  };

  DenseNet() = default;
  // Hidden activation applies between layers; the output layer is linear.
  DenseNet(size_t in_dim, std::span<const size_t> hidden, size_t out_dim,
           Activation act, Rng& rng, double final_scale = 1.0);

  size_t in_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
  size_t out_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
  size_t param_count() const;
  Activation activation() const { return act_; }

  std::vector<double> forward(std::span<const double> x) const;

  // Graph-recorded forward. The binding pins every parameter to a leaf
  // on the target graph so adjoints can be read back per parameter.
  struct Binding {
    std::vector<std::vector<Value>> w;
    std::vector<std::vector<Value>> b;
  };
  Binding bind(Graph& g) const;
  std::vector<Value> apply(Graph& g, const Binding& bind,
                           std::span<const Value> x) const;

  // Flat parameter access in a fixed order (layer by layer, w then b).
  void copy_params_to(std::span<double> out) const;
  void set_params(std::span<const double> in);
  void accumulate_adjoints(const Binding& bind, const Graph& g,
                           std::span<double> grad) const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

private:
  std::vector<Layer> layers_;
  Activation act_ = Activation::elu;
};

}  // namespace rpg
