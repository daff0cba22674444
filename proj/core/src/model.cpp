#include "gradres/model.hpp"

#include <cstring>
#include <stdexcept>

#include "gradres/rng.hpp"

namespace gradres {

void ModelSpec::validate() const {
  if (hidden_dim == 0) throw std::invalid_argument("hidden_dim must be positive");
  variant.validate();
}

Model Model::build(const ModelSpec& spec) {
  spec.validate();
  Rng rng(spec.weight_init_seed);
  const std::size_t d = spec.hidden_dim;
  Model m;
  m.spec_ = spec;
  m.input_ = LinearLayer::uniform_init(1, d, rng);
  std::vector<LinearLayer> f_layers;
  f_layers.push_back(LinearLayer::uniform_init(d, d, rng));
  f_layers.push_back(LinearLayer::uniform_init(d, d, rng));
  m.block_ = ResidualBlock(spec.variant, SubNetwork(std::move(f_layers), spec.activation));
  const bool concat = spec.variant.kind == ResidualKind::GradMagnitudeConcat;
  m.output_ = LinearLayer::uniform_init(concat ? d + 1 : d, 1, rng);
  return m;
}

Var Model::forward(Binder& binder, Var x) {
  Tape& tape = binder.tape();
  const Activation act = spec_.activation;
  const Var h1 = tape.activation(apply_linear(tape, input_.bind(binder), x), act);
  const BlockOutput block = block_.forward(binder, h1);
  const Var features = block.grad_norm ? tape.concat(block.h, *block.grad_norm) : block.h;
  return apply_linear(tape, output_.bind(binder), tape.activation(features, act));
}

std::vector<double> Model::predict(std::span<const double> xs) const {
  Model copy = *this;
  Tape tape;
  Binder binder(tape, /*trainable=*/false);
  const Var x = tape.constant(Tensor::matrix(xs.size(), 1, {xs.begin(), xs.end()}));
  const Var out = copy.forward(binder, x);
  return tape.value(out).storage();
}

std::size_t Model::parameter_count() const {
  return input_.parameter_count() + block_.sub_network().parameter_count() +
         block_.extra_parameter_count() + output_.parameter_count();
}

std::vector<const Tensor*> Model::parameters() const {
  // Same order as forward() binds them.
  Model& self = const_cast<Model&>(*this);
  Tape tape;
  Binder binder(tape, /*trainable=*/false);
  self.forward(binder, tape.constant(Tensor::matrix(1, 1, {0.0})));
  std::vector<const Tensor*> out;
  for (const auto& [param, var] : binder.bindings()) out.push_back(param);
  return out;
}

std::uint64_t Model::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Tensor* p : parameters()) {
    for (double v : p->data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

}  // namespace gradres
