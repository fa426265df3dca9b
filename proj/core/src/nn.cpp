#include "tactile/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace tactile::nn {

namespace {

double sigmoid_scalar(double z) {
  // Branch form keeps exp() off the overflowing side.
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Sigmoid:
      return "sigmoid";
    case Activation::Rectifier:
      return "rectifier";
    case Activation::Identity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "rectifier") return Activation::Rectifier;
  if (s == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation: " + s);
}

const char* to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Sgd:
      return "sgd";
    case OptimizerKind::Rmsprop:
      return "rmsprop";
    case OptimizerKind::Adadelta:
      return "adadelta";
  }
  return "sgd";
}

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "rmsprop") return OptimizerKind::Rmsprop;
  if (s == "adadelta") return OptimizerKind::Adadelta;
  throw std::invalid_argument("unknown optimizer: " + s);
}

Eigen::Index Mlp::input_width() const {
  if (layers.empty()) throw std::invalid_argument("mlp has no layers");
  return layers.front().in_width();
}

Eigen::Index Mlp::output_width() const {
  if (layers.empty()) throw std::invalid_argument("mlp has no layers");
  return layers.back().out_width();
}

void Mlp::validate() const {
  if (layers.empty()) throw std::invalid_argument("mlp has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const Layer& layer = layers[k];
    if (layer.bias.size() != layer.out_width()) {
      throw std::invalid_argument("layer " + std::to_string(k) +
                                  ": bias width does not match weights");
    }
    if (k > 0 && layers[k - 1].out_width() != layer.in_width()) {
      throw std::invalid_argument("layer " + std::to_string(k) +
                                  ": input width does not match previous output");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw std::invalid_argument("layer " + std::to_string(k) +
                                  ": non-finite parameter");
    }
  }
}

Mlp make_mlp(const std::vector<Eigen::Index>& widths,
             const std::vector<Activation>& activations, std::mt19937_64& rng) {
  if (widths.size() < 2) throw std::invalid_argument("need at least two widths");
  if (activations.size() != widths.size() - 1) {
    throw std::invalid_argument("need one activation per layer");
  }
  Mlp net;
  net.layers.reserve(activations.size());
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const Eigen::Index fan_in = widths[k];
    const Eigen::Index fan_out = widths[k + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer layer;
    layer.weights = Eigen::MatrixXd::NullaryExpr(
        fan_out, fan_in, [&]() { return dist(rng); });
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    layer.activation = activations[k];
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Eigen::MatrixXd apply_activation(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::Sigmoid:
      return z.unaryExpr([](double v) { return sigmoid_scalar(v); });
    case Activation::Rectifier:
      return z.cwiseMax(0.0);
    case Activation::Identity:
      return z;
  }
  return z;
}

namespace {

// Derivative of the activation given preactivation z and activation a.
Eigen::MatrixXd activation_derivative(Activation act, const Eigen::MatrixXd& z,
                                      const Eigen::MatrixXd& a) {
  switch (act) {
    case Activation::Sigmoid:
      return (a.array() * (1.0 - a.array())).matrix();
    case Activation::Rectifier:
      return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::Identity:
      return Eigen::MatrixXd::Ones(z.rows(), z.cols());
  }
  return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

void check_input_width(const Mlp& net, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != net.input_width()) {
    throw std::invalid_argument(
        "input width " + std::to_string(inputs.cols()) + " does not match net input " +
        std::to_string(net.input_width()));
  }
}

}  // namespace

ForwardCache mlp_forward_cached(const Mlp& net, const Eigen::MatrixXd& inputs) {
  check_input_width(net, inputs);
  ForwardCache cache;
  cache.layer_values.reserve(net.layers.size() + 1);
  cache.preactivations.reserve(net.layers.size());
  cache.layer_values.push_back(inputs);
  for (const Layer& layer : net.layers) {
    Eigen::MatrixXd z =
        (cache.layer_values.back() * layer.weights.transpose()).rowwise() +
        layer.bias.transpose();
    cache.layer_values.push_back(apply_activation(layer.activation, z));
    cache.preactivations.push_back(std::move(z));
  }
  return cache;
}

Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& inputs) {
  check_input_width(net, inputs);
  Eigen::MatrixXd values = inputs;
  for (const Layer& layer : net.layers) {
    Eigen::MatrixXd z = (values * layer.weights.transpose()).rowwise() +
                        layer.bias.transpose();
    values = apply_activation(layer.activation, z);
  }
  return values;
}

Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::VectorXd& input) {
  return mlp_forward(net, Eigen::MatrixXd(input.transpose())).row(0);
}

MlpGrads zero_grads_like(const Mlp& net) {
  MlpGrads grads;
  grads.layers.reserve(net.layers.size());
  for (const Layer& layer : net.layers) {
    grads.layers.push_back({Eigen::MatrixXd::Zero(layer.out_width(), layer.in_width()),
                            Eigen::VectorXd::Zero(layer.out_width())});
  }
  return grads;
}

MlpGrads backprop_grads(const Mlp& net, const ForwardCache& cache,
                        const Eigen::MatrixXd& output_grad,
                        Eigen::MatrixXd* input_grad) {
  if (output_grad.cols() != net.output_width()) {
    throw std::invalid_argument("output_grad width does not match net output");
  }
  if (output_grad.rows() != cache.layer_values.front().rows()) {
    throw std::invalid_argument("output_grad rows do not match cached batch");
  }
  MlpGrads grads = zero_grads_like(net);
  Eigen::MatrixXd delta = output_grad;
  for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(net.layers.size()) - 1; k >= 0;
       --k) {
    const Layer& layer = net.layers[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd& z = cache.preactivations[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd& a = cache.layer_values[static_cast<std::size_t>(k) + 1];
    Eigen::MatrixXd dz =
        delta.cwiseProduct(activation_derivative(layer.activation, z, a));
    grads.layers[static_cast<std::size_t>(k)].weights.noalias() =
        dz.transpose() * cache.layer_values[static_cast<std::size_t>(k)];
    grads.layers[static_cast<std::size_t>(k)].bias = dz.colwise().sum();
    if (k > 0 || input_grad != nullptr) {
      delta.noalias() = dz * layer.weights;
    }
  }
  if (input_grad != nullptr) *input_grad = delta;
  return grads;
}

MlpGrads backprop_grads(const Mlp& net, const Eigen::VectorXd& input,
                        const Eigen::VectorXd& output_grad) {
  ForwardCache cache = mlp_forward_cached(net, Eigen::MatrixXd(input.transpose()));
  return backprop_grads(net, cache, Eigen::MatrixXd(output_grad.transpose()));
}

BlockLayout layout_of(const Mlp& net) {
  BlockLayout layout;
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const Layer& layer = net.layers[k];
    const Eigen::Index w = layer.weights.size();
    layout.blocks.push_back({"layer" + std::to_string(k) + ".weights", offset, w});
    offset += w;
    const Eigen::Index b = layer.bias.size();
    layout.blocks.push_back({"layer" + std::to_string(k) + ".bias", offset, b});
    offset += b;
  }
  layout.total = offset;
  return layout;
}

Eigen::VectorXd flatten_params(const Mlp& net) {
  Eigen::VectorXd flat(layout_of(net).total);
  Eigen::Index offset = 0;
  for (const Layer& layer : net.layers) {
    flat.segment(offset, layer.weights.size()) =
        Eigen::Map<const Eigen::VectorXd>(layer.weights.data(), layer.weights.size());
    offset += layer.weights.size();
    flat.segment(offset, layer.bias.size()) = layer.bias;
    offset += layer.bias.size();
  }
  return flat;
}

Eigen::VectorXd flatten_grads(const MlpGrads& grads) {
  Eigen::Index total = 0;
  for (const LayerGrads& g : grads.layers) total += g.weights.size() + g.bias.size();
  Eigen::VectorXd flat(total);
  Eigen::Index offset = 0;
  for (const LayerGrads& g : grads.layers) {
    flat.segment(offset, g.weights.size()) =
        Eigen::Map<const Eigen::VectorXd>(g.weights.data(), g.weights.size());
    offset += g.weights.size();
    flat.segment(offset, g.bias.size()) = g.bias;
    offset += g.bias.size();
  }
  return flat;
}

void unflatten_params(const Eigen::VectorXd& flat, Mlp& net) {
  if (flat.size() != layout_of(net).total) {
    throw std::invalid_argument("flat parameter size does not match net layout");
  }
  Eigen::Index offset = 0;
  for (Layer& layer : net.layers) {
    Eigen::Map<Eigen::VectorXd>(layer.weights.data(), layer.weights.size()) =
        flat.segment(offset, layer.weights.size());
    offset += layer.weights.size();
    layer.bias = flat.segment(offset, layer.bias.size());
    offset += layer.bias.size();
  }
}

Optimizer::Optimizer(OptimizerConfig config, Eigen::Index size)
    : config_(config),
      sq_grad_ema_(Eigen::ArrayXd::Zero(size)),
      sq_update_ema_(Eigen::ArrayXd::Zero(size)) {
  if (config_.step_rate <= 0.0) throw std::invalid_argument("step_rate must be > 0");
  if (config_.decay <= 0.0 || config_.decay >= 1.0) {
    throw std::invalid_argument("decay must be in (0,1)");
  }
  if (config_.epsilon_stab <= 0.0) {
    throw std::invalid_argument("epsilon_stab must be > 0");
  }
}

void Optimizer::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads,
                     const BlockLayout& layout) {
  if (params.size() != grads.size() || params.size() != sq_grad_ema_.size()) {
    throw std::invalid_argument("params/grads/state sizes do not match");
  }
  if (!grads.allFinite()) {
    for (const BlockLayout::Block& block : layout.blocks) {
      if (!grads.segment(block.offset, block.size).allFinite()) {
        throw std::runtime_error("non-finite gradient in block " + block.name);
      }
    }
    throw std::runtime_error("non-finite gradient");
  }
  const Eigen::ArrayXd g = grads.array();
  switch (config_.kind) {
    case OptimizerKind::Sgd:
      params.array() -= config_.step_rate * g;
      break;
    case OptimizerKind::Rmsprop: {
      sq_grad_ema_ = config_.decay * sq_grad_ema_ + (1.0 - config_.decay) * g.square();
      params.array() -=
          config_.step_rate * g / (sq_grad_ema_ + config_.epsilon_stab).sqrt();
      break;
    }
    case OptimizerKind::Adadelta: {
      sq_grad_ema_ = config_.decay * sq_grad_ema_ + (1.0 - config_.decay) * g.square();
      const Eigen::ArrayXd update =
          -((sq_update_ema_ + config_.epsilon_stab).sqrt() /
            (sq_grad_ema_ + config_.epsilon_stab).sqrt()) *
          g;
      params.array() += config_.step_rate * update;
      sq_update_ema_ =
          config_.decay * sq_update_ema_ + (1.0 - config_.decay) * update.square();
      break;
    }
  }
}

Eigen::VectorXd finite_diff(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
  if (h <= 0.0) throw std::invalid_argument("h must be > 0");
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double fp = f(probe);
    probe(i) = x(i) - h;
    const double fm = f(probe);
    probe(i) = x(i);
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error("non-finite function value in finite_diff at index " +
                               std::to_string(i));
    }
    grad(i) = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("size mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    // Floor keeps finite-difference cancellation noise on near-zero entries
    // from dominating the ratio.
    const double scale = std::max({1e-6, std::abs(a(i)), std::abs(b(i))});
    worst = std::max(worst, std::abs(a(i) - b(i)) / scale);
  }
  return worst;
}

}  // namespace tactile::nn
