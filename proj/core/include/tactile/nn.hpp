#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace tactile::nn {

enum class Activation { Sigmoid, Rectifier, Identity };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct Layer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  Activation activation = Activation::Identity;

  Eigen::Index in_width() const { return weights.cols(); }
  Eigen::Index out_width() const { return weights.rows(); }
};

struct Mlp {
  std::vector<Layer> layers;

  Eigen::Index input_width() const;
  Eigen::Index output_width() const;
  // Throws std::invalid_argument when adjacent widths do not compose or a
  // parameter is non-finite.
  void validate() const;
};

// Fresh network with uniform weights in +-sqrt(6/(fan_in+fan_out)) and zero
// biases. widths = [input, hidden..., output]; one activation per layer.
Mlp make_mlp(const std::vector<Eigen::Index>& widths,
             const std::vector<Activation>& activations, std::mt19937_64& rng);

Eigen::MatrixXd apply_activation(Activation a, const Eigen::MatrixXd& z);

// Forward pass; rows are samples.
Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& inputs);
Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::VectorXd& input);

struct ForwardCache {
  // layer_values[k] is the input of layer k; layer_values.back() the output.
  std::vector<Eigen::MatrixXd> layer_values;
  std::vector<Eigen::MatrixXd> preactivations;

  const Eigen::MatrixXd& output() const { return layer_values.back(); }
};

ForwardCache mlp_forward_cached(const Mlp& net, const Eigen::MatrixXd& inputs);

struct LayerGrads {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

struct MlpGrads {
  std::vector<LayerGrads> layers;
};

MlpGrads zero_grads_like(const Mlp& net);

// Reverse-mode pass. output_grad holds d(loss)/d(output) per row; parameter
// gradients are summed over rows. When input_grad is non-null it receives
// d(loss)/d(inputs).
MlpGrads backprop_grads(const Mlp& net, const ForwardCache& cache,
                        const Eigen::MatrixXd& output_grad,
                        Eigen::MatrixXd* input_grad = nullptr);
MlpGrads backprop_grads(const Mlp& net, const Eigen::VectorXd& input,
                        const Eigen::VectorXd& output_grad);

// ---- flat parameter handling ----------------------------------------------

// Named block layout of the flattened parameter vector, used for error
// reporting and optimizer bookkeeping.
struct BlockLayout {
  struct Block {
    std::string name;
    Eigen::Index offset = 0;
    Eigen::Index size = 0;
  };
  std::vector<Block> blocks;
  Eigen::Index total = 0;
};

BlockLayout layout_of(const Mlp& net);
Eigen::VectorXd flatten_params(const Mlp& net);
Eigen::VectorXd flatten_grads(const MlpGrads& grads);
void unflatten_params(const Eigen::VectorXd& flat, Mlp& net);

// ---- optimizers ------------------------------------------------------------

enum class OptimizerKind { Sgd, Rmsprop, Adadelta };

const char* to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Rmsprop;
  double step_rate = 1e-3;
  double decay = 0.9;
  double epsilon_stab = 1e-8;
};

class Optimizer {
 public:
  Optimizer(OptimizerConfig config, Eigen::Index size);

  // One in-place update. Throws std::runtime_error naming the parameter block
  // when a gradient is non-finite. The layout must match the params vector.
  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads,
            const BlockLayout& layout);

  const OptimizerConfig& config() const { return config_; }
  const Eigen::ArrayXd& squared_grad_ema() const { return sq_grad_ema_; }
  const Eigen::ArrayXd& squared_update_ema() const { return sq_update_ema_; }

 private:
  OptimizerConfig config_;
  Eigen::ArrayXd sq_grad_ema_;
  Eigen::ArrayXd sq_update_ema_;  // adadelta only
};

// Central differences (f(x+h e_i) - f(x-h e_i)) / (2h) per coordinate.
// Throws std::runtime_error when f evaluates to a non-finite value.
Eigen::VectorXd finite_diff(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h);

// max_i |a_i - b_i| / max(1e-12, |a_i|, |b_i|)
double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace tactile::nn
