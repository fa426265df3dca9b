#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "tactile/nn.hpp"

namespace tactile::vae {

struct LatentCode {
  Eigen::VectorXd mean;
  Eigen::VectorXd logvar;
};

// Per-taxel z-score statistics, estimated on the training set and stored with
// the model so encode() sees the same input scale as training did.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& raw) const;
};

Standardization fit_standardization(const Eigen::MatrixXd& frames);

struct VaeModel {
  nn::Mlp recognition;  // D -> hidden -> [mu(x), log sigma(x)^2] (2L wide)
  nn::Mlp generative;   // L -> hidden -> mu(z) (D wide)
  double output_logvar = 0.0;  // log sigma^2 of p(x|z), shared across taxels
  Eigen::Index latent_width = 128;
  Standardization standardization;

  Eigen::Index taxel_width() const { return recognition.input_width(); }
  void validate() const;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  std::uint64_t seed = 0;
  nn::OptimizerConfig optimizer{nn::OptimizerKind::Rmsprop, 1e-3, 0.9, 1e-8};
  nn::Activation hidden_activation = nn::Activation::Sigmoid;
  Eigen::Index hidden_width = 512;  // 128 keeps desk-scale runs fast
  int hidden_layers = 2;
  Eigen::Index latent_width = 128;
};

// z = mean + exp(0.5 logvar) .* eps
Eigen::VectorXd reparameterize(const LatentCode& code, const Eigen::VectorXd& eps);

// KL(N(mean, diag exp(logvar)) || N(0, I)), closed form.
double kl_to_standard_normal(const LatentCode& code);

// -log N(x; mu_x, exp(output_logvar) I)
double gaussian_nll(const Eigen::VectorXd& x, const Eigen::VectorXd& mu_x,
                    double output_logvar);

// Splits a recognition output row [mu, logvar] into a LatentCode.
LatentCode split_code(const Eigen::VectorXd& recognition_output);

// Mean over the batch of gaussian_nll + kl, with one reparameterization
// sample per row. batch and eps rows correspond; batch must already be in the
// model's standardized units.
double elbo_loss(const VaeModel& model, const Eigen::MatrixXd& batch,
                 const Eigen::MatrixXd& eps_batch);

struct ElboGrads {
  double loss = 0.0;
  nn::MlpGrads recognition;
  nn::MlpGrads generative;
  double output_logvar = 0.0;
};

ElboGrads elbo_grads(const VaeModel& model, const Eigen::MatrixXd& batch,
                     const Eigen::MatrixXd& eps_batch);

struct TrainResult {
  VaeModel model;
  std::vector<double> epoch_loss;  // mean loss per epoch
};

// Trains on raw frames (rows). Standardization is fit on the frames and
// folded into the returned model. Deterministic given config.seed.
TrainResult train_vae(const Eigen::MatrixXd& frames, const TrainConfig& config);

// Recognition pass on one raw frame (standardization applied internally).
LatentCode encode(const VaeModel& model, const Eigen::VectorXd& frame);

struct EncodedBatch {
  Eigen::MatrixXd means;    // N x L
  Eigen::MatrixXd logvars;  // N x L
};

EncodedBatch encode_batch(const VaeModel& model, const Eigen::MatrixXd& frames);

enum class ActivityStatistic {
  // Variance across the dataset of the posterior mean of each dimension.
  MeanVariance,
  // 1 - average posterior variance; near zero for dims collapsed to the prior.
  PosteriorVariance,
};

std::vector<Eigen::Index> active_units(
    const VaeModel& model, const Eigen::MatrixXd& frames, double threshold,
    ActivityStatistic statistic = ActivityStatistic::MeanVariance);

}  // namespace tactile::vae
