#include "tactile/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tactile/rng.hpp"

namespace tactile::vae {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Stream indices hung off the training seed.
constexpr std::uint64_t kInitRecognition = 1;
constexpr std::uint64_t kInitGenerative = 2;
constexpr std::uint64_t kShuffleStream = 3;
constexpr std::uint64_t kNoiseStream = 4;

}  // namespace

Eigen::MatrixXd Standardization::apply(const Eigen::MatrixXd& raw) const {
  if (raw.cols() != mean.size()) {
    throw std::invalid_argument("frame width does not match standardization");
  }
  return (raw.rowwise() - mean.transpose()).array().rowwise() /
         stddev.transpose().array();
}

Eigen::VectorXd Standardization::apply(const Eigen::VectorXd& raw) const {
  if (raw.size() != mean.size()) {
    throw std::invalid_argument("frame width does not match standardization");
  }
  return (raw - mean).cwiseQuotient(stddev);
}

Standardization fit_standardization(const Eigen::MatrixXd& frames) {
  if (frames.rows() < 1) throw std::invalid_argument("no frames");
  Standardization stats;
  stats.mean = frames.colwise().mean();
  Eigen::VectorXd var =
      (frames.rowwise() - stats.mean.transpose()).array().square().colwise().mean();
  stats.stddev = var.array().sqrt().matrix();
  // Constant taxels pass through unscaled.
  for (Eigen::Index d = 0; d < stats.stddev.size(); ++d) {
    if (stats.stddev(d) <= 1e-12) stats.stddev(d) = 1.0;
  }
  return stats;
}

void VaeModel::validate() const {
  recognition.validate();
  generative.validate();
  if (recognition.output_width() != 2 * latent_width) {
    throw std::invalid_argument("recognition output must be 2 * latent_width");
  }
  if (generative.input_width() != latent_width) {
    throw std::invalid_argument("generative input must be latent_width");
  }
  if (generative.output_width() != recognition.input_width()) {
    throw std::invalid_argument("generative output must match taxel width");
  }
  if (!std::isfinite(output_logvar)) {
    throw std::invalid_argument("output_logvar must be finite");
  }
}

Eigen::VectorXd reparameterize(const LatentCode& code, const Eigen::VectorXd& eps) {
  if (eps.size() != code.mean.size() || code.logvar.size() != code.mean.size()) {
    throw std::invalid_argument("latent width mismatch in reparameterize");
  }
  return code.mean.array() + (0.5 * code.logvar.array()).exp() * eps.array();
}

double kl_to_standard_normal(const LatentCode& code) {
  if (code.logvar.size() != code.mean.size()) {
    throw std::invalid_argument("latent width mismatch in kl");
  }
  return 0.5 * (code.mean.array().square() + code.logvar.array().exp() - 1.0 -
                code.logvar.array())
                   .sum();
}

double gaussian_nll(const Eigen::VectorXd& x, const Eigen::VectorXd& mu_x,
                    double output_logvar) {
  if (x.size() != mu_x.size()) throw std::invalid_argument("shape mismatch in nll");
  const double inv_var = std::exp(-output_logvar);
  return 0.5 * ((x - mu_x).array().square() * inv_var + output_logvar + kLog2Pi).sum();
}

LatentCode split_code(const Eigen::VectorXd& recognition_output) {
  if (recognition_output.size() % 2 != 0) {
    throw std::invalid_argument("recognition output width must be even");
  }
  const Eigen::Index latent = recognition_output.size() / 2;
  return {recognition_output.head(latent), recognition_output.tail(latent)};
}

namespace {

struct ElboForward {
  nn::ForwardCache recognition;
  nn::ForwardCache generative;
  Eigen::MatrixXd means;    // N x L
  Eigen::MatrixXd logvars;  // N x L
  Eigen::MatrixXd z;        // N x L
  Eigen::VectorXd per_row_loss;
  double loss = 0.0;
};

ElboForward elbo_forward(const VaeModel& model, const Eigen::MatrixXd& batch,
                         const Eigen::MatrixXd& eps_batch) {
  const Eigen::Index latent = model.latent_width;
  if (eps_batch.rows() != batch.rows() || eps_batch.cols() != latent) {
    throw std::invalid_argument("eps_batch must be one latent vector per frame");
  }
  ElboForward f;
  f.recognition = nn::mlp_forward_cached(model.recognition, batch);
  const Eigen::MatrixXd& code = f.recognition.output();
  f.means = code.leftCols(latent);
  f.logvars = code.rightCols(latent);
  f.z = f.means.array() + (0.5 * f.logvars.array()).exp() * eps_batch.array();
  f.generative = nn::mlp_forward_cached(model.generative, f.z);

  const Eigen::MatrixXd& recon = f.generative.output();
  const double inv_var = std::exp(-model.output_logvar);
  const Eigen::ArrayXXd sq_resid = (recon - batch).array().square();
  Eigen::VectorXd nll =
      0.5 * (sq_resid * inv_var).rowwise().sum() +
      0.5 * static_cast<double>(batch.cols()) * (model.output_logvar + kLog2Pi) *
          Eigen::VectorXd::Ones(batch.rows());
  Eigen::VectorXd kl = 0.5 * (f.means.array().square() + f.logvars.array().exp() -
                              1.0 - f.logvars.array())
                                 .rowwise()
                                 .sum();
  f.per_row_loss = nll + kl;
  f.loss = f.per_row_loss.mean();
  if (!std::isfinite(f.loss)) {
    for (Eigen::Index n = 0; n < f.per_row_loss.size(); ++n) {
      if (!std::isfinite(f.per_row_loss(n))) {
        throw std::runtime_error("non-finite loss at frame " + std::to_string(n));
      }
    }
    throw std::runtime_error("non-finite loss");
  }
  return f;
}

}  // namespace

double elbo_loss(const VaeModel& model, const Eigen::MatrixXd& batch,
                 const Eigen::MatrixXd& eps_batch) {
  return elbo_forward(model, batch, eps_batch).loss;
}

ElboGrads elbo_grads(const VaeModel& model, const Eigen::MatrixXd& batch,
                     const Eigen::MatrixXd& eps_batch) {
  ElboForward f = elbo_forward(model, batch, eps_batch);
  const double n = static_cast<double>(batch.rows());
  const double inv_var = std::exp(-model.output_logvar);

  ElboGrads grads;
  grads.loss = f.loss;

  const Eigen::MatrixXd resid = f.generative.output() - batch;
  // d loss / d reconstruction
  Eigen::MatrixXd d_recon = resid * (inv_var / n);
  // d loss / d output_logvar: 0.5 sum(-resid^2 e^{-olv} + 1) / n
  grads.output_logvar =
      0.5 * (-resid.array().square() * inv_var + 1.0).sum() / n;

  Eigen::MatrixXd d_z;
  grads.generative = nn::backprop_grads(model.generative, f.generative, d_recon, &d_z);

  // Reparameterization: z = mu + exp(0.5 lv) eps
  Eigen::MatrixXd d_mean = d_z + f.means / n;
  Eigen::MatrixXd d_logvar =
      (d_z.array() * eps_batch.array() * 0.5 * (0.5 * f.logvars.array()).exp() +
       0.5 * (f.logvars.array().exp() - 1.0) / n)
          .matrix();

  Eigen::MatrixXd d_code(batch.rows(), 2 * model.latent_width);
  d_code << d_mean, d_logvar;
  grads.recognition = nn::backprop_grads(model.recognition, f.recognition, d_code);
  return grads;
}

namespace {

// The optimizer runs over one flat vector: recognition, generative, then the
// scalar output_logvar.
struct FlatModel {
  nn::BlockLayout layout;
  Eigen::Index recognition_size = 0;
  Eigen::Index generative_size = 0;
};

FlatModel flat_layout(const VaeModel& model) {
  FlatModel flat;
  nn::BlockLayout rec = nn::layout_of(model.recognition);
  nn::BlockLayout gen = nn::layout_of(model.generative);
  flat.recognition_size = rec.total;
  flat.generative_size = gen.total;
  for (const auto& block : rec.blocks) {
    flat.layout.blocks.push_back(
        {"recognition." + block.name, block.offset, block.size});
  }
  for (const auto& block : gen.blocks) {
    flat.layout.blocks.push_back(
        {"generative." + block.name, rec.total + block.offset, block.size});
  }
  flat.layout.blocks.push_back({"output_logvar", rec.total + gen.total, 1});
  flat.layout.total = rec.total + gen.total + 1;
  return flat;
}

Eigen::VectorXd flatten_model(const VaeModel& model, const FlatModel& flat) {
  Eigen::VectorXd out(flat.layout.total);
  out.segment(0, flat.recognition_size) = nn::flatten_params(model.recognition);
  out.segment(flat.recognition_size, flat.generative_size) =
      nn::flatten_params(model.generative);
  out(flat.layout.total - 1) = model.output_logvar;
  return out;
}

void unflatten_model(const Eigen::VectorXd& v, const FlatModel& flat,
                     VaeModel& model) {
  nn::unflatten_params(v.segment(0, flat.recognition_size), model.recognition);
  nn::unflatten_params(v.segment(flat.recognition_size, flat.generative_size),
                       model.generative);
  model.output_logvar = v(flat.layout.total - 1);
}

}  // namespace

TrainResult train_vae(const Eigen::MatrixXd& frames, const TrainConfig& config) {
  if (frames.rows() < 1) throw std::invalid_argument("dataset is empty");
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (config.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");

  const Eigen::Index taxels = frames.cols();
  const Eigen::Index latent = config.latent_width;

  TrainResult result;
  VaeModel& model = result.model;
  model.latent_width = latent;
  model.standardization = fit_standardization(frames);

  std::vector<Eigen::Index> rec_widths{taxels};
  std::vector<Eigen::Index> gen_widths{latent};
  std::vector<nn::Activation> acts;
  for (int h = 0; h < config.hidden_layers; ++h) {
    rec_widths.push_back(config.hidden_width);
    gen_widths.push_back(config.hidden_width);
    acts.push_back(config.hidden_activation);
  }
  rec_widths.push_back(2 * latent);
  gen_widths.push_back(taxels);
  acts.push_back(nn::Activation::Identity);

  auto rec_rng = make_rng(derive_seed(config.seed, kInitRecognition));
  auto gen_rng = make_rng(derive_seed(config.seed, kInitGenerative));
  model.recognition = nn::make_mlp(rec_widths, acts, rec_rng);
  model.generative = nn::make_mlp(gen_widths, acts, gen_rng);
  model.output_logvar = 0.0;

  const Eigen::MatrixXd standardized = model.standardization.apply(frames);

  const FlatModel flat = flat_layout(model);
  Eigen::VectorXd params = flatten_model(model, flat);
  nn::Optimizer optimizer(config.optimizer, flat.layout.total);

  const Eigen::Index n = standardized.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  std::normal_distribution<double> unit_normal(0.0, 1.0);

  result.epoch_loss.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto shuffle_rng =
        make_rng(derive_seed(config.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
    auto noise_rng =
        make_rng(derive_seed(config.seed, kNoiseStream, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    Eigen::Index rows_seen = 0;
    int batch_index = 0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size, ++batch_index) {
      const Eigen::Index rows = std::min<Eigen::Index>(config.batch_size, n - start);
      Eigen::MatrixXd batch(rows, taxels);
      for (Eigen::Index r = 0; r < rows; ++r) {
        batch.row(r) = standardized.row(order[static_cast<std::size_t>(start + r)]);
      }
      Eigen::MatrixXd eps = Eigen::MatrixXd::NullaryExpr(
          rows, latent, [&]() { return unit_normal(noise_rng); });

      unflatten_model(params, flat, model);
      ElboGrads grads;
      try {
        grads = elbo_grads(model, batch, eps);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("training diverged at epoch " +
                                 std::to_string(epoch) + " batch " +
                                 std::to_string(batch_index) + ": " + e.what());
      }

      Eigen::VectorXd flat_grads(flat.layout.total);
      flat_grads.segment(0, flat.recognition_size) =
          nn::flatten_grads(grads.recognition);
      flat_grads.segment(flat.recognition_size, flat.generative_size) =
          nn::flatten_grads(grads.generative);
      flat_grads(flat.layout.total - 1) = grads.output_logvar;

      optimizer.step(params, flat_grads, flat.layout);
      loss_sum += grads.loss * static_cast<double>(rows);
      rows_seen += rows;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(rows_seen));
  }
  unflatten_model(params, flat, model);
  model.validate();
  return result;
}

LatentCode encode(const VaeModel& model, const Eigen::VectorXd& frame) {
  const Eigen::VectorXd x = model.standardization.apply(frame);
  return split_code(nn::mlp_forward(model.recognition, x));
}

EncodedBatch encode_batch(const VaeModel& model, const Eigen::MatrixXd& frames) {
  const Eigen::MatrixXd x = model.standardization.apply(frames);
  const Eigen::MatrixXd code = nn::mlp_forward(model.recognition, x);
  EncodedBatch out;
  out.means = code.leftCols(model.latent_width);
  out.logvars = code.rightCols(model.latent_width);
  return out;
}

std::vector<Eigen::Index> active_units(const VaeModel& model,
                                       const Eigen::MatrixXd& frames,
                                       double threshold,
                                       ActivityStatistic statistic) {
  if (threshold <= 0.0) throw std::invalid_argument("threshold must be > 0");
  const EncodedBatch encoded = encode_batch(model, frames);
  std::vector<Eigen::Index> active;
  switch (statistic) {
    case ActivityStatistic::MeanVariance: {
      const Eigen::RowVectorXd mean = encoded.means.colwise().mean();
      const Eigen::RowVectorXd var =
          (encoded.means.rowwise() - mean).array().square().colwise().mean();
      for (Eigen::Index i = 0; i < var.size(); ++i) {
        if (var(i) > threshold) active.push_back(i);
      }
      break;
    }
    case ActivityStatistic::PosteriorVariance: {
      const Eigen::RowVectorXd avg_var =
          encoded.logvars.array().exp().colwise().mean();
      for (Eigen::Index i = 0; i < avg_var.size(); ++i) {
        if (1.0 - avg_var(i) > threshold) active.push_back(i);
      }
      break;
    }
  }
  return active;
}

}  // namespace tactile::vae
