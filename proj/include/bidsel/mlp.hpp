#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

namespace bidsel {

enum class MlpLoss {
  mse,    // one output: the strategy gap
  custom  // two outputs (beta_det, beta_stoch); |min(beta)-min(beta_hat)|^p
};

enum class Activation { identity, relu, tanh_act };

enum class ValSplitKind { tail, random };

struct MlpConfig {
  std::vector<int> layer_sizes;  // input, hidden..., output
  Activation activation = Activation::identity;  // hidden layers only
  double dropout_frac = 0.0;     // inverted dropout on hidden activations
  double l1_coeff = 0.0;         // weight penalty l1 * sum |w|
  double adam_step = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double custom_exponent = 1.0;  // p in the custom loss
  // Validation rows: the tail of the training block for sequential data,
  // a seeded random subset for random splits.
  ValSplitKind val_split = ValSplitKind::tail;

  void validate(MlpLoss loss) const;
};

struct TrainingCurve {
  std::vector<double> train_loss;  // per epoch, dropout off, includes l1 term
  std::vector<double> val_loss;
};

struct MlpModel {
  MlpConfig config;
  // weights[l] is row-major (layer_sizes[l+1] x layer_sizes[l]).
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  std::vector<double> predict_row(std::span<const double> x) const;
  std::vector<std::vector<double>> predict(
      const std::vector<std::vector<double>>& X) const;

  nlohmann::json to_json() const;
  static MlpModel from_json(const nlohmann::json& j);
};

// Data loss (mean over samples) plus the l1 penalty, dropout off.
double mlp_loss(const MlpModel& model, const std::vector<std::vector<double>>& X,
                const std::vector<std::vector<double>>& Y, MlpLoss loss);

std::pair<MlpModel, TrainingCurve> mlp_fit(
    const std::vector<std::vector<double>>& X,
    const std::vector<std::vector<double>>& Y, const MlpConfig& config,
    MlpLoss loss, double validation_fraction);

// Max relative error between analytic and central finite-difference
// gradients (step 1e-5). Parameters whose perturbation crosses a min-kink of
// the custom loss (or an |w| kink when l1 > 0) are excluded. The config form
// checks a freshly initialized network; the model form checks the given one.
double gradient_check(const MlpConfig& config, MlpLoss loss,
                      const std::vector<std::vector<double>>& X,
                      const std::vector<std::vector<double>>& Y);
double gradient_check(MlpModel model, MlpLoss loss,
                      const std::vector<std::vector<double>>& X,
                      const std::vector<std::vector<double>>& Y);

// Suggested stopping epoch (1-based): the epoch minimizing validation loss.
int overfit_report(const TrainingCurve& curve);

}  // namespace bidsel
