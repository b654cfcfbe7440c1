#include "bidsel/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bidsel/error.hpp"
#include "bidsel/util.hpp"

namespace bidsel {

void MlpConfig::validate(MlpLoss loss) const {
  if (layer_sizes.size() < 2) {
    throw ValidationError("layer_sizes needs at least input and output");
  }
  for (int s : layer_sizes) {
    if (s < 1) throw ValidationError("layer sizes must be >= 1");
  }
  const int outputs = layer_sizes.back();
  if (loss == MlpLoss::mse && outputs != 1) {
    throw ValidationError("mse loss needs exactly 1 output, got " +
                          std::to_string(outputs));
  }
  if (loss == MlpLoss::custom && outputs != 2) {
    throw ValidationError("custom loss needs exactly 2 outputs, got " +
                          std::to_string(outputs));
  }
  if (!(dropout_frac >= 0.0 && dropout_frac < 1.0)) {
    throw ValidationError("dropout_frac must be in [0,1)");
  }
  if (l1_coeff < 0.0) throw ValidationError("l1_coeff must be >= 0");
  if (!(adam_step > 0.0)) throw ValidationError("adam_step must be > 0");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(custom_exponent >= 1.0)) {
    throw ValidationError("custom_exponent must be >= 1");
  }
}

namespace {

double activate(double x, Activation a) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh_act: return std::tanh(x);
  }
  return x;
}

double activate_grad(double pre, Activation a) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh_act: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

struct Forward {
  // pre[l] and act[l] for layers 1..L (index 0 unused for pre).
  std::vector<std::vector<double>> act;
  std::vector<std::vector<double>> pre;
};

Forward forward_pass(const MlpModel& m, std::span<const double> x,
                     const std::vector<std::vector<double>>* dropout_scale) {
  const auto& sizes = m.config.layer_sizes;
  Forward f;
  f.act.resize(sizes.size());
  f.pre.resize(sizes.size());
  f.act[0].assign(x.begin(), x.end());
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    const auto in = static_cast<std::size_t>(sizes[l - 1]);
    const auto out = static_cast<std::size_t>(sizes[l]);
    f.pre[l].assign(out, 0.0);
    const auto& w = m.weights[l - 1];
    for (std::size_t o = 0; o < out; ++o) {
      double acc = m.biases[l - 1][o];
      const double* wrow = w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * f.act[l - 1][i];
      f.pre[l][o] = acc;
    }
    f.act[l].resize(out);
    const bool hidden = l + 1 < sizes.size();
    for (std::size_t o = 0; o < out; ++o) {
      double a = hidden ? activate(f.pre[l][o], m.config.activation) : f.pre[l][o];
      if (hidden && dropout_scale) a *= (*dropout_scale)[l][o];
      f.act[l][o] = a;
    }
  }
  return f;
}

// Per-sample loss and gradient with respect to the outputs. The custom-loss
// subgradient follows the branch of the smaller predicted value; ties take
// the beta_det branch.
double output_loss_grad(MlpLoss loss, double exponent,
                        std::span<const double> yhat, std::span<const double> y,
                        std::vector<double>& grad_out) {
  grad_out.assign(yhat.size(), 0.0);
  if (loss == MlpLoss::mse) {
    const double e = yhat[0] - y[0];
    grad_out[0] = 2.0 * e;
    return e * e;
  }
  const std::size_t branch = yhat[1] < yhat[0] ? 1 : 0;
  const double min_true = std::min(y[0], y[1]);
  const double delta = yhat[branch] - min_true;
  const double sign = delta > 0.0 ? 1.0 : (delta < 0.0 ? -1.0 : 0.0);
  const double mag = std::abs(delta);
  grad_out[branch] = exponent * std::pow(mag, exponent - 1.0) * sign;
  return std::pow(mag, exponent);
}

double l1_penalty(const MlpModel& m) {
  if (m.config.l1_coeff == 0.0) return 0.0;
  double s = 0.0;
  for (const auto& w : m.weights) {
    for (double v : w) s += std::abs(v);
  }
  return m.config.l1_coeff * s;
}

MlpModel init_model(const MlpConfig& config, std::mt19937_64& rng) {
  MlpModel m;
  m.config = config;
  const auto& sizes = config.layer_sizes;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto in = static_cast<std::size_t>(sizes[l]);
    const auto out = static_cast<std::size_t>(sizes[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    std::vector<double> w(in * out);
    for (double& v : w) v = u(rng);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(out, 0.0);
  }
  return m;
}

struct Gradients {
  std::vector<std::vector<double>> dw;
  std::vector<std::vector<double>> db;

  explicit Gradients(const MlpModel& m) {
    for (const auto& w : m.weights) dw.emplace_back(w.size(), 0.0);
    for (const auto& b : m.biases) db.emplace_back(b.size(), 0.0);
  }
  void zero() {
    for (auto& v : dw) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : db) std::fill(v.begin(), v.end(), 0.0);
  }
};

// Accumulates dL/dparams for one sample given dL/doutput.
void backward_pass(const MlpModel& m, const Forward& f,
                   std::span<const double> grad_out,
                   const std::vector<std::vector<double>>* dropout_scale,
                   Gradients& grads) {
  const auto& sizes = m.config.layer_sizes;
  const std::size_t layers = sizes.size();
  std::vector<double> delta(grad_out.begin(), grad_out.end());
  for (std::size_t l = layers - 1; l >= 1; --l) {
    const auto in = static_cast<std::size_t>(sizes[l - 1]);
    const auto out = static_cast<std::size_t>(sizes[l]);
    const bool hidden = l + 1 < layers;
    std::vector<double> dpre(out);
    for (std::size_t o = 0; o < out; ++o) {
      double d = delta[o];
      if (hidden) {
        if (dropout_scale) d *= (*dropout_scale)[l][o];
        d *= activate_grad(f.pre[l][o], m.config.activation);
      }
      dpre[o] = d;
    }
    auto& dw = grads.dw[l - 1];
    auto& db = grads.db[l - 1];
    for (std::size_t o = 0; o < out; ++o) {
      const double d = dpre[o];
      db[o] += d;
      double* dwrow = dw.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) dwrow[i] += d * f.act[l - 1][i];
    }
    if (l == 1) break;
    std::vector<double> prev(in, 0.0);
    const auto& w = m.weights[l - 1];
    for (std::size_t o = 0; o < out; ++o) {
      const double d = dpre[o];
      const double* wrow = w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += d * wrow[i];
    }
    delta = std::move(prev);
  }
}

struct AdamState {
  std::vector<std::vector<double>> mw, vw, mb, vb;
  long t = 0;

  explicit AdamState(const MlpModel& m) {
    for (const auto& w : m.weights) {
      mw.emplace_back(w.size(), 0.0);
      vw.emplace_back(w.size(), 0.0);
    }
    for (const auto& b : m.biases) {
      mb.emplace_back(b.size(), 0.0);
      vb.emplace_back(b.size(), 0.0);
    }
  }

  void step(MlpModel& m, const Gradients& g) {
    ++t;
    const auto& c = m.config;
    const double bc1 = 1.0 - std::pow(c.adam_beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(c.adam_beta2, static_cast<double>(t));
    auto update = [&](std::vector<double>& p, const std::vector<double>& grad,
                      std::vector<double>& mo, std::vector<double>& ve) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        mo[i] = c.adam_beta1 * mo[i] + (1.0 - c.adam_beta1) * grad[i];
        ve[i] = c.adam_beta2 * ve[i] + (1.0 - c.adam_beta2) * grad[i] * grad[i];
        p[i] -= c.adam_step * (mo[i] / bc1) / (std::sqrt(ve[i] / bc2) + c.adam_eps);
      }
    };
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      update(m.weights[l], g.dw[l], mw[l], vw[l]);
      update(m.biases[l], g.db[l], mb[l], vb[l]);
    }
  }
};

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Mean data loss plus l1 penalty over a row subset; analytic gradient into
// `grads` when provided. Dropout off.
double dataset_loss(const MlpModel& m, const std::vector<std::vector<double>>& X,
                    const std::vector<std::vector<double>>& Y, MlpLoss loss,
                    std::span<const std::size_t> rows, Gradients* grads) {
  double total = 0.0;
  std::vector<double> grad_out;
  for (std::size_t r : rows) {
    Forward f = forward_pass(m, X[r], nullptr);
    const double sample =
        output_loss_grad(loss, m.config.custom_exponent, f.act.back(), Y[r], grad_out);
    total += sample;
    if (grads) {
      for (double& g : grad_out) g /= static_cast<double>(rows.size());
      backward_pass(m, f, grad_out, nullptr, *grads);
    }
  }
  total /= static_cast<double>(rows.size());
  total += l1_penalty(m);
  if (grads && m.config.l1_coeff > 0.0) {
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      for (std::size_t i = 0; i < m.weights[l].size(); ++i) {
        grads->dw[l][i] += m.config.l1_coeff * sign_of(m.weights[l][i]);
      }
    }
  }
  return total;
}

}  // namespace

std::vector<double> MlpModel::predict_row(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(config.layer_sizes.front())) {
    throw ValidationError("input row size does not match the network");
  }
  Forward f = forward_pass(*this, x, nullptr);
  return f.act.back();
}

std::vector<std::vector<double>> MlpModel::predict(
    const std::vector<std::vector<double>>& X) const {
  std::vector<std::vector<double>> out;
  out.reserve(X.size());
  for (const auto& row : X) out.push_back(predict_row(row));
  return out;
}

nlohmann::json MlpModel::to_json() const {
  nlohmann::json j;
  j["layer_sizes"] = config.layer_sizes;
  j["activation"] = config.activation == Activation::identity ? "identity"
                    : config.activation == Activation::relu  ? "relu"
                                                             : "tanh";
  j["weights"] = weights;
  j["biases"] = biases;
  return j;
}

MlpModel MlpModel::from_json(const nlohmann::json& j) {
  MlpModel m;
  m.config.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  const std::string act = j.at("activation").get<std::string>();
  m.config.activation = act == "identity" ? Activation::identity
                        : act == "relu"   ? Activation::relu
                                          : Activation::tanh_act;
  m.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  m.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  return m;
}

double mlp_loss(const MlpModel& model, const std::vector<std::vector<double>>& X,
                const std::vector<std::vector<double>>& Y, MlpLoss loss) {
  std::vector<std::size_t> rows(X.size());
  std::iota(rows.begin(), rows.end(), 0);
  return dataset_loss(model, X, Y, loss, rows, nullptr);
}

std::pair<MlpModel, TrainingCurve> mlp_fit(
    const std::vector<std::vector<double>>& X,
    const std::vector<std::vector<double>>& Y, const MlpConfig& config,
    MlpLoss loss, double validation_fraction) {
  config.validate(loss);
  const std::size_t n = X.size();
  if (n < 2) throw ValidationError("mlp_fit needs at least 2 samples");
  if (Y.size() != n) throw ValidationError("X and Y row counts differ");
  const auto in_dim = static_cast<std::size_t>(config.layer_sizes.front());
  const auto out_dim = static_cast<std::size_t>(config.layer_sizes.back());
  for (std::size_t i = 0; i < n; ++i) {
    if (X[i].size() != in_dim) throw ValidationError("ragged input rows");
    if (Y[i].size() != out_dim) {
      throw ValidationError("label arity does not match the loss (expected " +
                            std::to_string(out_dim) + " outputs)");
    }
  }
  if (!(validation_fraction > 0.0 && validation_fraction <= 0.5)) {
    throw ValidationError("validation_fraction must be in (0, 0.5]");
  }

  std::mt19937_64 rng(config.seed);

  std::size_t n_val = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (config.val_split == ValSplitKind::random) std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> train_rows(order.begin(),
                                      order.begin() + static_cast<long>(n - n_val));
  std::vector<std::size_t> val_rows(order.begin() + static_cast<long>(n - n_val),
                                    order.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(val_rows.begin(), val_rows.end());

  MlpModel model = init_model(config, rng);
  AdamState adam(model);
  Gradients grads(model);
  TrainingCurve curve;

  const auto& sizes = config.layer_sizes;
  std::vector<std::vector<double>> dropout_scale(sizes.size());
  for (std::size_t l = 1; l + 1 < sizes.size(); ++l) {
    dropout_scale[l].assign(static_cast<std::size_t>(sizes[l]), 1.0);
  }
  std::bernoulli_distribution keep(1.0 - config.dropout_frac);
  const bool use_dropout = config.dropout_frac > 0.0;
  std::vector<double> grad_out;
  std::vector<std::size_t> batch_order = train_rows;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(batch_order.begin(), batch_order.end(), rng);
    for (std::size_t start = 0; start < batch_order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(
          batch_order.size(), start + static_cast<std::size_t>(config.batch_size));
      const auto batch_n = static_cast<double>(stop - start);
      grads.zero();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t r = batch_order[k];
        if (use_dropout) {
          for (std::size_t l = 1; l + 1 < sizes.size(); ++l) {
            for (double& s : dropout_scale[l]) {
              s = keep(rng) ? 1.0 / (1.0 - config.dropout_frac) : 0.0;
            }
          }
        }
        const auto* scale = use_dropout ? &dropout_scale : nullptr;
        Forward f = forward_pass(model, X[r], scale);
        output_loss_grad(loss, config.custom_exponent, f.act.back(), Y[r], grad_out);
        for (double& g : grad_out) g /= batch_n;
        backward_pass(model, f, grad_out, scale, grads);
      }
      if (config.l1_coeff > 0.0) {
        for (std::size_t l = 0; l < model.weights.size(); ++l) {
          for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
            grads.dw[l][i] += config.l1_coeff * sign_of(model.weights[l][i]);
          }
        }
      }
      adam.step(model, grads);
    }
    const double tr = dataset_loss(model, X, Y, loss, train_rows, nullptr);
    const double va = dataset_loss(model, X, Y, loss, val_rows, nullptr);
    if (!std::isfinite(tr) || !std::isfinite(va)) {
      throw std::runtime_error("training diverged to a non-finite loss at epoch " +
                               std::to_string(epoch + 1));
    }
    curve.train_loss.push_back(tr);
    curve.val_loss.push_back(va);
  }
  return {std::move(model), std::move(curve)};
}

double gradient_check(const MlpConfig& config, MlpLoss loss,
                      const std::vector<std::vector<double>>& X,
                      const std::vector<std::vector<double>>& Y) {
  MlpConfig cfg = config;
  cfg.dropout_frac = 0.0;  // the check is defined for deterministic forward passes
  cfg.validate(loss);
  std::mt19937_64 rng(cfg.seed);
  return gradient_check(init_model(cfg, rng), loss, X, Y);
}

double gradient_check(MlpModel model, MlpLoss loss,
                      const std::vector<std::vector<double>>& X,
                      const std::vector<std::vector<double>>& Y) {
  model.config.dropout_frac = 0.0;
  const MlpConfig& cfg = model.config;
  if (X.empty() || X.size() > 10) {
    throw ValidationError("gradient_check expects 1..10 samples");
  }
  if (Y.size() != X.size()) throw ValidationError("X and Y row counts differ");

  std::vector<std::size_t> rows(X.size());
  std::iota(rows.begin(), rows.end(), 0);

  Gradients analytic(model);
  dataset_loss(model, X, Y, loss, rows, &analytic);

  // Branch/sign fingerprint of the custom loss; a parameter whose
  // perturbation changes it sits on a kink and is excluded.
  auto fingerprint = [&]() {
    std::vector<int> fp;
    if (loss != MlpLoss::custom) return fp;
    fp.reserve(rows.size() * 2);
    for (std::size_t r : rows) {
      const auto yhat = model.predict_row(X[r]);
      const int branch = yhat[1] < yhat[0] ? 1 : 0;
      const double delta = yhat[branch] - std::min(Y[r][0], Y[r][1]);
      fp.push_back(branch);
      fp.push_back(delta > 0.0 ? 1 : (delta < 0.0 ? -1 : 0));
    }
    return fp;
  };

  const double h = 1e-5;
  double max_rel = 0.0;
  auto check_param = [&](double& p, double analytic_grad) {
    if (cfg.l1_coeff > 0.0 && std::abs(p) < 1e-8) return;  // |w| kink
    const double saved = p;
    p = saved + h;
    const auto fp_plus = fingerprint();
    const double lp = dataset_loss(model, X, Y, loss, rows, nullptr);
    p = saved - h;
    const auto fp_minus = fingerprint();
    const double lm = dataset_loss(model, X, Y, loss, rows, nullptr);
    p = saved;
    if (fp_plus != fp_minus) return;  // crossed a min-kink
    const double numeric = (lp - lm) / (2.0 * h);
    const double denom = std::max(std::abs(analytic_grad), std::abs(numeric));
    if (denom < 1e-7) return;
    max_rel = std::max(max_rel, std::abs(analytic_grad - numeric) / denom);
  };
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
      check_param(model.weights[l][i], analytic.dw[l][i]);
    }
    for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
      check_param(model.biases[l][i], analytic.db[l][i]);
    }
  }
  return max_rel;
}

int overfit_report(const TrainingCurve& curve) {
  if (curve.val_loss.empty()) {
    throw ValidationError("overfit_report needs a non-empty training curve");
  }
  std::size_t best = 0;
  for (std::size_t e = 1; e < curve.val_loss.size(); ++e) {
    if (curve.val_loss[e] < curve.val_loss[best]) best = e;
  }
  return static_cast<int>(best) + 1;
}

}  // namespace bidsel
