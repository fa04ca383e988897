#include "doppel/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "doppel/errors.hpp"

namespace doppel {

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
    case Activation::relu: return "relu";
  }
  return "?";
}

std::string_view to_string(LossKind l) noexcept {
  switch (l) {
    case LossKind::mse: return "mse";
    case LossKind::binary_ce: return "binary_ce";
    case LossKind::categorical_ce: return "categorical_ce";
    case LossKind::categorical_hinge: return "categorical_hinge";
  }
  return "?";
}

std::string_view to_string(OptimizerKind o) noexcept {
  return o == OptimizerKind::adam ? "adam" : "nadam";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::identity;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "softmax") return Activation::softmax;
  if (name == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

LossKind parse_loss(std::string_view name) {
  if (name == "mse") return LossKind::mse;
  if (name == "binary_ce") return LossKind::binary_ce;
  if (name == "categorical_ce") return LossKind::categorical_ce;
  if (name == "categorical_hinge") return LossKind::categorical_hinge;
  throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "nadam") return OptimizerKind::nadam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void softmax_row(std::span<double> row) {
  const double mx = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : row) v /= sum;
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

double clip_probability(double p) {
  return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
}

bool inside_clip(double p) { return p > kProbabilityClip && p < 1.0 - kProbabilityClip; }

}  // namespace

Matrix apply_activation(const Matrix& z, Activation act) {
  Matrix out = z;
  switch (act) {
    case Activation::identity:
      break;
    case Activation::sigmoid:
      for (double& v : out.values()) v = sigmoid(v);
      break;
    case Activation::relu:
      for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::softmax:
      if (out.cols() == 0) throw DimensionError("softmax over zero columns");
      for (std::size_t r = 0; r < out.rows(); ++r) softmax_row(out.row_span(r));
      break;
  }
  return out;
}

Matrix activation_backward(Activation act, const Matrix& out, const Matrix& grad_out) {
  check_same_shape(out, grad_out, "activation_backward");
  Matrix g = grad_out;
  switch (act) {
    case Activation::identity:
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = out.values()[i];
        g.values()[i] *= s * (1.0 - s);
      }
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < g.size(); ++i)
        if (out.values()[i] <= 0.0) g.values()[i] = 0.0;
      break;
    case Activation::softmax:
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const auto p = out.row_span(r);
        auto gr = g.row_span(r);
        double dot = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) dot += p[k] * gr[k];
        for (std::size_t k = 0; k < p.size(); ++k) gr[k] = p[k] * (gr[k] - dot);
      }
      break;
  }
  return g;
}

Matrix dense_forward(const Matrix& weights, std::span<const double> bias, const Matrix& x,
                     Activation act) {
  if (x.cols() != weights.cols()) {
    throw DimensionError("dense_forward: input has " + std::to_string(x.cols()) +
                         " columns, weights expect " + std::to_string(weights.cols()));
  }
  if (bias.size() != weights.rows()) {
    throw DimensionError("dense_forward: bias length " + std::to_string(bias.size()) +
                         " does not match " + std::to_string(weights.rows()) + " outputs");
  }
  Matrix z = matmul_transposed(x, weights);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row_span(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
  }
  return apply_activation(z, act);
}

double loss_eval(LossKind kind, const Matrix& y_true, const Matrix& y_pred) {
  check_same_shape(y_true, y_pred, "loss_eval");
  const std::size_t n = y_true.rows();
  if (n == 0) throw DimensionError("loss_eval: empty batch");
  double total = 0.0;
  switch (kind) {
    case LossKind::mse:
      for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double d = y_pred.values()[i] - y_true.values()[i];
        total += d * d;
      }
      return total / static_cast<double>(y_true.size());
    case LossKind::binary_ce:
      for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double p = clip_probability(y_pred.values()[i]);
        const double t = y_true.values()[i];
        total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
      }
      return std::max(0.0, total / static_cast<double>(y_true.size()));
    case LossKind::categorical_ce:
      for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double t = y_true.values()[i];
        if (t != 0.0) total -= t * std::log(clip_probability(y_pred.values()[i]));
      }
      return std::max(0.0, total / static_cast<double>(n));
    case LossKind::categorical_hinge:
      for (std::size_t r = 0; r < n; ++r) {
        const auto t = y_true.row_span(r);
        const auto s = y_pred.row_span(r);
        double pos = 0.0;
        double neg = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < t.size(); ++k) {
          pos += t[k] * s[k];
          neg = std::max(neg, (1.0 - t[k]) * s[k]);
        }
        total += std::max(0.0, neg - pos + 1.0);
      }
      return total / static_cast<double>(n);
  }
  throw ConfigError("loss_eval: unknown loss kind");
}

Matrix loss_gradient(LossKind kind, const Matrix& y_true, const Matrix& y_pred) {
  check_same_shape(y_true, y_pred, "loss_gradient");
  const std::size_t n = y_true.rows();
  if (n == 0) throw DimensionError("loss_gradient: empty batch");
  Matrix g(y_true.rows(), y_true.cols());
  switch (kind) {
    case LossKind::mse: {
      const double scale = 2.0 / static_cast<double>(y_true.size());
      for (std::size_t i = 0; i < g.size(); ++i)
        g.values()[i] = scale * (y_pred.values()[i] - y_true.values()[i]);
      return g;
    }
    case LossKind::binary_ce: {
      const double scale = 1.0 / static_cast<double>(y_true.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double p = y_pred.values()[i];
        const double t = y_true.values()[i];
        g.values()[i] = inside_clip(p) ? scale * (-t / p + (1.0 - t) / (1.0 - p)) : 0.0;
      }
      return g;
    }
    case LossKind::categorical_ce: {
      const double scale = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double p = y_pred.values()[i];
        const double t = y_true.values()[i];
        g.values()[i] = (t != 0.0 && inside_clip(p)) ? -scale * t / p : 0.0;
      }
      return g;
    }
    case LossKind::categorical_hinge: {
      const double scale = 1.0 / static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r) {
        const auto t = y_true.row_span(r);
        const auto s = y_pred.row_span(r);
        double pos = 0.0;
        double neg = -std::numeric_limits<double>::infinity();
        std::size_t neg_at = 0;
        for (std::size_t k = 0; k < t.size(); ++k) {
          pos += t[k] * s[k];
          const double v = (1.0 - t[k]) * s[k];
          if (v > neg) {
            neg = v;
            neg_at = k;
          }
        }
        if (neg - pos + 1.0 <= 0.0) continue;
        auto gr = g.row_span(r);
        for (std::size_t k = 0; k < t.size(); ++k) gr[k] -= scale * t[k];
        gr[neg_at] += scale * (1.0 - t[neg_at]);
      }
      return g;
    }
  }
  throw ConfigError("loss_gradient: unknown loss kind");
}

OptimizerState make_optimizer(OptimizerKind kind, double learning_rate,
                              std::span<const ParamBlock> params, double beta1, double beta2,
                              double epsilon) {
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("optimizer betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("optimizer epsilon must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be a positive finite number");
  }
  OptimizerState s;
  s.kind = kind;
  s.learning_rate = learning_rate;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.value.size(), 0.0);
    s.second_moment.emplace_back(p.value.size(), 0.0);
  }
  return s;
}

void optimizer_step(OptimizerState& state, std::span<ParamBlock> params,
                    std::span<const Matrix> grads) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw DimensionError("optimizer_step: expected " + std::to_string(params.size()) +
                         " gradient blocks, got " + std::to_string(grads.size()));
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (grads[b].rows() != params[b].value.rows() || grads[b].cols() != params[b].value.cols()) {
      throw DimensionError("optimizer_step: gradient for '" + params[b].name +
                           "' is not shaped like the parameter");
    }
    if (!grads[b].all_finite()) {
      throw NumericError("non-finite gradient in parameter block '" + params[b].name + "'");
    }
  }

  const std::size_t t = ++state.step_count;
  const double b1t = std::pow(state.beta1, static_cast<double>(t));
  const double b1t_next = b1t * state.beta1;
  const double b2t = std::pow(state.beta2, static_cast<double>(t));

  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b].value.values();
    const auto g = grads[b].values();
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double v_hat = v[i] / (1.0 - b2t);
      double m_hat = 0.0;
      if (state.kind == OptimizerKind::adam) {
        m_hat = m[i] / (1.0 - b1t);
      } else {
        m_hat = state.beta1 * m[i] / (1.0 - b1t_next) + (1.0 - state.beta1) * g[i] / (1.0 - b1t);
      }
      p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

Matrix glorot_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw ConfigError("glorot_init: fan_in and fan_out must be >= 1");
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_out, fan_in);
  for (double& v : w.values()) v = rng.uniform(-limit, limit);
  return w;
}

}  // namespace doppel
