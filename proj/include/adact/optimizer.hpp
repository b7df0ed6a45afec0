#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adact/errors.hpp"
#include "adact/tensor.hpp"

namespace adact {

struct ScheduleStage {
  Index epochs = 0;
  double rate = 0.0;

  friend bool operator==(const ScheduleStage&, const ScheduleStage&) = default;
};

struct OptimizerConfig {
  enum class Kind { SGD, Momentum, AdaGrad, AdaDelta, Adam };

  Kind kind = Kind::SGD;
  std::vector<ScheduleStage> schedule;
  double momentum = 0.9;
  double epsilon = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.95;

  Index total_epochs() const {
    Index n = 0;
    for (const auto& s : schedule) n += s.epochs;
    return n;
  }

  void validate() const {
    for (const auto& s : schedule) {
      if (!(s.rate > 0.0)) throw ScheduleError("schedule: every rate must be > 0");
      if (s.epochs < 0) throw ScheduleError("schedule: negative stage length");
    }
  }

  static std::string kind_name(Kind k) {
    switch (k) {
      case Kind::SGD: return "sgd";
      case Kind::Momentum: return "momentum";
      case Kind::AdaGrad: return "adagrad";
      case Kind::AdaDelta: return "adadelta";
      case Kind::Adam: return "adam";
    }
    return "?";
  }

  static std::optional<Kind> parse_kind(std::string_view name) {
    if (name == "sgd") return Kind::SGD;
    if (name == "momentum") return Kind::Momentum;
    if (name == "adagrad") return Kind::AdaGrad;
    if (name == "adadelta") return Kind::AdaDelta;
    if (name == "adam") return Kind::Adam;
    return std::nullopt;
  }
};

inline const std::vector<double>& default_stage_rates() {
  static const std::vector<double> rates{1e-3, 1e-4, 1e-5};
  return rates;
}

/// Splits `total_epochs` into equal consecutive stages, one per rate; the
/// remainder goes to the earliest stages (10 epochs -> 4, 3, 3).
inline std::vector<ScheduleStage> equal_stages(Index total_epochs,
                                               const std::vector<double>& rates = default_stage_rates()) {
  if (total_epochs < 0) throw ScheduleError("schedule: negative epoch count");
  if (rates.empty()) throw ScheduleError("schedule: no rates");
  const auto n = static_cast<Index>(rates.size());
  std::vector<ScheduleStage> stages;
  for (Index i = 0; i < n; ++i)
    stages.push_back({total_epochs / n + (i < total_epochs % n ? 1 : 0), rates[static_cast<std::size_t>(i)]});
  return stages;
}

/// Piecewise-constant learning rate for a zero-based epoch.
inline double lr_at_epoch(const OptimizerConfig& cfg, Index epoch) {
  if (epoch < 0) throw ScheduleError("lr_at_epoch: negative epoch");
  Index end = 0;
  for (const auto& stage : cfg.schedule) {
    end += stage.epochs;
    if (epoch < end) return stage.rate;
  }
  throw ScheduleError("lr_at_epoch: epoch " + std::to_string(epoch) + " outside a " + std::to_string(end) +
                      "-epoch schedule");
}

/// Auxiliary buffers for one optimizer, one entry per parameter tensor.
/// `first` holds velocity / accumulated g^2 / E[g^2] / first moment;
/// `second` holds E[dx^2] (AdaDelta) or the second moment (Adam).
template <typename Scalar = double>
struct OptimizerState {
  struct Buffers {
    Tensor<Scalar> first;
    Tensor<Scalar> second;
  };

  std::vector<Buffers> buffers;
  Index t = 0;

  /// Buffer shapes mirror the parameter shapes exactly.
  bool congruent_with(std::span<Tensor<Scalar>* const> params) const {
    if (buffers.size() != params.size()) return false;
    for (std::size_t i = 0; i < params.size(); ++i)
      if (buffers[i].first.shape() != params[i]->shape() || buffers[i].second.shape() != params[i]->shape())
        return false;
    return true;
  }
};

/// One update of every parameter from its gradient. The same rule applies to
/// weights, biases and activation parameters alike.
template <typename Scalar>
void step(const OptimizerConfig& cfg, OptimizerState<Scalar>& state, std::span<Tensor<Scalar>* const> params,
          std::span<const Tensor<Scalar>* const> grads, Index epoch) {
  using Kind = OptimizerConfig::Kind;
  if (params.size() != grads.size())
    throw DimensionError("optimizer step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->shape() != grads[i]->shape())
      throw DimensionError("optimizer step: parameter " + std::to_string(i) + " has shape " +
                           shape_string(params[i]->shape()) + " but gradient " + shape_string(grads[i]->shape()));

  // AdaDelta is rate-free; the schedule still bounds the run.
  const auto eta = static_cast<Scalar>(lr_at_epoch(cfg, epoch));

  if (state.buffers.empty() && !params.empty()) {
    for (auto* p : params) state.buffers.push_back({Tensor<Scalar>(p->shape()), Tensor<Scalar>(p->shape())});
  }
  if (!state.congruent_with(params)) throw DimensionError("optimizer step: state does not match parameters");
  ++state.t;

  const auto mu = static_cast<Scalar>(cfg.momentum);
  const auto eps = static_cast<Scalar>(cfg.epsilon);
  const auto beta1 = static_cast<Scalar>(cfg.beta1);
  const auto beta2 = static_cast<Scalar>(cfg.beta2);
  const auto rho = static_cast<Scalar>(cfg.rho);
  const Scalar bias1 = Scalar(1) - std::pow(beta1, static_cast<Scalar>(state.t));
  const Scalar bias2 = Scalar(1) - std::pow(beta2, static_cast<Scalar>(state.t));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<Scalar>& w = *params[i];
    const Tensor<Scalar>& g = *grads[i];
    auto& buf = state.buffers[i];
    for (Index j = 0; j < w.size(); ++j) {
      const Scalar gj = g[j];
      switch (cfg.kind) {
        case Kind::SGD:
          w[j] -= eta * gj;
          break;
        case Kind::Momentum:
          buf.first[j] = mu * buf.first[j] + gj;
          w[j] -= eta * buf.first[j];
          break;
        case Kind::AdaGrad:
          buf.first[j] += gj * gj;
          w[j] -= eta * gj / (std::sqrt(buf.first[j]) + eps);
          break;
        case Kind::AdaDelta: {
          buf.first[j] = rho * buf.first[j] + (Scalar(1) - rho) * gj * gj;
          const Scalar dx = -std::sqrt(buf.second[j] + eps) / std::sqrt(buf.first[j] + eps) * gj;
          buf.second[j] = rho * buf.second[j] + (Scalar(1) - rho) * dx * dx;
          w[j] += dx;
          break;
        }
        case Kind::Adam: {
          buf.first[j] = beta1 * buf.first[j] + (Scalar(1) - beta1) * gj;
          buf.second[j] = beta2 * buf.second[j] + (Scalar(1) - beta2) * gj * gj;
          const Scalar m_hat = buf.first[j] / bias1;
          const Scalar v_hat = buf.second[j] / bias2;
          w[j] -= eta * m_hat / (std::sqrt(v_hat) + eps);
          break;
        }
      }
    }
    w.require_finite("optimizer step (parameter " + std::to_string(i) + ")");
  }
}

}  // namespace adact
