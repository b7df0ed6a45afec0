#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "adact/errors.hpp"
#include "adact/tensor.hpp"

namespace adact {

/// Tagged activation choice. `param` carries the LReLU negative slope or the
/// Swish beta; it is ignored by every other tag.
struct ActivationKind {
  enum class Tag { Sigmoid, Tanh, ReLU, LReLU, Swish, PReLU, ASigmoid, ATanh, AReLU };

  Tag tag = Tag::ReLU;
  double param = 0.0;

  static ActivationKind sigmoid() { return {Tag::Sigmoid, 0.0}; }
  static ActivationKind tanh() { return {Tag::Tanh, 0.0}; }
  static ActivationKind relu() { return {Tag::ReLU, 0.0}; }
  static ActivationKind lrelu(double slope = 0.01) {
    if (!(slope > 0.0)) throw ArgumentError("lrelu: slope must be > 0");
    return {Tag::LReLU, slope};
  }
  static ActivationKind swish(double beta = 1.0) {
    if (!(beta > 0.0)) throw ArgumentError("swish: beta must be > 0");
    return {Tag::Swish, beta};
  }
  static ActivationKind prelu() { return {Tag::PReLU, 0.0}; }
  static ActivationKind asigmoid() { return {Tag::ASigmoid, 0.0}; }
  static ActivationKind atanh() { return {Tag::ATanh, 0.0}; }
  static ActivationKind arelu() { return {Tag::AReLU, 0.0}; }

  bool is_adaptive() const { return tag == Tag::ASigmoid || tag == Tag::ATanh || tag == Tag::AReLU; }
  bool is_fixed() const { return !is_adaptive() && tag != Tag::PReLU; }
  bool is_smooth_adaptive() const { return tag == Tag::ASigmoid || tag == Tag::ATanh; }
  /// True for kinds with a non-differentiable point.
  bool has_kink() const {
    return tag == Tag::ReLU || tag == Tag::LReLU || tag == Tag::PReLU || tag == Tag::AReLU;
  }

  /// Number of learnable scalars a layer of this kind carries.
  int learnable_count() const { return is_adaptive() ? 4 : (tag == Tag::PReLU ? 1 : 0); }

  std::string name() const {
    switch (tag) {
      case Tag::Sigmoid: return "sigmoid";
      case Tag::Tanh: return "tanh";
      case Tag::ReLU: return "relu";
      case Tag::LReLU: return "lrelu";
      case Tag::Swish: return "swish";
      case Tag::PReLU: return "prelu";
      case Tag::ASigmoid: return "asigmoid";
      case Tag::ATanh: return "atanh";
      case Tag::AReLU: return "arelu";
    }
    return "?";
  }

  /// Parses a lower-case name; LReLU/Swish get their default parameter.
  static std::optional<ActivationKind> parse(std::string_view name) {
    if (name == "sigmoid") return sigmoid();
    if (name == "tanh") return tanh();
    if (name == "relu") return relu();
    if (name == "lrelu") return lrelu();
    if (name == "swish") return swish();
    if (name == "prelu") return prelu();
    if (name == "asigmoid") return asigmoid();
    if (name == "atanh") return atanh();
    if (name == "arelu") return arelu();
    return std::nullopt;
  }

  friend bool operator==(const ActivationKind&, const ActivationKind&) = default;
};

/// The per-layer quadruple of the adaptive form b * f(a * z + c) + d.
/// The same type holds parameter gradients.
template <typename Scalar = double>
struct AdaptiveParams {
  Scalar a = 1;
  Scalar b = 1;
  Scalar c = 0;
  Scalar d = 0;

  /// Every adaptive model starts exactly at its fixed baseline.
  static AdaptiveParams initial(const ActivationKind& kind) {
    if (kind.tag == ActivationKind::Tag::AReLU) return {1, 0, 0, 0};
    return {1, 1, 0, 0};
  }

  bool finite() const {
    return std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(d);
  }

  friend bool operator==(const AdaptiveParams&, const AdaptiveParams&) = default;
};

inline constexpr double kPReLUInitialSlope = 0.25;

namespace scalar {

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  // exp(-|x|) never overflows
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Scalar sigmoid_grad(Scalar x) {
  const Scalar s = sigmoid(x);
  return s * (Scalar(1) - s);
}

template <typename Scalar>
Scalar tanh_grad(Scalar x) {
  const Scalar t = std::tanh(x);
  return Scalar(1) - t * t;
}

/// Base function f of a smooth adaptive kind.
template <typename Scalar>
Scalar smooth_base(ActivationKind::Tag tag, Scalar u) {
  return tag == ActivationKind::Tag::ASigmoid ? sigmoid(u) : std::tanh(u);
}

template <typename Scalar>
Scalar smooth_base_grad(ActivationKind::Tag tag, Scalar u) {
  return tag == ActivationKind::Tag::ASigmoid ? sigmoid_grad(u) : tanh_grad(u);
}

/// Which line of max(a*z + c, b*z + d) carries the gradient. On a tie the
/// line that is larger just left of the crossing wins (the smaller z-slope),
/// which makes the ReLU and PReLU special cases reproduce the negative-side
/// subgradient convention of their fixed counterparts.
template <typename Scalar>
bool first_branch_active(Scalar first, Scalar second, Scalar slope_first, Scalar slope_second) {
  if (first != second) return first > second;
  return slope_first <= slope_second;
}

}  // namespace scalar

/// Elementwise value of a fixed activation.
template <typename Scalar>
Tensor<Scalar> fixed_forward(const ActivationKind& kind, const Tensor<Scalar>& x) {
  using Tag = ActivationKind::Tag;
  if (!kind.is_fixed()) throw ContractError("fixed_forward: " + kind.name() + " is not a fixed activation");
  const auto slope = static_cast<Scalar>(kind.param);
  switch (kind.tag) {
    case Tag::Sigmoid: return map(x, [](Scalar v) { return scalar::sigmoid(v); });
    case Tag::Tanh: return map(x, [](Scalar v) { return std::tanh(v); });
    case Tag::ReLU: return map(x, [](Scalar v) { return v > 0 ? v : Scalar(0); });
    case Tag::LReLU: return map(x, [slope](Scalar v) { return v > 0 ? v : slope * v; });
    case Tag::Swish: return map(x, [slope](Scalar v) { return v * scalar::sigmoid(slope * v); });
    default: break;
  }
  throw ContractError("fixed_forward: unhandled kind");
}

/// Elementwise derivative of a fixed activation. At the ReLU/LReLU kink the
/// negative-side slope is returned.
template <typename Scalar>
Tensor<Scalar> fixed_grad(const ActivationKind& kind, const Tensor<Scalar>& x) {
  using Tag = ActivationKind::Tag;
  if (!kind.is_fixed()) throw ContractError("fixed_grad: " + kind.name() + " is not a fixed activation");
  const auto slope = static_cast<Scalar>(kind.param);
  switch (kind.tag) {
    case Tag::Sigmoid: return map(x, [](Scalar v) { return scalar::sigmoid_grad(v); });
    case Tag::Tanh: return map(x, [](Scalar v) { return scalar::tanh_grad(v); });
    case Tag::ReLU: return map(x, [](Scalar v) { return v > 0 ? Scalar(1) : Scalar(0); });
    case Tag::LReLU: return map(x, [slope](Scalar v) { return v > 0 ? Scalar(1) : slope; });
    case Tag::Swish:
      return map(x, [slope](Scalar v) {
        const Scalar s = scalar::sigmoid(slope * v);
        return s + slope * v * s * (Scalar(1) - s);
      });
    default: break;
  }
  throw ContractError("fixed_grad: unhandled kind");
}

/// b * f(a*z + c) + d for ASigmoid/ATanh; max(a*z + c, b*z + d) for AReLU.
template <typename Scalar>
Tensor<Scalar> adaptive_forward(const ActivationKind& kind, const AdaptiveParams<Scalar>& p,
                                const Tensor<Scalar>& z) {
  if (!kind.is_adaptive())
    throw ContractError("adaptive_forward: " + kind.name() + " is not an adaptive activation");
  if (!p.finite()) throw NumericError("adaptive_forward: non-finite parameters");
  if (kind.tag == ActivationKind::Tag::AReLU) {
    return map(z, [&p](Scalar v) {
      const Scalar first = p.a * v + p.c;
      const Scalar second = p.b * v + p.d;
      return scalar::first_branch_active(first, second, p.a, p.b) ? first : second;
    });
  }
  const auto tag = kind.tag;
  return map(z, [&p, tag](Scalar v) { return p.b * scalar::smooth_base(tag, p.a * v + p.c) + p.d; });
}

template <typename Scalar>
struct AdaptiveBackward {
  Tensor<Scalar> dz;
  AdaptiveParams<Scalar> dp;
};

/// Gradients of an adaptive activation. Parameter gradients are summed over
/// every element of `z` in ascending index order; for AReLU only the active
/// line of each element contributes.
template <typename Scalar>
AdaptiveBackward<Scalar> adaptive_backward(const ActivationKind& kind, const AdaptiveParams<Scalar>& p,
                                           const Tensor<Scalar>& z, const Tensor<Scalar>& upstream) {
  if (!kind.is_adaptive())
    throw ContractError("adaptive_backward: " + kind.name() + " is not an adaptive activation");
  if (z.shape() != upstream.shape())
    throw DimensionError("adaptive_backward: z " + shape_string(z.shape()) + " vs upstream " +
                         shape_string(upstream.shape()));
  AdaptiveBackward<Scalar> out{Tensor<Scalar>(z.shape()), {0, 0, 0, 0}};
  auto& dp = out.dp;
  if (kind.tag == ActivationKind::Tag::AReLU) {
    for (Index i = 0; i < z.size(); ++i) {
      const Scalar v = z[i], g = upstream[i];
      const Scalar first = p.a * v + p.c;
      const Scalar second = p.b * v + p.d;
      if (scalar::first_branch_active(first, second, p.a, p.b)) {
        out.dz[i] = g * p.a;
        dp.a += g * v;
        dp.c += g;
      } else {
        out.dz[i] = g * p.b;
        dp.b += g * v;
        dp.d += g;
      }
    }
  } else {
    for (Index i = 0; i < z.size(); ++i) {
      const Scalar v = z[i], g = upstream[i];
      const Scalar u = p.a * v + p.c;
      const Scalar inner = g * p.b * scalar::smooth_base_grad(kind.tag, u);
      out.dz[i] = inner * p.a;
      dp.a += inner * v;
      dp.b += g * scalar::smooth_base(kind.tag, u);
      dp.c += inner;
      dp.d += g;
    }
  }
  out.dz.require_finite("adaptive_backward");
  if (!dp.finite()) throw NumericError("adaptive_backward: non-finite parameter gradient");
  return out;
}

/// PReLU in the max(s*z, z) form with a learnable slope s.
template <typename Scalar>
Tensor<Scalar> prelu_forward(Scalar slope, const Tensor<Scalar>& z) {
  return map(z, [slope](Scalar v) {
    const Scalar first = slope * v;
    return scalar::first_branch_active(first, v, slope, Scalar(1)) ? first : v;
  });
}

template <typename Scalar>
struct PReLUBackward {
  Tensor<Scalar> dz;
  Scalar dslope = 0;
};

template <typename Scalar>
PReLUBackward<Scalar> prelu_backward(Scalar slope, const Tensor<Scalar>& z, const Tensor<Scalar>& upstream) {
  if (z.shape() != upstream.shape())
    throw DimensionError("prelu_backward: z " + shape_string(z.shape()) + " vs upstream " +
                         shape_string(upstream.shape()));
  PReLUBackward<Scalar> out{Tensor<Scalar>(z.shape()), 0};
  for (Index i = 0; i < z.size(); ++i) {
    const Scalar v = z[i], g = upstream[i];
    if (scalar::first_branch_active(slope * v, v, slope, Scalar(1))) {
      out.dz[i] = g * slope;
      out.dslope += g * v;
    } else {
      out.dz[i] = g;
    }
  }
  out.dz.require_finite("prelu_backward");
  return out;
}

struct SpecialCase {
  enum class Kind { ReLU, PReLU, General };
  Kind kind = Kind::General;
  double slope = 0.0;  // PReLU only

  friend bool operator==(const SpecialCase&, const SpecialCase&) = default;
};

/// Recognises the exact parameter settings under which AReLU reduces to a
/// fixed ReLU or to PReLU. Exact comparisons: this is a diagnostic.
template <typename Scalar>
SpecialCase classify_special_case(const AdaptiveParams<Scalar>& p) {
  if (p.a == 1 && p.b == 0 && p.c == 0 && p.d == 0) return {SpecialCase::Kind::ReLU, 0.0};
  if (p.b == 1 && p.c == 0 && p.d == 0) return {SpecialCase::Kind::PReLU, static_cast<double>(p.a)};
  return {SpecialCase::Kind::General, 0.0};
}

}  // namespace adact
