#include "adact/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "adact/training.hpp"

namespace adact {

std::vector<ActivationKind> all_activation_kinds() {
  return {ActivationKind::sigmoid(), ActivationKind::tanh(),     ActivationKind::relu(),
          ActivationKind::lrelu(),   ActivationKind::swish(),    ActivationKind::prelu(),
          ActivationKind::asigmoid(), ActivationKind::atanh(),   ActivationKind::arelu()};
}

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

AdaptiveParams<double> random_params(const ActivationKind& kind, Rng& rng) {
  AdaptiveParams<double> p;
  p.a = uniform(rng, 0.5, 1.5);
  p.b = kind.tag == ActivationKind::Tag::AReLU ? uniform(rng, -0.5, 0.5) : uniform(rng, 0.5, 1.5);
  p.c = uniform(rng, -0.3, 0.3);
  p.d = uniform(rng, -0.3, 0.3);
  return p;
}

/// Scalar evaluation of a kind at one point with a flat parameter vector
/// (4 entries for adaptive kinds, 1 for PReLU, none otherwise).
double eval_point(const ActivationKind& kind, const std::vector<double>& theta, double z) {
  TensorXd t({1});
  t[0] = z;
  if (kind.is_adaptive()) return adaptive_forward(kind, AdaptiveParams<double>{theta[0], theta[1], theta[2], theta[3]}, t)[0];
  if (kind.tag == ActivationKind::Tag::PReLU) return prelu_forward(theta[0], t)[0];
  return fixed_forward(kind, t)[0];
}

double kink_distance(const ActivationKind& kind, const std::vector<double>& theta, double z) {
  using Tag = ActivationKind::Tag;
  switch (kind.tag) {
    case Tag::ReLU:
    case Tag::LReLU: return std::abs(z);
    case Tag::PReLU: return std::abs((theta[0] - 1.0) * z);
    case Tag::AReLU: return std::abs((theta[0] - theta[1]) * z + theta[2] - theta[3]);
    default: return INFINITY;
  }
}

}  // namespace

std::vector<GradcheckLine> gradcheck_activations(const GradcheckOptions& opts) {
  std::vector<GradcheckLine> out;
  Rng rng(opts.seed);
  for (const auto& kind : all_activation_kinds()) {
    GradcheckLine line{"activation-core", kind.name(), 0.0, 0, 0};
    while (line.samples < opts.points_per_kind) {
      std::vector<double> theta;
      if (kind.is_adaptive()) {
        const auto p = random_params(kind, rng);
        theta = {p.a, p.b, p.c, p.d};
      } else if (kind.tag == ActivationKind::Tag::PReLU) {
        theta = {uniform(rng, 0.05, 0.6)};
      }
      const double z = uniform(rng, -4.0, 4.0);
      if (kink_distance(kind, theta, z) <= opts.kink_margin) continue;

      // analytic
      TensorXd zt({1}), up({1});
      zt[0] = z;
      up[0] = 1.0;
      std::vector<double> analytic;
      if (kind.is_adaptive()) {
        const auto r = adaptive_backward(kind, AdaptiveParams<double>{theta[0], theta[1], theta[2], theta[3]}, zt, up);
        analytic = {r.dz[0], r.dp.a, r.dp.b, r.dp.c, r.dp.d};
      } else if (kind.tag == ActivationKind::Tag::PReLU) {
        const auto r = prelu_backward(theta[0], zt, up);
        analytic = {r.dz[0], r.dslope};
      } else {
        analytic = {fixed_grad(kind, zt)[0]};
      }

      // numeric over (z, theta...)
      std::vector<double> point{z};
      point.insert(point.end(), theta.begin(), theta.end());
      const auto numeric = finite_diff_grad(
          [&](std::span<const double> x) {
            return eval_point(kind, std::vector<double>(x.begin() + 1, x.end()), x[0]);
          },
          point, opts.h);
      for (std::size_t i = 0; i < numeric.size(); ++i)
        line.max_relative_error = std::max(line.max_relative_error, relative_error(analytic[i], numeric[i]));
      line.coordinates += static_cast<Index>(numeric.size());
      ++line.samples;
    }
    out.push_back(line);
  }
  return out;
}

std::vector<GradcheckLine> gradcheck_loss(const GradcheckOptions& opts) {
  Rng rng(opts.seed + 17);
  GradcheckLine line{"training-harness", "cross-entropy", 0.0, 0, 0};
  for (Index s = 0; s < opts.points_per_kind; ++s) {
    const Index classes = 2 + static_cast<Index>(rng.below(9));
    const TensorXd logits = rand_uniform(rng, {classes}, -5.0, 5.0);
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    const auto analytic = cross_entropy(logits, label);
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> x) {
          TensorXd t({classes});
          std::copy(x.begin(), x.end(), t.data());
          return cross_entropy(t, label).loss;
        },
        std::span(logits.data(), static_cast<std::size_t>(classes)), opts.h);
    for (Index j = 0; j < classes; ++j)
      line.max_relative_error =
          std::max(line.max_relative_error, relative_error(analytic.d_logits[j], numeric[static_cast<std::size_t>(j)]));
    line.coordinates += classes;
    ++line.samples;
  }
  return {line};
}

ModelSpec gradcheck_spec(const std::string& preset, ActivationKind kind, Index classes) {
  PresetOptions small;
  small.hidden = 6;
  small.channels = {3, 4, 5};
  const Shape input = preset == "mlp-2" ? Shape{3, 2, 2} : Shape{3, 8, 8};
  return make_preset(preset, input, classes, kind, small);
}

void randomise_for_gradcheck(Model& model, Rng& rng) {
  for (auto& p : model.parameters()) {
    if (p.role == ParamRef::Role::Bias) *p.value = rand_uniform(rng, p.value->shape(), -0.1, 0.1);
  }
  for (auto* site : model.activation_sites()) {
    if (site->kind().is_adaptive())
      site->set_adaptive_params(random_params(site->kind(), rng));
    else if (site->kind().tag == ActivationKind::Tag::PReLU)
      site->set_prelu_slope(uniform(rng, 0.05, 0.6));
  }
}

std::vector<GradcheckLine> gradcheck_networks(const GradcheckOptions& opts) {
  const auto kinds = all_activation_kinds();
  const auto& presets = preset_names();
  std::vector<GradcheckLine> out;
  for (const auto& preset : presets)
    for (const auto& kind : kinds) out.push_back({"network", preset + "/" + kind.name(), 0.0, 0, 0});

  Rng rng(opts.seed + 101);
  const Index combos = static_cast<Index>(out.size());
  for (Index c = 0; c < opts.network_configs; ++c) {
    auto& line = out[static_cast<std::size_t>(c % combos)];
    const auto& preset = presets[static_cast<std::size_t>((c % combos) / static_cast<Index>(kinds.size()))];
    const auto& kind = kinds[static_cast<std::size_t>((c % combos) % static_cast<Index>(kinds.size()))];
    const auto spec = gradcheck_spec(preset, kind);

    // redraw until no probe crosses a kink
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) throw NumericError("gradcheck: no kink-free draw for " + line.subject);
      Model model = init(spec, rng);
      randomise_for_gradcheck(model, rng);
      Shape batch_shape{2};
      batch_shape.insert(batch_shape.end(), spec.input_shape.begin(), spec.input_shape.end());
      const TensorXd batch = rand_uniform(rng, batch_shape, 0.0, 1.0);
      const std::vector<int> labels{static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3))};
      const auto r = gradient_check(model, batch, labels, opts.h);
      if (r.kink_crossings > 0) continue;
      line.max_relative_error = std::max(line.max_relative_error, r.max_relative_error);
      line.coordinates += r.coordinates;
      ++line.samples;
      break;
    }
  }
  return out;
}

}  // namespace adact
