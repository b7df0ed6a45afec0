#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adact/activation.hpp"
#include "adact/network.hpp"

namespace adact {

/// One row of a finite-difference report: the worst relative error seen for
/// one (module, subject) pair over `samples` seeded random draws.
struct GradcheckLine {
  std::string module;
  std::string subject;
  double max_relative_error = 0.0;
  Index samples = 0;
  Index coordinates = 0;
};

struct GradcheckOptions {
  std::uint64_t seed = 1;
  Index points_per_kind = 100;  // activation-core draws per kind
  Index network_configs = 100;  // spread round-robin over kinds x presets
  double h = 1e-4;
  double kink_margin = 1e-3;    // activation-core: minimum branch gap of a draw
};

/// Every activation kind: analytic derivatives (input and parameters)
/// against central differences at random points away from kinks.
std::vector<GradcheckLine> gradcheck_activations(const GradcheckOptions& opts);

/// Softmax cross-entropy gradient against central differences.
std::vector<GradcheckLine> gradcheck_loss(const GradcheckOptions& opts);

/// Every kind on every preset (reduced widths, 8x8 inputs), all weights,
/// biases and activation parameters. Draws where any central-difference
/// probe changes a branch (activation side or pooling argmax) are redrawn.
std::vector<GradcheckLine> gradcheck_networks(const GradcheckOptions& opts);

/// Reduced-width preset used by the network suites.
ModelSpec gradcheck_spec(const std::string& preset, ActivationKind kind, Index classes = 3);

/// Randomises biases and activation parameters so every gradient path is
/// exercised (initial values make several of them identically zero).
void randomise_for_gradcheck(Model& model, Rng& rng);

std::vector<ActivationKind> all_activation_kinds();

}  // namespace adact
