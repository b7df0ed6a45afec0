#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adact/datasets.hpp"
#include "adact/network.hpp"
#include "adact/optimizer.hpp"

namespace adact {

// ---------------------------------------------------------------- loss

struct LossResult {
  double loss = 0.0;
  TensorXd d_logits;
};

/// Softmax cross-entropy of one logit vector, with max subtraction.
LossResult cross_entropy(const TensorXd& logits, int label);

/// Mean cross-entropy over a [N, classes] batch. `d_logits` is the gradient
/// of the mean; `sample_losses` holds the per-sample values.
struct BatchLoss {
  double mean = 0.0;
  std::vector<double> sample_losses;
  TensorXd d_logits;
};
BatchLoss cross_entropy_batch(const TensorXd& logits, std::span<const int> labels);

// ---------------------------------------------------------------- metrics

double accuracy(std::span<const int> predictions, std::span<const int> truth);

/// Row-wise argmax (lowest index on ties).
std::vector<int> argmax_rows(const TensorXd& logits);

std::vector<int> predict(Model& model, const Dataset& ds, Index batch_size = 256);

struct CurvePoint {
  double epoch = 0.0;
  double loss = 0.0;
};
using ConvergenceCurve = std::vector<CurvePoint>;

/// Trapezoidal integral of the loss over the epoch axis.
double convergence_area(const ConvergenceCurve& curve);

// ---------------------------------------------------------------- instrumentation

struct LayerDelta {
  Index layer = 0;  // ordinal among dense/conv layers
  double mean_abs = 0.0;
  std::vector<double> tracked;  // raw deltas of the first K weights; empty if untracked
};

using WeightSnapshot = std::vector<TensorXd>;

WeightSnapshot snapshot_weights(Model& model);

/// Per-layer statistics of curr - prev.
std::vector<LayerDelta> weight_increment(const WeightSnapshot& prev, const WeightSnapshot& curr,
                                         std::span<const Index> tracked_layers, Index tracked_weights);

/// First, middle and last weight layer (deduplicated, ascending).
std::vector<Index> default_tracked_layers(Index weight_layers);

struct SiteParams {
  Index site = 0;  // activation-site ordinal
  ActivationKind kind;
  std::vector<double> values;  // a, b, c, d or the PReLU slope
};

struct RunRecord {
  Index epoch = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double lr = 0.0;
  std::vector<SiteParams> activation_params;
  std::vector<LayerDelta> deltas;
};

struct ShapeTrace {
  Index site = 0;
  ActivationKind kind;
  std::vector<double> params;
  std::vector<double> z;
  std::vector<double> fz;
};

/// -5.0, -4.9, ..., 5.0 (101 points).
std::vector<double> default_shape_grid();

/// The current function of every activation site with learnable parameters,
/// sampled on `grid`.
std::vector<ShapeTrace> activation_shape_trace(const Model& model, const std::vector<double>& grid);

double max_trace_gap(const ShapeTrace& a, const ShapeTrace& b);

// ---------------------------------------------------------------- training

struct TrainConfig {
  OptimizerConfig optimizer;  // an empty schedule means equal thirds of `epochs`
  Index epochs = 0;
  Index batch_size = 64;
  std::vector<Index> tracked_layers;  // empty: default_tracked_layers
  Index tracked_weights = 4;
  bool freeze_activations = false;
};

using RecordSink = std::function<void(const RunRecord&)>;

/// Mini-batch training with one record per epoch. The sample order of each
/// epoch is a permutation drawn from `rng`; the last partial batch is used.
/// Throws TrainingError (naming epoch and batch) on a non-finite loss.
std::vector<RunRecord> train(Model& model, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                             Rng& rng, const RecordSink& sink = {});

/// Stacks the samples listed in `order` into one batch; fills `labels`.
TensorXd gather_batch(const Dataset& ds, std::span<const Index> order, std::vector<int>& labels);

// ---------------------------------------------------------------- gradient oracle

/// Central differences, one coordinate at a time.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& loss,
                                     std::span<const double> params, double h = 1e-4);

/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-6);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Index coordinates = 0;
  Index kink_crossings = 0;  // probes that landed on a different smooth piece
};

/// Compares the backward pass of `model` on (batch, labels) under mean
/// cross-entropy with central differences over every parameter coordinate.
GradCheckResult gradient_check(Model& model, const TensorXd& batch, std::span<const int> labels, double h = 1e-4);

}  // namespace adact
