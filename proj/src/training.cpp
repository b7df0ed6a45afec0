#include "adact/training.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace adact {

// ---------------------------------------------------------------- loss

namespace {

/// Loss of one row and, optionally, softmax - onehot scaled by `scale`.
double softmax_xent_row(const double* logits, Index classes, int label, double* grad, double scale) {
  Index top = 0;
  for (Index j = 1; j < classes; ++j)
    if (logits[j] > logits[top]) top = j;
  const double m = logits[top];
  double rest = 0.0;  // sum of exp(l - m) without the top term, which is exactly 1
  for (Index j = 0; j < classes; ++j)
    if (j != top) rest += std::exp(logits[j] - m);
  const double log_norm = std::log1p(rest);
  if (grad) {
    const double denom = 1.0 + rest;
    for (Index j = 0; j < classes; ++j) {
      const double p = (j == top ? 1.0 : std::exp(logits[j] - m)) / denom;
      grad[j] = (p - (j == label ? 1.0 : 0.0)) * scale;
    }
  }
  return log_norm + (m - logits[label]);
}

}  // namespace

LossResult cross_entropy(const TensorXd& logits, int label) {
  if (logits.rank() != 1) throw DimensionError("cross_entropy: logits must be a vector");
  const Index classes = logits.size();
  if (label < 0 || label >= classes)
    throw ArgumentError("cross_entropy: label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
  LossResult r{0.0, TensorXd(logits.shape())};
  r.loss = softmax_xent_row(logits.data(), classes, label, r.d_logits.data(), 1.0);
  return r;
}

BatchLoss cross_entropy_batch(const TensorXd& logits, std::span<const int> labels) {
  logits.require_rank(2, "cross_entropy_batch");
  const Index n = logits.dim(0), classes = logits.dim(1);
  if (static_cast<Index>(labels.size()) != n) throw DimensionError("cross_entropy_batch: label count mismatch");
  if (n == 0) throw ArgumentError("cross_entropy_batch: empty batch");
  BatchLoss out{0.0, {}, TensorXd(logits.shape())};
  out.sample_losses.reserve(labels.size());
  const double scale = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Index r = 0; r < n; ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= classes) throw ArgumentError("cross_entropy_batch: invalid label " + std::to_string(label));
    const double l = softmax_xent_row(logits.data() + r * classes, classes, label, out.d_logits.data() + r * classes, scale);
    out.sample_losses.push_back(l);
    total += l;
  }
  out.mean = total / static_cast<double>(n);
  return out;
}

// ---------------------------------------------------------------- metrics

double accuracy(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.size() != truth.size()) throw ArgumentError("accuracy: length mismatch");
  if (truth.empty()) throw ArgumentError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predictions[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<int> argmax_rows(const TensorXd& logits) {
  logits.require_rank(2, "argmax_rows");
  std::vector<int> out;
  const Index classes = logits.dim(1);
  for (Index r = 0; r < logits.dim(0); ++r) {
    Index best = 0;
    for (Index j = 1; j < classes; ++j)
      if (logits(r, j) > logits(r, best)) best = j;
    out.push_back(static_cast<int>(best));
  }
  return out;
}

TensorXd gather_batch(const Dataset& ds, std::span<const Index> order, std::vector<int>& labels) {
  Shape shape = ds.images.shape();
  shape[0] = static_cast<Index>(order.size());
  const Index per = shape_product(ds.sample_shape());
  TensorXd batch(shape);
  labels.clear();
  Index row = 0;
  for (Index idx : order) {
    std::copy_n(ds.images.data() + idx * per, per, batch.data() + row++ * per);
    labels.push_back(ds.labels[static_cast<std::size_t>(idx)]);
  }
  return batch;
}

std::vector<int> predict(Model& model, const Dataset& ds, Index batch_size) {
  std::vector<int> out;
  std::vector<Index> order(static_cast<std::size_t>(ds.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<int> labels;
  for (Index start = 0; start < ds.size(); start += batch_size) {
    const Index count = std::min(batch_size, ds.size() - start);
    const auto batch = gather_batch(ds, std::span(order).subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(count)), labels);
    const auto preds = argmax_rows(model.forward(batch));
    out.insert(out.end(), preds.begin(), preds.end());
  }
  return out;
}

double convergence_area(const ConvergenceCurve& curve) {
  if (curve.size() < 2) throw ArgumentError("convergence_area: need at least two points");
  double area = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (!std::isfinite(curve[i].loss) || !std::isfinite(curve[i].epoch))
      throw ArgumentError("convergence_area: non-finite point");
    if (i == 0) continue;
    if (!(curve[i].epoch > curve[i - 1].epoch)) throw ArgumentError("convergence_area: epochs must increase");
    area += 0.5 * (curve[i].loss + curve[i - 1].loss) * (curve[i].epoch - curve[i - 1].epoch);
  }
  return area;
}

// ---------------------------------------------------------------- instrumentation

WeightSnapshot snapshot_weights(Model& model) {
  WeightSnapshot snap;
  for (const auto& p : model.weight_parameters()) snap.push_back(*p.value);
  return snap;
}

std::vector<LayerDelta> weight_increment(const WeightSnapshot& prev, const WeightSnapshot& curr,
                                         std::span<const Index> tracked_layers, Index tracked_weights) {
  if (prev.size() != curr.size()) throw DimensionError("weight_increment: snapshots hold different layer counts");
  const std::set<Index> tracked(tracked_layers.begin(), tracked_layers.end());
  std::vector<LayerDelta> out;
  for (std::size_t l = 0; l < prev.size(); ++l) {
    if (prev[l].shape() != curr[l].shape())
      throw DimensionError("weight_increment: layer " + std::to_string(l) + " changed shape");
    LayerDelta d;
    d.layer = static_cast<Index>(l);
    const Index n = prev[l].size();
    double total = 0.0;
    for (Index i = 0; i < n; ++i) total += std::abs(curr[l][i] - prev[l][i]);
    d.mean_abs = n > 0 ? total / static_cast<double>(n) : 0.0;
    if (tracked.count(d.layer))
      for (Index i = 0; i < std::min(tracked_weights, n); ++i) d.tracked.push_back(curr[l][i] - prev[l][i]);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Index> default_tracked_layers(Index weight_layers) {
  if (weight_layers <= 0) return {};
  std::set<Index> s{0, weight_layers / 2, weight_layers - 1};
  return {s.begin(), s.end()};
}

std::vector<double> default_shape_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(-5.0 + 0.1 * i);
  return grid;
}

std::vector<ShapeTrace> activation_shape_trace(const Model& model, const std::vector<double>& grid) {
  std::vector<ShapeTrace> out;
  const auto sites = model.activation_sites();
  TensorXd z({static_cast<Index>(grid.size())});
  for (std::size_t i = 0; i < grid.size(); ++i) z[static_cast<Index>(i)] = grid[i];
  for (std::size_t s = 0; s < sites.size(); ++s) {
    const auto* site = sites[s];
    if (!site->has_params()) continue;
    const TensorXd f = site->evaluate(z);
    ShapeTrace t;
    t.site = static_cast<Index>(s);
    t.kind = site->kind();
    t.params.assign(site->params.data(), site->params.data() + site->params.size());
    t.z = grid;
    t.fz.assign(f.data(), f.data() + f.size());
    out.push_back(std::move(t));
  }
  return out;
}

double max_trace_gap(const ShapeTrace& a, const ShapeTrace& b) {
  if (a.fz.size() != b.fz.size()) throw DimensionError("max_trace_gap: traces sampled on different grids");
  double gap = 0.0;
  for (std::size_t i = 0; i < a.fz.size(); ++i) gap = std::max(gap, std::abs(a.fz[i] - b.fz[i]));
  return gap;
}

// ---------------------------------------------------------------- training

std::vector<RunRecord> train(Model& model, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                             Rng& rng, const RecordSink& sink) {
  if (cfg.epochs < 0) throw ArgumentError("train: negative epoch count");
  if (cfg.batch_size <= 0) throw ArgumentError("train: batch size must be positive");
  std::vector<RunRecord> records;
  if (cfg.epochs == 0) return records;
  if (train_set.size() == 0) throw ArgumentError("train: empty training set");
  if (train_set.sample_shape() != model.spec().input_shape)
    throw DimensionError("train: samples " + shape_string(train_set.sample_shape()) + " do not match model input " +
                         shape_string(model.spec().input_shape));
  if (train_set.classes > model.spec().classes) throw DimensionError("train: dataset has more classes than the model");

  OptimizerConfig opt = cfg.optimizer;
  if (opt.schedule.empty()) opt.schedule = equal_stages(cfg.epochs);
  opt.validate();
  if (opt.total_epochs() < cfg.epochs) throw ScheduleError("train: schedule does not cover every epoch");
  if (opt.kind == OptimizerConfig::Kind::AdaDelta)
    spdlog::info("adadelta uses no external learning rate; the schedule only labels the records");

  model.set_activation_frozen(cfg.freeze_activations);
  const auto tracked = cfg.tracked_layers.empty()
                           ? default_tracked_layers(static_cast<Index>(model.weight_parameters().size()))
                           : cfg.tracked_layers;

  OptimizerState<double> state;
  WeightSnapshot prev = snapshot_weights(model);
  const Dataset& eval_set = test_set.size() > 0 ? test_set : train_set;
  std::set<Index> warned_sites;
  std::vector<int> labels;
  std::vector<Tensor<double>*> values;
  std::vector<const Tensor<double>*> grads;

  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(opt, epoch);
    const auto order = rng.permutation(train_set.size());
    double loss_total = 0.0;
    Index batch_index = 0;
    for (Index start = 0; start < train_set.size(); start += cfg.batch_size, ++batch_index) {
      const Index count = std::min(cfg.batch_size, train_set.size() - start);
      const auto where = "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index);
      const auto batch = gather_batch(
          train_set, std::span(order).subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(count)), labels);
      try {
        const auto logits = model.forward(batch);
        const auto loss = cross_entropy_batch(logits, labels);
        if (!std::isfinite(loss.mean)) throw NumericError("non-finite loss");
        for (double l : loss.sample_losses) loss_total += l;
        const auto gradient_set = model.backward(loss.d_logits);
        values.clear();
        grads.clear();
        for (const auto& p : gradient_set.params)
          if (p.trainable) {
            values.push_back(p.value);
            grads.push_back(p.grad);
          }
        step<double>(opt, state, values, grads, epoch);
      } catch (const NumericError& e) {
        throw TrainingError("training diverged at " + where + ": " + e.what());
      }
    }

    RunRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_total / static_cast<double>(train_set.size());
    if (!std::isfinite(rec.train_loss)) throw TrainingError("training diverged at epoch " + std::to_string(epoch));
    rec.lr = lr;
    rec.test_accuracy = accuracy(predict(model, eval_set), eval_set.labels);

    const auto sites = model.activation_sites();
    for (std::size_t s = 0; s < sites.size(); ++s) {
      const auto* site = sites[s];
      if (!site->has_params()) continue;
      rec.activation_params.push_back({static_cast<Index>(s), site->kind(),
                                       {site->params.data(), site->params.data() + site->params.size()}});
      if (site->kind().is_smooth_adaptive() && !warned_sites.count(static_cast<Index>(s))) {
        const auto p = site->adaptive_params();
        if (std::abs(p.a) < 1e-6 || std::abs(p.b) < 1e-6) {
          spdlog::warn("activation site {}: |a| or |b| below 1e-6 at epoch {}; the layer is close to constant", s, epoch);
          warned_sites.insert(static_cast<Index>(s));
        }
      }
    }

    WeightSnapshot curr = snapshot_weights(model);
    rec.deltas = weight_increment(prev, curr, tracked, cfg.tracked_weights);
    prev = std::move(curr);

    if (sink) sink(rec);
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------- gradient oracle

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& loss,
                                     std::span<const double> params, double h) {
  if (!(h > 0.0)) throw ArgumentError("finite_diff_grad: h must be > 0");
  std::vector<double> x(params.begin(), params.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = loss(x);
    x[i] = orig - h;
    const double down = loss(x);
    x[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("finite_diff_grad: non-finite loss at coordinate " + std::to_string(i));
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckResult gradient_check(Model& model, const TensorXd& batch, std::span<const int> labels, double h) {
  const auto logits = model.forward(batch);
  const auto base = cross_entropy_batch(logits, labels);
  const auto signature = model.branch_signature();
  auto params = model.backward(base.d_logits).params;
  std::vector<TensorXd> analytic;
  for (const auto& p : params) analytic.push_back(*p.grad);

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    TensorXd& value = *params[k].value;
    std::vector<double> start(value.data(), value.data() + value.size());
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> x) {
          std::copy(x.begin(), x.end(), value.data());
          const double loss = cross_entropy_batch(model.forward(batch), labels).mean;
          if (model.branch_signature() != signature) ++result.kink_crossings;
          return loss;
        },
        start, h);
    std::copy(start.begin(), start.end(), value.data());
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double err = relative_error(analytic[k][static_cast<Index>(i)], numeric[i]);
      if (result.worst_parameter.empty() || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = params[k].name + "[" + std::to_string(i) + "]";
      }
      ++result.coordinates;
    }
  }
  return result;
}

}  // namespace adact
