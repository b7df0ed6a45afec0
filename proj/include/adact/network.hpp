#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "adact/activation.hpp"
#include "adact/tensor.hpp"

namespace adact {

/// One entry of a model description. `body` is used only by residual blocks,
/// which add their input to the output of `body`.
struct LayerDesc {
  enum class Type { Dense, Conv2d, MaxPool, Flatten, Activation, Residual };

  Type type = Type::Flatten;
  Index in = 0;   // dense inputs / conv input channels
  Index out = 0;  // dense outputs / conv output channels
  Index kernel = 0;
  Index stride = 1;
  Index padding = 0;
  ActivationKind activation;
  std::vector<LayerDesc> body;

  static LayerDesc dense(Index in, Index out) { return {Type::Dense, in, out, 0, 1, 0, {}, {}}; }
  static LayerDesc conv2d(Index in_channels, Index out_channels, Index kernel, Index stride, Index padding) {
    return {Type::Conv2d, in_channels, out_channels, kernel, stride, padding, {}, {}};
  }
  static LayerDesc max_pool(Index size = 2, Index stride = 2) { return {Type::MaxPool, 0, 0, size, stride, 0, {}, {}}; }
  static LayerDesc flatten() { return {}; }
  static LayerDesc act(ActivationKind kind) { return {Type::Activation, 0, 0, 0, 1, 0, kind, {}}; }
  static LayerDesc residual(std::vector<LayerDesc> body) {
    return {Type::Residual, 0, 0, 0, 1, 0, {}, std::move(body)};
  }

  friend bool operator==(const LayerDesc&, const LayerDesc&) = default;
};

struct ModelSpec {
  std::string preset;
  Shape input_shape;  // per sample, e.g. {C, H, W}
  Index classes = 0;
  ActivationKind activation;
  std::vector<LayerDesc> layers;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Widths used by the presets. Reduced widths keep the same topology and are
/// what the finite-difference suites run on.
struct PresetOptions {
  Index hidden = 64;
  std::array<Index, 3> channels{16, 32, 64};
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"mlp-2", "cnn-mini", "cnn-mini-res"};
  return names;
}

/// mlp-2: flatten, two hidden dense layers, output layer.
/// cnn-mini: three conv(3x3, same)/activation/maxpool(2x2) blocks, then a
/// hidden dense layer with activation and the output layer.
/// cnn-mini-res: cnn-mini with an identity-skip block (conv, act, conv)
/// followed by an activation inserted before the third conv block.
ModelSpec make_preset(const std::string& preset, Shape input_shape, Index classes, ActivationKind activation,
                      const PresetOptions& options = {});

/// Checks that shapes chain through every layer and that the model emits
/// `classes` logits; returns the per-sample output shape. Throws SpecError.
Shape validate(const ModelSpec& spec);

/// A parameter tensor together with its gradient.
struct ParamRef {
  enum class Role { Weight, Bias, Activation };

  std::string name;
  Role role = Role::Weight;
  TensorXd* value = nullptr;
  TensorXd* grad = nullptr;
  bool trainable = true;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string type() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  /// Caches what backward needs and tags it with `stamp`.
  virtual TensorXd forward(const TensorXd& x, std::uint64_t stamp) = 0;
  /// Writes parameter gradients (overwriting) and returns the input gradient.
  /// The cache must carry the same stamp; it is released afterwards.
  virtual TensorXd backward(const TensorXd& grad_out, std::uint64_t stamp) = 0;

  virtual void collect_params(std::vector<ParamRef>& /*out*/) {}
  virtual void collect_layers(std::vector<Layer*>& out) { out.push_back(this); }

  /// Distance of the cached forward pass from the nearest non-differentiable
  /// point; +inf for smooth layers.
  virtual double kink_margin() const { return std::numeric_limits<double>::infinity(); }

  /// Appends the branch taken at every kink of the cached forward pass
  /// (activation side, pooling argmax). Equal signatures mean the same
  /// smooth piece.
  virtual void append_branches(std::vector<std::int64_t>& /*out*/) const {}

 protected:
  void check_stamp(std::uint64_t stamp) const;
  std::uint64_t cache_stamp_ = 0;
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(Index in, Index out);

  std::string type() const override { return "dense"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }
  TensorXd forward(const TensorXd& x, std::uint64_t stamp) override;
  TensorXd backward(const TensorXd& grad_out, std::uint64_t stamp) override;
  void collect_params(std::vector<ParamRef>& out) override;

  TensorXd w;  // [out x in]
  TensorXd b;  // [out]
  TensorXd dw;
  TensorXd db;

 private:
  TensorXd x_;
};

class Conv2dLayer final : public Layer {
 public:
  Conv2dLayer(Index in_channels, Index out_channels, Index kernel, Index stride, Index padding);

  std::string type() const override { return "conv2d"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2dLayer>(*this); }
  TensorXd forward(const TensorXd& x, std::uint64_t stamp) override;
  TensorXd backward(const TensorXd& grad_out, std::uint64_t stamp) override;
  void collect_params(std::vector<ParamRef>& out) override;

  static Index output_extent(Index in, Index kernel, Index stride, Index padding) {
    return (in + 2 * padding - kernel) / stride + 1;
  }

  TensorXd kernels;  // [outC x inC x k x k]
  TensorXd bias;     // [outC]
  TensorXd dkernels;
  TensorXd dbias;

 private:
  void im2col(const double* image, Index h, Index w, double* cols) const;
  void col2im(const double* cols, Index h, Index w, double* image) const;

  Index in_channels_, out_channels_, kernel_, stride_, padding_;
  Shape input_shape_;
  std::vector<TensorXd> cols_;  // per sample [inC*k*k x OH*OW]
};

class MaxPoolLayer final : public Layer {
 public:
  MaxPoolLayer(Index size, Index stride) : size_(size), stride_(stride) {}

  std::string type() const override { return "maxpool"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPoolLayer>(*this); }
  TensorXd forward(const TensorXd& x, std::uint64_t stamp) override;
  TensorXd backward(const TensorXd& grad_out, std::uint64_t stamp) override;
  double kink_margin() const override { return margin_; }
  void append_branches(std::vector<std::int64_t>& out) const override {
    out.insert(out.end(), argmax_.begin(), argmax_.end());
  }

 private:
  Index size_, stride_;
  Shape input_shape_;
  std::vector<Index> argmax_;
  double margin_ = std::numeric_limits<double>::infinity();
};

class FlattenLayer final : public Layer {
 public:
  std::string type() const override { return "flatten"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<FlattenLayer>(*this); }
  TensorXd forward(const TensorXd& x, std::uint64_t stamp) override;
  TensorXd backward(const TensorXd& grad_out, std::uint64_t stamp) override;

 private:
  Shape input_shape_;
};

/// Elementwise activation. Adaptive kinds hold the four scalars (a, b, c, d)
/// shared by every unit of the layer; PReLU holds one slope.
class ActivationLayer final : public Layer {
 public:
  explicit ActivationLayer(ActivationKind kind);

  std::string type() const override { return "activation:" + kind_.name(); }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ActivationLayer>(*this); }
  TensorXd forward(const TensorXd& x, std::uint64_t stamp) override;
  TensorXd backward(const TensorXd& grad_out, std::uint64_t stamp) override;
  void collect_params(std::vector<ParamRef>& out) override;
  double kink_margin() const override;
  void append_branches(std::vector<std::int64_t>& out) const override;

  const ActivationKind& kind() const { return kind_; }
  bool has_params() const { return params.size() > 0; }

  AdaptiveParams<double> adaptive_params() const;
  void set_adaptive_params(const AdaptiveParams<double>& p);
  double prelu_slope() const;
  void set_prelu_slope(double slope);

  /// Evaluates this layer's function on arbitrary inputs without touching the cache.
  TensorXd evaluate(const TensorXd& z) const;

  bool frozen = false;
  TensorXd params;  // 4 (adaptive), 1 (PReLU) or 0 entries
  TensorXd dparams;

 private:
  ActivationKind kind_;
  TensorXd z_;
};

class ResidualBlock final : public Layer {
 public:
  explicit ResidualBlock(std::vector<std::unique_ptr<Layer>> body) : body_(std::move(body)) {}
  ResidualBlock(const ResidualBlock& other);

  std::string type() const override { return "residual"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ResidualBlock>(*this); }
  TensorXd forward(const TensorXd& x, std::uint64_t stamp) override;
  TensorXd backward(const TensorXd& grad_out, std::uint64_t stamp) override;
  void collect_params(std::vector<ParamRef>& out) override;
  void collect_layers(std::vector<Layer*>& out) override;
  double kink_margin() const override;
  void append_branches(std::vector<std::int64_t>& out) const override;

 private:
  std::vector<std::unique_ptr<Layer>> body_;
};

/// Gradients for every parameter of a model, in parameter order. The tensors
/// are owned by the model and stay valid until its next backward pass.
struct GradientSet {
  std::vector<ParamRef> params;
};

class Model {
 public:
  Model() = default;
  Model(ModelSpec spec, std::vector<std::unique_ptr<Layer>> layers);
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }

  /// Batch layout is [N, input_shape...]; returns logits [N, classes].
  TensorXd forward(const TensorXd& batch);
  GradientSet backward(const TensorXd& d_logits);

  /// Every parameter, in layer order (frozen ones flagged non-trainable).
  std::vector<ParamRef> parameters();
  /// Dense and conv weight tensors only, in layer order.
  std::vector<ParamRef> weight_parameters();
  /// Activation layers in order, including those nested in residual blocks.
  std::vector<ActivationLayer*> activation_sites();
  std::vector<const ActivationLayer*> activation_sites() const;

  void set_activation_frozen(bool frozen);
  double kink_margin() const;
  std::vector<std::int64_t> branch_signature() const;

  std::vector<std::unique_ptr<Layer>>& layers() { return layers_; }

 private:
  std::vector<Layer*> flat_layers() const;

  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::uint64_t stamp_ = 0;
  bool backward_pending_ = false;
};

/// Glorot-uniform weights, zero biases, activation parameters at their
/// kind defaults. Deterministic per seed.
Model init(const ModelSpec& spec, Rng& rng);

struct ParamCensus {
  Index weights = 0;   // weights and biases
  Index adaptive = 0;  // activation parameters
};

ParamCensus param_census(Model& model);

}  // namespace adact
