#include "adact/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace adact {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_batch_rank(const TensorXd& x, Index rank, const char* who) {
  if (x.rank() != rank)
    throw DimensionError(std::string(who) + ": expected a rank-" + std::to_string(rank) + " batch, got " +
                         shape_string(x.shape()));
}

TensorXd transposed(const double* src, Index rows, Index cols) {
  TensorXd out({cols, rows});
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  return out;
}

}  // namespace

// ---------------------------------------------------------------- presets

ModelSpec make_preset(const std::string& preset, Shape input_shape, Index classes, ActivationKind activation,
                      const PresetOptions& options) {
  ModelSpec spec{preset, std::move(input_shape), classes, activation, {}};
  auto& layers = spec.layers;
  const Index h = options.hidden;
  const auto& ch = options.channels;

  if (preset == "mlp-2") {
    const Index features = shape_product(spec.input_shape);
    layers = {LayerDesc::flatten(),   LayerDesc::dense(features, h), LayerDesc::act(activation),
              LayerDesc::dense(h, h), LayerDesc::act(activation),    LayerDesc::dense(h, classes)};
  } else if (preset == "cnn-mini" || preset == "cnn-mini-res") {
    if (spec.input_shape.size() != 3) throw SpecError(preset + ": input must be C x H x W");
    Index channels = spec.input_shape[0];
    Index height = spec.input_shape[1];
    Index width = spec.input_shape[2];
    for (std::size_t blk = 0; blk < ch.size(); ++blk) {
      if (preset == "cnn-mini-res" && blk == 2) {
        layers.push_back(LayerDesc::residual({LayerDesc::conv2d(channels, channels, 3, 1, 1),
                                              LayerDesc::act(activation),
                                              LayerDesc::conv2d(channels, channels, 3, 1, 1)}));
        layers.push_back(LayerDesc::act(activation));
      }
      layers.push_back(LayerDesc::conv2d(channels, ch[blk], 3, 1, 1));
      layers.push_back(LayerDesc::act(activation));
      layers.push_back(LayerDesc::max_pool(2, 2));
      channels = ch[blk];
      height = (height - 2) / 2 + 1;
      width = (width - 2) / 2 + 1;
    }
    if (height < 1 || width < 1) throw SpecError(preset + ": input too small for three 2x2 pools");
    layers.push_back(LayerDesc::flatten());
    layers.push_back(LayerDesc::dense(channels * height * width, h));
    layers.push_back(LayerDesc::act(activation));
    layers.push_back(LayerDesc::dense(h, classes));
  } else {
    throw SpecError("unknown preset '" + preset + "'");
  }
  validate(spec);
  return spec;
}

namespace {

Shape validate_layers(const std::vector<LayerDesc>& layers, Shape shape, const std::string& where) {
  using T = LayerDesc::Type;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& d = layers[i];
    const std::string at = where + "layer " + std::to_string(i) + ": ";
    switch (d.type) {
      case T::Dense:
        if (d.in <= 0 || d.out <= 0) throw SpecError(at + "dense extents must be positive");
        if (shape.size() != 1 || shape[0] != d.in)
          throw SpecError(at + "dense expects [" + std::to_string(d.in) + "], got " + shape_string(shape));
        shape = {d.out};
        break;
      case T::Conv2d: {
        if (d.in <= 0 || d.out <= 0 || d.kernel <= 0 || d.stride <= 0 || d.padding < 0)
          throw SpecError(at + "invalid conv2d geometry");
        if (shape.size() != 3 || shape[0] != d.in)
          throw SpecError(at + "conv2d expects " + std::to_string(d.in) + " input channels, got " +
                          shape_string(shape));
        const Index oh = Conv2dLayer::output_extent(shape[1], d.kernel, d.stride, d.padding);
        const Index ow = Conv2dLayer::output_extent(shape[2], d.kernel, d.stride, d.padding);
        if (shape[1] + 2 * d.padding < d.kernel || shape[2] + 2 * d.padding < d.kernel || oh <= 0 || ow <= 0)
          throw SpecError(at + "conv2d output extent is not positive");
        shape = {d.out, oh, ow};
        break;
      }
      case T::MaxPool: {
        if (d.kernel <= 0 || d.stride <= 0) throw SpecError(at + "invalid pooling geometry");
        if (shape.size() != 3) throw SpecError(at + "maxpool expects C x H x W, got " + shape_string(shape));
        if (shape[1] < d.kernel || shape[2] < d.kernel) throw SpecError(at + "maxpool window exceeds input");
        shape = {shape[0], (shape[1] - d.kernel) / d.stride + 1, (shape[2] - d.kernel) / d.stride + 1};
        break;
      }
      case T::Flatten:
        shape = {shape_product(shape)};
        break;
      case T::Activation:
        if (d.activation.tag == ActivationKind::Tag::LReLU || d.activation.tag == ActivationKind::Tag::Swish)
          if (!(d.activation.param > 0.0)) throw SpecError(at + "activation parameter must be > 0");
        break;
      case T::Residual: {
        const Shape inner = validate_layers(d.body, shape, at + "residual ");
        if (inner != shape)
          throw SpecError(at + "residual body maps " + shape_string(shape) + " to " + shape_string(inner));
        break;
      }
    }
  }
  return shape;
}

}  // namespace

Shape validate(const ModelSpec& spec) {
  if (spec.input_shape.empty()) throw SpecError("model spec: empty input shape");
  for (Index e : spec.input_shape)
    if (e <= 0) throw SpecError("model spec: input extents must be positive");
  if (spec.classes < 1) throw SpecError("model spec: classes must be >= 1");
  Shape out = validate_layers(spec.layers, spec.input_shape, "");
  if (out != Shape{spec.classes})
    throw SpecError("model spec: final output " + shape_string(out) + " is not " + std::to_string(spec.classes) +
                    " logits");
  return out;
}

// ---------------------------------------------------------------- layers

void Layer::check_stamp(std::uint64_t stamp) const {
  if (cache_stamp_ == 0) throw ContractError(type() + ": backward without a matching forward");
  if (cache_stamp_ != stamp) throw ContractError(type() + ": stale cache (forward/backward mismatch)");
}

DenseLayer::DenseLayer(Index in, Index out) : w({out, in}), b({out}), dw({out, in}), db({out}) {}

TensorXd DenseLayer::forward(const TensorXd& x, std::uint64_t stamp) {
  require_batch_rank(x, 2, "dense");
  const Index n = x.dim(0), in = w.dim(1), out = w.dim(0);
  if (x.dim(1) != in)
    throw DimensionError("dense: expected " + std::to_string(in) + " inputs, got " + shape_string(x.shape()));
  const TensorXd wt = transposed(w.data(), out, in);
  TensorXd z({n, out});
  detail::gemm_accumulate(n, out, in, x.data(), in, wt.data(), out, z.data(), out);
  for (Index r = 0; r < n; ++r)
    for (Index o = 0; o < out; ++o) z[r * out + o] += b[o];
  x_ = x;
  cache_stamp_ = stamp;
  return z;
}

TensorXd DenseLayer::backward(const TensorXd& g, std::uint64_t stamp) {
  check_stamp(stamp);
  const Index n = x_.dim(0), in = w.dim(1), out = w.dim(0);
  if (g.shape() != Shape{n, out}) throw DimensionError("dense backward: gradient shape " + shape_string(g.shape()));
  const TensorXd gt = transposed(g.data(), n, out);
  dw = TensorXd(w.shape());
  detail::gemm_accumulate(out, in, n, gt.data(), n, x_.data(), in, dw.data(), in);
  db = TensorXd(b.shape());
  for (Index r = 0; r < n; ++r)
    for (Index o = 0; o < out; ++o) db[o] += g[r * out + o];
  TensorXd dx({n, in});
  detail::gemm_accumulate(n, in, out, g.data(), out, w.data(), in, dx.data(), in);
  x_ = TensorXd();
  cache_stamp_ = 0;
  return dx;
}

void DenseLayer::collect_params(std::vector<ParamRef>& out) {
  out.push_back({"w", ParamRef::Role::Weight, &w, &dw, true});
  out.push_back({"b", ParamRef::Role::Bias, &b, &db, true});
}

Conv2dLayer::Conv2dLayer(Index in_channels, Index out_channels, Index kernel, Index stride, Index padding)
    : kernels({out_channels, in_channels, kernel, kernel}),
      bias({out_channels}),
      dkernels({out_channels, in_channels, kernel, kernel}),
      dbias({out_channels}),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding) {}

void Conv2dLayer::im2col(const double* image, Index h, Index w, double* cols) const {
  const Index oh = output_extent(h, kernel_, stride_, padding_);
  const Index ow = output_extent(w, kernel_, stride_, padding_);
  Index row = 0;
  for (Index c = 0; c < in_channels_; ++c)
    for (Index ki = 0; ki < kernel_; ++ki)
      for (Index kj = 0; kj < kernel_; ++kj, ++row) {
        double* dst = cols + row * oh * ow;
        for (Index y = 0; y < oh; ++y) {
          const Index iy = y * stride_ - padding_ + ki;
          for (Index x = 0; x < ow; ++x) {
            const Index ix = x * stride_ - padding_ + kj;
            dst[y * ow + x] = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? image[(c * h + iy) * w + ix] : 0.0;
          }
        }
      }
}

void Conv2dLayer::col2im(const double* cols, Index h, Index w, double* image) const {
  const Index oh = output_extent(h, kernel_, stride_, padding_);
  const Index ow = output_extent(w, kernel_, stride_, padding_);
  Index row = 0;
  for (Index c = 0; c < in_channels_; ++c)
    for (Index ki = 0; ki < kernel_; ++ki)
      for (Index kj = 0; kj < kernel_; ++kj, ++row) {
        const double* src = cols + row * oh * ow;
        for (Index y = 0; y < oh; ++y) {
          const Index iy = y * stride_ - padding_ + ki;
          if (iy < 0 || iy >= h) continue;
          for (Index x = 0; x < ow; ++x) {
            const Index ix = x * stride_ - padding_ + kj;
            if (ix >= 0 && ix < w) image[(c * h + iy) * w + ix] += src[y * ow + x];
          }
        }
      }
}

TensorXd Conv2dLayer::forward(const TensorXd& x, std::uint64_t stamp) {
  require_batch_rank(x, 4, "conv2d");
  if (x.dim(1) != in_channels_)
    throw DimensionError("conv2d: expected " + std::to_string(in_channels_) + " channels, got " +
                         shape_string(x.shape()));
  const Index n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const Index oh = output_extent(h, kernel_, stride_, padding_);
  const Index ow = output_extent(w, kernel_, stride_, padding_);
  if (oh <= 0 || ow <= 0) throw DimensionError("conv2d: input " + shape_string(x.shape()) + " too small");
  const Index ckk = in_channels_ * kernel_ * kernel_, hw = oh * ow;

  TensorXd y({n, out_channels_, oh, ow});
  cols_.assign(static_cast<std::size_t>(n), TensorXd());
  for (Index s = 0; s < n; ++s) {
    auto& cols = cols_[static_cast<std::size_t>(s)];
    cols = TensorXd({ckk, hw});
    im2col(x.data() + s * in_channels_ * h * w, h, w, cols.data());
    double* out = y.data() + s * out_channels_ * hw;
    detail::gemm_accumulate(out_channels_, hw, ckk, kernels.data(), ckk, cols.data(), hw, out, hw);
    for (Index oc = 0; oc < out_channels_; ++oc)
      for (Index p = 0; p < hw; ++p) out[oc * hw + p] += bias[oc];
  }
  input_shape_ = x.shape();
  cache_stamp_ = stamp;
  return y;
}

TensorXd Conv2dLayer::backward(const TensorXd& g, std::uint64_t stamp) {
  check_stamp(stamp);
  const Index n = input_shape_[0], h = input_shape_[2], w = input_shape_[3];
  const Index oh = output_extent(h, kernel_, stride_, padding_);
  const Index ow = output_extent(w, kernel_, stride_, padding_);
  const Index ckk = in_channels_ * kernel_ * kernel_, hw = oh * ow;
  if (g.shape() != Shape{n, out_channels_, oh, ow})
    throw DimensionError("conv2d backward: gradient shape " + shape_string(g.shape()));

  dkernels = TensorXd(kernels.shape());
  dbias = TensorXd(bias.shape());
  TensorXd dx(input_shape_);
  const TensorXd kt = transposed(kernels.data(), out_channels_, ckk);
  TensorXd dcols({ckk, hw});
  for (Index s = 0; s < n; ++s) {
    const double* gs = g.data() + s * out_channels_ * hw;
    const auto& cols = cols_[static_cast<std::size_t>(s)];
    const TensorXd cols_t = transposed(cols.data(), ckk, hw);
    detail::gemm_accumulate(out_channels_, ckk, hw, gs, hw, cols_t.data(), ckk, dkernels.data(), ckk);
    for (Index oc = 0; oc < out_channels_; ++oc)
      for (Index p = 0; p < hw; ++p) dbias[oc] += gs[oc * hw + p];
    dcols.values().setZero();
    detail::gemm_accumulate(ckk, hw, out_channels_, kt.data(), out_channels_, gs, hw, dcols.data(), hw);
    col2im(dcols.data(), h, w, dx.data() + s * in_channels_ * h * w);
  }
  cols_.clear();
  cache_stamp_ = 0;
  return dx;
}

void Conv2dLayer::collect_params(std::vector<ParamRef>& out) {
  out.push_back({"w", ParamRef::Role::Weight, &kernels, &dkernels, true});
  out.push_back({"b", ParamRef::Role::Bias, &bias, &dbias, true});
}

TensorXd MaxPoolLayer::forward(const TensorXd& x, std::uint64_t stamp) {
  require_batch_rank(x, 4, "maxpool");
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < size_ || w < size_) throw DimensionError("maxpool: input " + shape_string(x.shape()) + " too small");
  const Index oh = (h - size_) / stride_ + 1, ow = (w - size_) / stride_ + 1;
  TensorXd y({n, c, oh, ow});
  argmax_.assign(static_cast<std::size_t>(y.size()), 0);
  margin_ = kInf;
  Index o = 0;
  for (Index plane = 0; plane < n * c; ++plane) {
    const double* src = x.data() + plane * h * w;
    for (Index oy = 0; oy < oh; ++oy)
      for (Index ox = 0; ox < ow; ++ox, ++o) {
        Index best = -1;
        double top = 0.0, second = -kInf;
        for (Index ky = 0; ky < size_; ++ky)
          for (Index kx = 0; kx < size_; ++kx) {
            const Index idx = (oy * stride_ + ky) * w + ox * stride_ + kx;
            const double v = src[idx];
            if (best < 0 || v > top) {
              if (best >= 0) second = top;
              top = v;
              best = idx;
            } else if (v > second) {
              second = v;
            }
          }
        y[o] = top;
        argmax_[static_cast<std::size_t>(o)] = plane * h * w + best;
        // exact ties are structural (e.g. several clamped zeros) and
        // do not move under small perturbations
        if (second > -kInf && second != top) margin_ = std::min(margin_, top - second);
      }
  }
  input_shape_ = x.shape();
  cache_stamp_ = stamp;
  return y;
}

TensorXd MaxPoolLayer::backward(const TensorXd& g, std::uint64_t stamp) {
  check_stamp(stamp);
  if (g.size() != static_cast<Index>(argmax_.size()))
    throw DimensionError("maxpool backward: gradient shape " + shape_string(g.shape()));
  TensorXd dx(input_shape_);
  for (Index o = 0; o < g.size(); ++o) dx[argmax_[static_cast<std::size_t>(o)]] += g[o];
  argmax_.clear();
  cache_stamp_ = 0;
  return dx;
}

TensorXd FlattenLayer::forward(const TensorXd& x, std::uint64_t stamp) {
  if (x.rank() < 1) throw DimensionError("flatten: empty input");
  input_shape_ = x.shape();
  cache_stamp_ = stamp;
  const Index n = x.dim(0);
  return reshape(x, {n, n == 0 ? 0 : x.size() / n});
}

TensorXd FlattenLayer::backward(const TensorXd& g, std::uint64_t stamp) {
  check_stamp(stamp);
  cache_stamp_ = 0;
  return reshape(g, input_shape_);
}

ActivationLayer::ActivationLayer(ActivationKind kind) : kind_(kind) {
  if (kind.is_adaptive()) {
    params = TensorXd({4});
    set_adaptive_params(AdaptiveParams<double>::initial(kind));
  } else if (kind.tag == ActivationKind::Tag::PReLU) {
    params = TensorXd({1});
    params[0] = kPReLUInitialSlope;
  } else {
    params = TensorXd({0});
  }
  dparams = TensorXd(params.shape());
}

AdaptiveParams<double> ActivationLayer::adaptive_params() const {
  if (!kind_.is_adaptive()) throw ContractError("activation " + kind_.name() + " has no adaptive parameters");
  return {params[0], params[1], params[2], params[3]};
}

void ActivationLayer::set_adaptive_params(const AdaptiveParams<double>& p) {
  if (!kind_.is_adaptive()) throw ContractError("activation " + kind_.name() + " has no adaptive parameters");
  if (!p.finite()) throw NumericError("activation: non-finite adaptive parameters");
  params[0] = p.a;
  params[1] = p.b;
  params[2] = p.c;
  params[3] = p.d;
}

double ActivationLayer::prelu_slope() const {
  if (kind_.tag != ActivationKind::Tag::PReLU) throw ContractError("activation " + kind_.name() + " has no slope");
  return params[0];
}

void ActivationLayer::set_prelu_slope(double slope) {
  if (kind_.tag != ActivationKind::Tag::PReLU) throw ContractError("activation " + kind_.name() + " has no slope");
  params[0] = slope;
}

TensorXd ActivationLayer::evaluate(const TensorXd& z) const {
  if (kind_.is_adaptive()) return adaptive_forward(kind_, adaptive_params(), z);
  if (kind_.tag == ActivationKind::Tag::PReLU) return prelu_forward(params[0], z);
  return fixed_forward(kind_, z);
}

TensorXd ActivationLayer::forward(const TensorXd& x, std::uint64_t stamp) {
  TensorXd y = evaluate(x);
  z_ = x;
  cache_stamp_ = stamp;
  return y;
}

TensorXd ActivationLayer::backward(const TensorXd& g, std::uint64_t stamp) {
  check_stamp(stamp);
  if (g.shape() != z_.shape()) throw DimensionError("activation backward: gradient shape " + shape_string(g.shape()));
  TensorXd dz;
  if (kind_.is_adaptive()) {
    auto r = adaptive_backward(kind_, adaptive_params(), z_, g);
    dparams[0] = r.dp.a;
    dparams[1] = r.dp.b;
    dparams[2] = r.dp.c;
    dparams[3] = r.dp.d;
    dz = std::move(r.dz);
  } else if (kind_.tag == ActivationKind::Tag::PReLU) {
    auto r = prelu_backward(params[0], z_, g);
    dparams[0] = r.dslope;
    dz = std::move(r.dz);
  } else {
    dz = fixed_grad(kind_, z_);
    dz.values().array() *= g.values().array();
  }
  z_ = TensorXd();
  cache_stamp_ = 0;
  return dz;
}

void ActivationLayer::collect_params(std::vector<ParamRef>& out) {
  if (has_params()) out.push_back({kind_.name(), ParamRef::Role::Activation, &params, &dparams, !frozen});
}

double ActivationLayer::kink_margin() const {
  using Tag = ActivationKind::Tag;
  if (!kind_.has_kink() || z_.empty()) return kInf;
  double m = kInf;
  if (kind_.tag == Tag::AReLU) {
    const auto p = adaptive_params();
    for (Index i = 0; i < z_.size(); ++i) m = std::min(m, std::abs((p.a - p.b) * z_[i] + (p.c - p.d)));
  } else if (kind_.tag == Tag::PReLU) {
    for (Index i = 0; i < z_.size(); ++i) m = std::min(m, std::abs((params[0] - 1.0) * z_[i]));
  } else {
    for (Index i = 0; i < z_.size(); ++i) m = std::min(m, std::abs(z_[i]));
  }
  return m;
}

void ActivationLayer::append_branches(std::vector<std::int64_t>& out) const {
  using Tag = ActivationKind::Tag;
  if (!kind_.has_kink()) return;
  if (kind_.tag == Tag::AReLU) {
    const auto p = adaptive_params();
    for (Index i = 0; i < z_.size(); ++i)
      out.push_back(scalar::first_branch_active(p.a * z_[i] + p.c, p.b * z_[i] + p.d, p.a, p.b));
  } else {
    for (Index i = 0; i < z_.size(); ++i) out.push_back(z_[i] > 0.0);
  }
}

ResidualBlock::ResidualBlock(const ResidualBlock& other) : Layer(other) {
  for (const auto& l : other.body_) body_.push_back(l->clone());
}

TensorXd ResidualBlock::forward(const TensorXd& x, std::uint64_t stamp) {
  TensorXd y = x;
  for (auto& l : body_) y = l->forward(y, stamp);
  if (y.shape() != x.shape())
    throw DimensionError("residual: body changed shape " + shape_string(x.shape()) + " -> " + shape_string(y.shape()));
  y.values() += x.values();
  cache_stamp_ = stamp;
  return y;
}

TensorXd ResidualBlock::backward(const TensorXd& g, std::uint64_t stamp) {
  check_stamp(stamp);
  TensorXd gb = g;
  for (auto it = body_.rbegin(); it != body_.rend(); ++it) gb = (*it)->backward(gb, stamp);
  gb.values() += g.values();
  cache_stamp_ = 0;
  return gb;
}

void ResidualBlock::collect_params(std::vector<ParamRef>& out) {
  for (auto& l : body_) l->collect_params(out);
}

void ResidualBlock::collect_layers(std::vector<Layer*>& out) {
  out.push_back(this);
  for (auto& l : body_) l->collect_layers(out);
}

double ResidualBlock::kink_margin() const {
  double m = kInf;
  for (const auto& l : body_) m = std::min(m, l->kink_margin());
  return m;
}

void ResidualBlock::append_branches(std::vector<std::int64_t>& out) const {
  for (const auto& l : body_) l->append_branches(out);
}

// ---------------------------------------------------------------- model

Model::Model(ModelSpec spec, std::vector<std::unique_ptr<Layer>> layers)
    : spec_(std::move(spec)), layers_(std::move(layers)) {}

Model::Model(const Model& other)
    : spec_(other.spec_), stamp_(other.stamp_), backward_pending_(other.backward_pending_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

TensorXd Model::forward(const TensorXd& batch) {
  Shape expected{batch.rank() > 0 ? batch.dim(0) : 0};
  expected.insert(expected.end(), spec_.input_shape.begin(), spec_.input_shape.end());
  if (batch.shape() != expected)
    throw DimensionError("model forward: batch " + shape_string(batch.shape()) + " does not match input " +
                         shape_string(spec_.input_shape));
  ++stamp_;
  TensorXd x = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      x = layers_[i]->forward(x, stamp_);
    } catch (const NumericError& e) {
      throw NumericError("model forward: layer " + std::to_string(i) + " (" + layers_[i]->type() + "): " + e.what());
    }
    if (!x.all_finite())
      throw NumericError("model forward: non-finite value after layer " + std::to_string(i) + " (" +
                         layers_[i]->type() + ")");
  }
  backward_pending_ = true;
  return x;
}

GradientSet Model::backward(const TensorXd& d_logits) {
  if (!backward_pending_) throw ContractError("model backward: no matching forward pass");
  backward_pending_ = false;
  TensorXd g = d_logits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g, stamp_);
  return {parameters()};
}

std::vector<ParamRef> Model::parameters() {
  std::vector<ParamRef> raw;
  for (auto& l : layers_) l->collect_params(raw);
  Index weight_ordinal = 0, bias_ordinal = 0, act_ordinal = 0;
  for (auto& p : raw) {
    switch (p.role) {
      case ParamRef::Role::Weight: p.name = "layer" + std::to_string(weight_ordinal++) + ".w"; break;
      case ParamRef::Role::Bias: p.name = "layer" + std::to_string(bias_ordinal++) + ".b"; break;
      case ParamRef::Role::Activation: p.name = "act" + std::to_string(act_ordinal++) + "." + p.name; break;
    }
  }
  return raw;
}

std::vector<ParamRef> Model::weight_parameters() {
  std::vector<ParamRef> out;
  for (auto& p : parameters())
    if (p.role == ParamRef::Role::Weight) out.push_back(p);
  return out;
}

std::vector<Layer*> Model::flat_layers() const {
  std::vector<Layer*> all;
  for (const auto& l : layers_) l->collect_layers(all);
  return all;
}

std::vector<ActivationLayer*> Model::activation_sites() {
  std::vector<ActivationLayer*> out;
  for (Layer* l : flat_layers())
    if (auto* a = dynamic_cast<ActivationLayer*>(l)) out.push_back(a);
  return out;
}

std::vector<const ActivationLayer*> Model::activation_sites() const {
  std::vector<const ActivationLayer*> out;
  for (Layer* l : flat_layers())
    if (auto* a = dynamic_cast<const ActivationLayer*>(l)) out.push_back(a);
  return out;
}

void Model::set_activation_frozen(bool frozen) {
  for (auto* a : activation_sites()) a->frozen = frozen;
}

double Model::kink_margin() const {
  double m = kInf;
  for (const auto& l : layers_) m = std::min(m, l->kink_margin());
  return m;
}

std::vector<std::int64_t> Model::branch_signature() const {
  std::vector<std::int64_t> out;
  for (const auto& l : layers_) l->append_branches(out);
  return out;
}

// ---------------------------------------------------------------- init

namespace {

void glorot_fill(TensorXd& t, Index fan_in, Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  t = rand_uniform(rng, t.shape(), -bound, bound);
}

std::unique_ptr<Layer> build_layer(const LayerDesc& d, Rng& rng) {
  using T = LayerDesc::Type;
  switch (d.type) {
    case T::Dense: {
      auto l = std::make_unique<DenseLayer>(d.in, d.out);
      glorot_fill(l->w, d.in, d.out, rng);
      return l;
    }
    case T::Conv2d: {
      auto l = std::make_unique<Conv2dLayer>(d.in, d.out, d.kernel, d.stride, d.padding);
      const Index area = d.kernel * d.kernel;
      glorot_fill(l->kernels, d.in * area, d.out * area, rng);
      return l;
    }
    case T::MaxPool: return std::make_unique<MaxPoolLayer>(d.kernel, d.stride);
    case T::Flatten: return std::make_unique<FlattenLayer>();
    case T::Activation: return std::make_unique<ActivationLayer>(d.activation);
    case T::Residual: {
      std::vector<std::unique_ptr<Layer>> body;
      for (const auto& inner : d.body) body.push_back(build_layer(inner, rng));
      return std::make_unique<ResidualBlock>(std::move(body));
    }
  }
  throw SpecError("unknown layer type");
}

}  // namespace

Model init(const ModelSpec& spec, Rng& rng) {
  validate(spec);
  std::vector<std::unique_ptr<Layer>> layers;
  for (const auto& d : spec.layers) layers.push_back(build_layer(d, rng));
  return Model(spec, std::move(layers));
}

ParamCensus param_census(Model& model) {
  ParamCensus c;
  for (const auto& p : model.parameters()) {
    if (p.role == ParamRef::Role::Activation)
      c.adaptive += p.value->size();
    else
      c.weights += p.value->size();
  }
  return c;
}

}  // namespace adact
