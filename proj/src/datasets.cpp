#include "adact/datasets.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

namespace adact {

void Dataset::validate(bool unit_range) const {
  if (images.rank() != 4) throw FormatError(name + ": images must be N x C x H x W");
  if (images.dim(0) != size()) throw FormatError(name + ": image count differs from label count");
  for (int l : labels)
    if (l < 0 || l >= classes) throw FormatError(name + ": label " + std::to_string(l) + " out of range");
  if (unit_range) {
    const auto v = images.values().array();
    if (images.size() > 0 && (v.minCoeff() < 0.0 || v.maxCoeff() > 1.0))
      throw FormatError(name + ": pixel outside [0, 1]");
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------- CIFAR-10

Dataset parse_cifar10_bin(std::span<const std::uint8_t> bytes, const std::string& name) {
  const auto total = static_cast<Index>(bytes.size());
  if (total % kCifarRecordBytes != 0)
    throw FormatError(name + ": length " + std::to_string(total) + " is not a multiple of 3073");
  const Index n = total / kCifarRecordBytes;
  const Index pixels = kCifarRecordBytes - 1;
  Dataset ds;
  ds.name = name;
  ds.classes = 10;
  ds.images = TensorXd({n, 3, kCifarSide, kCifarSide});
  ds.labels.resize(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] > 9) throw FormatError(name + ": record " + std::to_string(r) + " has label " + std::to_string(rec[0]));
    ds.labels[static_cast<std::size_t>(r)] = rec[0];
    double* dst = ds.images.data() + r * pixels;
    for (Index p = 0; p < pixels; ++p) dst[p] = rec[1 + p] / 255.0;
  }
  return ds;
}

Dataset load_cifar10_bin(const std::vector<std::filesystem::path>& paths) {
  std::vector<std::uint8_t> all;
  for (const auto& p : paths) {
    auto bytes = read_file(p);
    if (bytes.size() % kCifarRecordBytes != 0)
      throw FormatError(p.string() + ": length " + std::to_string(bytes.size()) + " is not a multiple of 3073");
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return parse_cifar10_bin(all);
}

std::vector<std::uint8_t> write_cifar10_bin(const Dataset& ds) {
  if (ds.sample_shape() != Shape{3, kCifarSide, kCifarSide}) throw FormatError("cifar10 writer: not 3x32x32 images");
  const Index pixels = kCifarRecordBytes - 1;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(ds.size() * kCifarRecordBytes));
  for (Index r = 0; r < ds.size(); ++r) {
    std::uint8_t* rec = out.data() + r * kCifarRecordBytes;
    rec[0] = static_cast<std::uint8_t>(ds.labels[static_cast<std::size_t>(r)]);
    const double* src = ds.images.data() + r * pixels;
    for (Index p = 0; p < pixels; ++p) rec[1 + p] = static_cast<std::uint8_t>(std::lround(src[p] * 255.0));
  }
  return out;
}

// ---------------------------------------------------------------- IDX

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const std::string& what) {
  if (bytes.size() < offset + 4) throw FormatError(what + ": truncated header");
  return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes,
                  const std::string& name) {
  const auto image_magic = read_be32(image_bytes, 0, name + " images");
  if (image_magic != 0x00000803) throw FormatError(name + ": bad image magic");
  const auto label_magic = read_be32(label_bytes, 0, name + " labels");
  if (label_magic != 0x00000801) throw FormatError(name + ": bad label magic");

  const Index n = read_be32(image_bytes, 4, name + " images");
  const Index h = read_be32(image_bytes, 8, name + " images");
  const Index w = read_be32(image_bytes, 12, name + " images");
  const Index n_labels = read_be32(label_bytes, 4, name + " labels");
  if (n != n_labels)
    throw FormatError(name + ": " + std::to_string(n) + " images but " + std::to_string(n_labels) + " labels");
  const auto payload = static_cast<unsigned __int128>(n) * static_cast<unsigned __int128>(h) * static_cast<unsigned __int128>(w);
  if (payload + 16 != image_bytes.size()) throw FormatError(name + ": image payload size mismatch");
  if (static_cast<Index>(label_bytes.size()) != 8 + n) throw FormatError(name + ": label payload size mismatch");

  Dataset ds;
  ds.name = name;
  ds.images = TensorXd({n, 1, h, w});
  for (Index i = 0; i < n * h * w; ++i) ds.images[i] = image_bytes[static_cast<std::size_t>(16 + i)] / 255.0;
  int max_label = -1;
  ds.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int l = label_bytes[static_cast<std::size_t>(8 + i)];
    ds.labels[static_cast<std::size_t>(i)] = l;
    max_label = std::max(max_label, l);
  }
  ds.classes = max_label + 1;
  return ds;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  return parse_idx(read_file(images), read_file(labels), images.stem().string());
}

// ---------------------------------------------------------------- synthetic

Dataset make_synthetic(const std::string& kind, Index n, Rng& rng) {
  int k = 0;
  bool spirals = false;
  if (kind == "spirals-2") {
    k = 2;
    spirals = true;
  } else if (kind.rfind("gaussians-", 0) == 0) {
    try {
      k = std::stoi(kind.substr(10));
    } catch (const std::exception&) {
      throw ArgumentError("make_synthetic: bad kind '" + kind + "'");
    }
    if (k < 2) throw ArgumentError("make_synthetic: need at least two classes");
  } else {
    throw ArgumentError("make_synthetic: unknown kind '" + kind + "'");
  }
  if (n < k) throw ArgumentError("make_synthetic: n=" + std::to_string(n) + " is below the class count");

  constexpr double kPi = 3.14159265358979323846;
  Dataset ds;
  ds.name = kind;
  ds.classes = k;
  ds.images = TensorXd({n, 1, 2, 1});
  ds.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % k);
    ds.labels[static_cast<std::size_t>(i)] = label;
    double x, y;
    if (spirals) {
      const double t = rng.uniform();
      const double r = 0.5 + 4.5 * t;
      const double theta = 3.0 * kPi * t + label * kPi;
      x = r * std::cos(theta) + 0.15 * rng.normal();
      y = r * std::sin(theta) + 0.15 * rng.normal();
    } else {
      const double angle = 2.0 * kPi * label / k;
      x = 3.0 * std::cos(angle) + rng.normal();
      y = 3.0 * std::sin(angle) + rng.normal();
    }
    ds.images[2 * i] = x;
    ds.images[2 * i + 1] = y;
  }
  return ds;
}

// ---------------------------------------------------------------- subsets

Dataset take(const Dataset& ds, std::span<const Index> indices) {
  Shape shape = ds.images.shape();
  const Index per = ds.images.size() / std::max<Index>(ds.size(), 1);
  shape[0] = static_cast<Index>(indices.size());
  Dataset out;
  out.name = ds.name;
  out.classes = ds.classes;
  out.images = TensorXd(shape);
  out.labels.reserve(indices.size());
  Index row = 0;
  for (Index idx : indices) {
    if (idx < 0 || idx >= ds.size()) throw ArgumentError("take: index out of range");
    std::copy_n(ds.images.data() + idx * per, per, out.images.data() + row * per);
    out.labels.push_back(ds.labels[static_cast<std::size_t>(idx)]);
    ++row;
  }
  return out;
}

std::pair<Dataset, Dataset> subset(const Dataset& ds, Index n_train, Index n_test, Rng& rng) {
  if (n_train < 0 || n_test < 0 || n_train + n_test > ds.size())
    throw ArgumentError("subset: " + std::to_string(n_train) + "+" + std::to_string(n_test) + " exceeds " +
                        std::to_string(ds.size()) + " samples");
  const auto perm = rng.permutation(ds.size());
  const std::span<const Index> all(perm);
  return {take(ds, all.subspan(0, static_cast<std::size_t>(n_train))),
          take(ds, all.subspan(static_cast<std::size_t>(n_train), static_cast<std::size_t>(n_test)))};
}

std::vector<Index> class_counts(const Dataset& ds) {
  std::vector<Index> counts(static_cast<std::size_t>(std::max(ds.classes, 0)), 0);
  for (int l : ds.labels) ++counts.at(static_cast<std::size_t>(l));
  return counts;
}

}  // namespace adact
