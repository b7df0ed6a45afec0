// Acceptance driver: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "adact/checkpoint.hpp"
#include "adact/datasets.hpp"
#include "adact/experiment.hpp"
#include "adact/gradcheck.hpp"
#include "adact/optimizer.hpp"
#include "adact/training.hpp"

using namespace adact;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  std::printf("criterion %d: %s %s (%s)\n", id, pass ? "PASS" : "FAIL", what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs a check body; an exception counts as a failure with its message.
void guarded(int id, const std::string& what, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, what, std::string("exception: ") + e.what());
  }
}

// ---------------------------------------------------------------- 1

void gradient_correctness() {
  guarded(1, "analytic gradients match central differences", [] {
    GradcheckOptions opts;
    opts.network_configs = 100;
    const auto t0 = std::chrono::steady_clock::now();
    auto lines = gradcheck_activations(opts);
    for (auto& l : gradcheck_loss(opts)) lines.push_back(l);
    for (auto& l : gradcheck_networks(opts)) lines.push_back(l);
    const double elapsed = seconds_since(t0);
    double worst = 0.0;
    std::string where;
    Index configs = 0;
    for (const auto& l : lines) {
      if (l.max_relative_error >= worst) {
        worst = l.max_relative_error;
        where = l.module + "/" + l.subject;
      }
      if (l.module == "network") configs += l.samples;
    }
    report(1, worst < 1e-4 && elapsed < 120.0 && configs >= 100, "analytic gradients match central differences",
           "max rel err " + num(worst) + " at " + where + ", " + std::to_string(configs) + " network configs, " +
               num(elapsed) + " s");
  });
}

// ---------------------------------------------------------------- 2

ExperimentConfig gaussians_config(const std::string& kind, bool freeze) {
  auto cfg = parse_config(R"({
    "version": 1, "seed": 2024,
    "dataset": {"name": "gaussians-3", "n": 600},
    "model": {"preset": "mlp-2", "hidden": 16},
    "activation": {"kind": "relu"},
    "optimizer": {"kind": "sgd", "rates": [0.1, 0.01, 0.001]},
    "epochs": 10, "batch_size": 32
  })");
  cfg.activation = *ActivationKind::parse(kind);
  cfg.freeze = freeze;
  cfg.name = kind + (freeze ? "-frozen" : "");
  return cfg;
}

void degeneracy(const fs::path& out) {
  guarded(2, "AReLU reduces exactly to ReLU and PReLU", [&] {
    const Index points = 100001;
    TensorXd z({points});
    for (Index i = 0; i < points; ++i) z[i] = -5.0 + 10.0 * static_cast<double>(i) / (points - 1);
    const TensorXd ones = TensorXd::constant({points}, 1.0);
    const auto arelu = ActivationKind::arelu();

    Index mismatches = 0;
    const auto relu_value = fixed_forward(ActivationKind::relu(), z);
    const auto relu_grad = fixed_grad(ActivationKind::relu(), z);
    const AdaptiveParams<double> as_relu{1, 0, 0, 0};
    const auto av = adaptive_forward(arelu, as_relu, z);
    const auto ag = adaptive_backward(arelu, as_relu, z, ones).dz;
    for (Index i = 0; i < points; ++i) mismatches += (av[i] != relu_value[i]) + (ag[i] != relu_grad[i]);

    for (double s : {0.01, 0.1, 0.25, 0.5, 0.9}) {
      const AdaptiveParams<double> as_prelu{s, 1, 0, 0};
      const auto pv = prelu_forward(s, z);
      const auto pg = prelu_backward(s, z, ones).dz;
      const auto qv = adaptive_forward(arelu, as_prelu, z);
      const auto qg = adaptive_backward(arelu, as_prelu, z, ones).dz;
      for (Index i = 0; i < points; ++i) {
        const double ref = std::max(s * z[i], z[i]);
        const double ref_grad = z[i] > 0.0 ? 1.0 : s;
        mismatches += (qv[i] != pv[i]) + (qv[i] != ref) + (qg[i] != pg[i]) + (qg[i] != ref_grad);
      }
    }

    const auto relu_run = run_experiment(gaussians_config("relu", false), out / "degeneracy_relu");
    const auto frozen_run = run_experiment(gaussians_config("arelu", true), out / "degeneracy_arelu_frozen");
    bool same = relu_run.records.size() == frozen_run.records.size() && relu_run.records.size() == 10;
    for (std::size_t e = 0; same && e < relu_run.records.size(); ++e) {
      const auto& x = relu_run.records[e];
      const auto& y = frozen_run.records[e];
      same = x.train_loss == y.train_loss && x.test_accuracy == y.test_accuracy &&
             x.deltas.size() == y.deltas.size();
      for (std::size_t l = 0; same && l < x.deltas.size(); ++l)
        same = x.deltas[l].mean_abs == y.deltas[l].mean_abs && x.deltas[l].tracked == y.deltas[l].tracked;
    }
    report(2, mismatches == 0 && same, "AReLU reduces exactly to ReLU and PReLU",
           std::to_string(mismatches) + " value/subgradient mismatches on a " + std::to_string(points) +
               "-point grid, frozen AReLU trajectory " + (same ? "bitwise equal" : "differs") +
               " to ReLU over 10 epochs");
  });
}

// ---------------------------------------------------------------- 3

// A dense layer followed by AReLU(a, a, 0, 0), which is the line a*z.
Model scaled_dense(double a, std::uint64_t seed) {
  ModelSpec spec;
  spec.preset = "custom";
  spec.input_shape = {4, 1, 1};
  spec.classes = 1;
  spec.activation = ActivationKind::arelu();
  spec.layers = {LayerDesc::flatten(), LayerDesc::dense(4, 1), LayerDesc::act(ActivationKind::arelu())};
  Rng rng(seed);
  Model m = init(spec, rng);
  m.activation_sites()[0]->set_adaptive_params({a, a, 0, 0});
  m.set_activation_frozen(true);
  return m;
}

Model plain_dense(std::uint64_t seed) {
  ModelSpec spec;
  spec.preset = "custom";
  spec.input_shape = {4, 1, 1};
  spec.classes = 1;
  spec.activation = ActivationKind::relu();
  spec.layers = {LayerDesc::flatten(), LayerDesc::dense(4, 1)};
  Rng rng(seed);
  return init(spec, rng);
}

void sgd_steps(Model& m, const std::vector<TensorXd>& inputs, double rate) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerConfig::Kind::SGD;
  cfg.schedule = {{1, rate}};
  OptimizerState<double> state;
  for (const auto& x : inputs) {
    m.forward(x);
    const auto grads = m.backward(TensorXd::constant({1, 1}, 1.0));  // L = sum of outputs
    std::vector<TensorXd*> params;
    std::vector<const TensorXd*> gs;
    for (const auto& p : grads.params) {
      if (!p.trainable) continue;
      params.push_back(p.value);
      gs.push_back(p.grad);
    }
    step<double>(cfg, state, params, gs, 0);
  }
}

void lr_scaling() {
  guarded(3, "input-scaled model under eta equals plain model under a*eta", [] {
    const double eta = 0x1.0p-7;
    Rng data(77);
    std::vector<TensorXd> inputs;
    for (int i = 0; i < 8; ++i) inputs.push_back(rand_uniform<double>(data, {1, 4, 1, 1}, -1.0, 1.0));
    double worst = 0.0;
    for (double a : {0.1, 0.5, 2.0, 10.0}) {
      Model scaled = scaled_dense(a, 5), plain = plain_dense(5);
      sgd_steps(scaled, inputs, eta);
      sgd_steps(plain, inputs, a * eta);
      const auto ws = scaled.weight_parameters(), wp = plain.weight_parameters();
      for (Index i = 0; i < ws[0].value->size(); ++i)
        worst = std::max(worst, std::abs((*ws[0].value)[i] - (*wp[0].value)[i]));
    }
    report(3, worst == 0.0, "input-scaled model under eta equals plain model under a*eta",
           "max |w difference| " + num(worst) + " for a in {0.1, 0.5, 2, 10}, eta = 2^-7, 8 SGD steps");
  });
}

// ---------------------------------------------------------------- 4

double closed_form_a(ActivationKind kind, const AdaptiveParams<double>& p, const TensorXd& w,
                     const std::vector<std::array<double, 3>>& xs, const std::vector<int>& labels, double eta) {
  // independent forward/backward for a one-layer model, bias zero
  const double n = static_cast<double>(xs.size());
  double grad_a = 0.0;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    double zs[2], ys[2];
    for (int j = 0; j < 2; ++j) {
      zs[j] = 0.0;
      for (int i = 0; i < 3; ++i) zs[j] += w[j * 3 + i] * xs[s][static_cast<std::size_t>(i)];
      const double u = p.a * zs[j] + p.c;
      ys[j] = p.b * (kind.tag == ActivationKind::Tag::ASigmoid ? 1.0 / (1.0 + std::exp(-u)) : std::tanh(u)) + p.d;
    }
    const double m = std::max(ys[0], ys[1]);
    const double e0 = std::exp(ys[0] - m), e1 = std::exp(ys[1] - m);
    for (int j = 0; j < 2; ++j) {
      const double soft = (j == 0 ? e0 : e1) / (e0 + e1);
      const double upstream = (soft - (labels[s] == j ? 1.0 : 0.0)) / n;
      const double u = p.a * zs[j] + p.c;
      double fprime;
      if (kind.tag == ActivationKind::Tag::ASigmoid) {
        const double sg = 1.0 / (1.0 + std::exp(-u));
        fprime = sg * (1.0 - sg);
      } else {
        fprime = 1.0 - std::tanh(u) * std::tanh(u);
      }
      grad_a += upstream * p.b * fprime * zs[j];
    }
  }
  return p.a - eta * grad_a;
}

void adaptive_update_rule() {
  guarded(4, "SGD update of the slope parameter matches the closed form", [] {
    double worst = 0.0, least_move = 1.0;
    Rng rng(31);
    for (auto kind : {ActivationKind::asigmoid(), ActivationKind::atanh()}) {
      for (int trial = 0; trial < 20; ++trial) {
        ModelSpec spec;
        spec.preset = "custom";
        spec.input_shape = {3, 1, 1};
        spec.classes = 2;
        spec.activation = kind;
        spec.layers = {LayerDesc::flatten(), LayerDesc::dense(3, 2), LayerDesc::act(kind)};
        Model m = init(spec, rng);
        const AdaptiveParams<double> p{0.5 + rng.uniform(), 0.5 + rng.uniform(), 0.6 * rng.uniform() - 0.3,
                                       0.6 * rng.uniform() - 0.3};
        m.activation_sites()[0]->set_adaptive_params(p);
        TensorXd w;
        for (auto& ref : m.parameters()) {
          if (ref.role == ParamRef::Role::Bias) ref.value->values().setZero();
          if (ref.role == ParamRef::Role::Weight) w = *ref.value;
        }
        const Index n = 4;
        std::vector<std::array<double, 3>> xs(n);
        std::vector<int> labels(n);
        TensorXd batch({n, 3, 1, 1});
        for (Index s = 0; s < n; ++s) {
          for (int i = 0; i < 3; ++i) batch[s * 3 + i] = xs[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] = 2.0 * rng.uniform() - 1.0;
          labels[static_cast<std::size_t>(s)] = static_cast<int>(rng.below(2));
        }
        const double eta = 0.1;
        const double expected = closed_form_a(kind, p, w, xs, labels, eta);

        const auto loss = cross_entropy_batch(m.forward(batch), labels);
        const auto grads = m.backward(loss.d_logits);
        std::vector<TensorXd*> params;
        std::vector<const TensorXd*> gs;
        for (const auto& ref : grads.params) {
          params.push_back(ref.value);
          gs.push_back(ref.grad);
        }
        OptimizerConfig cfg;
        cfg.kind = OptimizerConfig::Kind::SGD;
        cfg.schedule = {{1, eta}};
        OptimizerState<double> state;
        step<double>(cfg, state, params, gs, 0);
        const double a_new = m.activation_sites()[0]->adaptive_params().a;
        worst = std::max(worst, std::abs(a_new - expected));
        least_move = std::min(least_move, std::abs(a_new - p.a));
      }
    }
    report(4, worst <= 1e-12 && least_move > 0.0, "SGD update of the slope parameter matches the closed form",
           "max |a_new - closed form| " + num(worst) + ", min |a_new - a| " + num(least_move) +
               " over 40 ASigmoid/ATanh draws");
  });
}

// ---------------------------------------------------------------- 5

void optimizer_oracles() {
  guarded(5, "optimizer steps match hand-computed oracles", [] {
    using Kind = OptimizerConfig::Kind;
    struct Case {
      Kind kind;
      double w0, g, rate, first, second;
    };
    // reference values computed independently at 50 significant digits
    const Case cases[] = {
        {Kind::SGD, 1.0, 0.5, 0.1, 0.95, 0.90},
        {Kind::Momentum, 1.0, 0.5, 0.1, 0.95, 0.855},
        {Kind::AdaGrad, 1.0, 2.0, 0.1, 0.9000000004999999975, 0.82928932263134524417},
        {Kind::AdaDelta, 1.0, 0.5, 0.001, 0.99955278658338537292, 0.99909987595321436907},
        {Kind::Adam, 1.0, 0.5, 0.001, 0.9990000000199999996, 0.9980000000399999992},
    };
    double worst = 0.0;
    for (const auto& c : cases) {
      OptimizerConfig cfg;
      cfg.kind = c.kind;
      cfg.schedule = {{1, c.rate}};
      OptimizerState<double> state;
      TensorXd w({1}, {c.w0});
      const TensorXd g({1}, {c.g});
      std::vector<TensorXd*> params{&w};
      std::vector<const TensorXd*> grads{&g};
      step<double>(cfg, state, params, grads, 0);
      worst = std::max(worst, std::abs(w[0] - c.first));
      step<double>(cfg, state, params, grads, 0);
      worst = std::max(worst, std::abs(w[0] - c.second));
    }
    report(5, worst <= 1e-12, "optimizer steps match hand-computed oracles",
           "max deviation " + num(worst) + " over SGD, momentum, AdaGrad, AdaDelta, Adam (two steps each)");
  });
}

// ---------------------------------------------------------------- 8

std::vector<std::uint8_t> be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8),
          static_cast<std::uint8_t>(v)};
}

void formats_and_determinism(const fs::path& out) {
  guarded(8, "file formats round-trip, malformed input is rejected, runs are reproducible", [&] {
    Rng rng(8);
    // CIFAR-10 records with arbitrary pixels
    std::vector<std::uint8_t> cifar(static_cast<std::size_t>(20 * kCifarRecordBytes));
    for (std::size_t i = 0; i < cifar.size(); ++i)
      cifar[i] = static_cast<std::uint8_t>(i % kCifarRecordBytes == 0 ? rng.below(10) : rng.below(256));
    const bool round_trip = write_cifar10_bin(parse_cifar10_bin(cifar)) == cifar;

    // IDX: 500 structurally broken variants of a valid pair
    const std::uint32_t n = 6, h = 4, w = 3;
    std::vector<std::uint8_t> images = be32(0x803), labels = be32(0x801);
    for (auto v : {n, h, w}) {
      const auto b = be32(v);
      images.insert(images.end(), b.begin(), b.end());
    }
    const auto nb = be32(n);
    labels.insert(labels.end(), nb.begin(), nb.end());
    for (std::uint32_t i = 0; i < n * h * w; ++i) images.push_back(static_cast<std::uint8_t>(rng.below(256)));
    for (std::uint32_t i = 0; i < n; ++i) labels.push_back(static_cast<std::uint8_t>(rng.below(10)));
    bool valid_ok = true;
    try {
      parse_idx(images, labels);
    } catch (const std::exception&) {
      valid_ok = false;
    }
    int rejected = 0, tried = 0;
    for (; tried < 500; ++tried) {
      auto im = images, lb = labels;
      switch (rng.below(6)) {
        case 0: im.resize(rng.below(im.size())); break;
        case 1: lb.resize(rng.below(lb.size())); break;
        case 2: im[rng.below(4)] ^= static_cast<std::uint8_t>(1 + rng.below(255)); break;
        case 3: lb[rng.below(4)] ^= static_cast<std::uint8_t>(1 + rng.below(255)); break;
        case 4: im[4 + rng.below(12)] ^= static_cast<std::uint8_t>(1 + rng.below(255)); break;
        default: im.push_back(static_cast<std::uint8_t>(rng.below(256))); break;
      }
      try {
        parse_idx(im, lb);
      } catch (const FormatError&) {
        ++rejected;
      } catch (const std::exception&) {
      }
    }

    // identical configs give byte-identical artifacts
    auto cfg = gaussians_config("arelu", false);
    cfg.epochs = 4;
    run_experiment(cfg, out / "determinism_a");
    run_experiment(cfg, out / "determinism_b");
    bool identical = true;
    for (const char* f : {"run.csv", "deltas.csv", "shapes.csv", "summary.txt", "checkpoint.json"})
      identical = identical && slurp(out / "determinism_a" / f) == slurp(out / "determinism_b" / f);

    report(8, round_trip && valid_ok && rejected == tried && identical,
           "file formats round-trip, malformed input is rejected, runs are reproducible",
           std::string("CIFAR-10 round trip ") + (round_trip ? "exact" : "differs") + ", " +
               std::to_string(rejected) + "/" + std::to_string(tried) + " malformed IDX inputs rejected, run files " +
               (identical ? "byte-identical" : "differ"));
  });
}

// ---------------------------------------------------------------- 6, 7

struct CifarRun {
  ExperimentResult result;
  fs::path dir;
};

CifarRun run_cifar(const fs::path& config, const fs::path& data_dir, const fs::path& out, std::uint64_t seed) {
  auto cfg = load_config(config);
  cfg.dataset.root = data_dir;
  cfg.seed = seed;
  const auto dir = out / (cfg.name + "-seed" + std::to_string(seed));
  return {run_experiment(cfg, dir), dir};
}

double early_increment(const ExperimentResult& r) {
  double total = 0.0;
  Index count = 0;
  for (std::size_t e = 0; e < std::min<std::size_t>(5, r.records.size()); ++e)
    for (const auto& d : r.records[e].deltas)
      if (!d.tracked.empty()) {
        total += d.mean_abs;
        ++count;
      }
  return count ? total / static_cast<double>(count) : 0.0;
}

struct PairVerdict {
  bool area, increment, accuracy;
  std::string detail;
};

PairVerdict judge(const CifarRun& arelu, const CifarRun& relu) {
  const double inc_a = early_increment(arelu.result), inc_r = early_increment(relu.result);
  PairVerdict v{arelu.result.area <= relu.result.area, inc_a > inc_r,
                arelu.result.final_accuracy >= relu.result.final_accuracy - 0.01, ""};
  v.detail = "area " + num(arelu.result.area) + " vs " + num(relu.result.area) + ", early mean |dw| " + num(inc_a) +
             " vs " + num(inc_r) + ", accuracy " + num(arelu.result.final_accuracy) + " vs " +
             num(relu.result.final_accuracy);
  return v;
}

void cifar(const fs::path& data_dir, const fs::path& out, bool sweep) {
  const fs::path configs = fs::path(ADACT_SOURCE_DIR) / "configs" / "cifar10";
  const std::string what6 = "cnn-mini AReLU beats ReLU on CIFAR-10 (area, early increments, accuracy)";
  const std::string what7 = "trained AReLU sites take distinct shapes";
  for (const char* f : {"data_batch_1.bin", "test_batch.bin"})
    if (!fs::exists(data_dir / f)) {
      const std::string why = "CIFAR-10 binary " + (data_dir / f).string() + " not found";
      report(6, false, what6, why);
      report(7, false, what7, why);
      return;
    }
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const auto arelu = run_cifar(configs / "cnn-mini-arelu.json", data_dir, out, 1234);
    const auto relu = run_cifar(configs / "cnn-mini-relu.json", data_dir, out, 1234);
    const double elapsed = seconds_since(t0);
    const auto v = judge(arelu, relu);
    std::string detail = v.detail + ", pair took " + num(elapsed / 60.0) + " min";
    if (sweep) {
      int passes[3] = {0, 0, 0};
      for (std::uint64_t seed : {1, 2, 3}) {
        const auto s = judge(run_cifar(configs / "cnn-mini-arelu.json", data_dir, out, seed),
                             run_cifar(configs / "cnn-mini-relu.json", data_dir, out, seed));
        passes[0] += s.area;
        passes[1] += s.increment;
        passes[2] += s.accuracy;
        std::printf("  seed %llu: %s\n", static_cast<unsigned long long>(seed), s.detail.c_str());
      }
      detail += ", seeds 1-3 pass counts area " + std::to_string(passes[0]) + "/3 increments " +
                std::to_string(passes[1]) + "/3 accuracy " + std::to_string(passes[2]) + "/3";
    }
    report(6, v.area && v.increment && v.accuracy && elapsed <= 1800.0, what6, detail);

    const auto ck = load_checkpoint(arelu.dir / "checkpoint.json");
    const auto traces = activation_shape_trace(ck.model, default_shape_grid());
    double gap = 0.0;
    for (std::size_t i = 0; i < traces.size(); ++i)
      for (std::size_t j = i + 1; j < traces.size(); ++j) gap = std::max(gap, max_trace_gap(traces[i], traces[j]));
    report(7, gap > 1e-3, what7, "max pairwise gap " + num(gap) + " over " + std::to_string(traces.size()) + " sites");
  } catch (const std::exception& e) {
    report(6, false, what6, std::string("exception: ") + e.what());
    report(7, false, what7, "no trained AReLU model");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  bool core = false, run_cifar_checks = false, no_sweep = false;
  std::string cifar_dir = "data/cifar-10-batches-bin";
  std::string out = "acceptance_runs";
  app.add_flag("--core", core, "criteria 1-5 and 8");
  app.add_flag("--cifar", run_cifar_checks, "criteria 6 and 7 (CIFAR-10 training runs)");
  app.add_flag("--no-sweep", no_sweep, "skip the seeds 1-3 repetition of criterion 6");
  app.add_option("--cifar-dir", cifar_dir, "directory holding the CIFAR-10 binary batches");
  app.add_option("--out", out, "directory for run artifacts");
  CLI11_PARSE(app, argc, argv);
  if (!core && !run_cifar_checks) core = run_cifar_checks = true;

  const fs::path out_dir = out;
  fs::create_directories(out_dir);
  if (core) {
    gradient_correctness();
    degeneracy(out_dir);
    lr_scaling();
    adaptive_update_rule();
    optimizer_oracles();
    formats_and_determinism(out_dir);
  }
  if (run_cifar_checks) cifar(cifar_dir, out_dir, !no_sweep);
  std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
