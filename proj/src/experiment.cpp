#include "adact/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "adact/checkpoint.hpp"

namespace adact {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------- parsing

namespace {

std::string join_key(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

class Reader {
 public:
  std::vector<std::string> issues;

  void add(const std::string& path, const std::string& msg) { issues.push_back(path + ": " + msg); }

  void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
        add(join_key(path, it.key()), "unknown key");
  }

  const json* field(const json& obj, const std::string& path, const std::string& key, bool required) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) add(join_key(path, key), "missing");
      return nullptr;
    }
    return &*it;
  }

  const json* object(const json& obj, const std::string& path, const std::string& key, bool required) {
    const json* v = field(obj, path, key, required);
    if (v && !v->is_object()) {
      add(join_key(path, key), "expected an object");
      return nullptr;
    }
    return v;
  }

  std::optional<std::string> string(const json& obj, const std::string& path, const std::string& key, bool required) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      add(join_key(path, key), "expected a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<Index> integer(const json& obj, const std::string& path, const std::string& key, bool required,
                               Index min_value) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) {
      add(join_key(path, key), "expected an integer");
      return std::nullopt;
    }
    if (v->is_number_unsigned() && v->get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<Index>::max())) {
      add(join_key(path, key), "out of range");
      return std::nullopt;
    }
    const auto x = v->get<Index>();
    if (x < min_value) {
      add(join_key(path, key), "must be >= " + std::to_string(min_value));
      return std::nullopt;
    }
    return x;
  }

  std::optional<double> number(const json& obj, const std::string& path, const std::string& key, double lo, double hi,
                               bool lo_open, bool hi_open) {
    const json* v = field(obj, path, key, false);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      add(join_key(path, key), "expected a number");
      return std::nullopt;
    }
    const double x = v->get<double>();
    const bool ok = (lo_open ? x > lo : x >= lo) && (hi_open ? x < hi : x <= hi);
    if (!ok) {
      add(join_key(path, key), "out of range");
      return std::nullopt;
    }
    return x;
  }

  std::optional<bool> boolean(const json& obj, const std::string& path, const std::string& key) {
    const json* v = field(obj, path, key, false);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) {
      add(join_key(path, key), "expected true or false");
      return std::nullopt;
    }
    return v->get<bool>();
  }

  std::optional<std::vector<std::string>> strings(const json& obj, const std::string& path, const std::string& key) {
    const json* v = field(obj, path, key, false);
    if (!v) return std::nullopt;
    if (!v->is_array() || std::any_of(v->begin(), v->end(), [](const json& e) { return !e.is_string(); })) {
      add(join_key(path, key), "expected an array of strings");
      return std::nullopt;
    }
    return v->get<std::vector<std::string>>();
  }
};

bool is_synthetic(const std::string& name) { return name == "spirals-2" || name.rfind("gaussians-", 0) == 0; }

void parse_dataset(const json& j, Reader& r, DatasetConfig& d) {
  const std::string p = "dataset";
  r.check_keys(j, p, {"name", "n", "paths", "test_paths", "images", "labels", "test_images", "test_labels", "train",
                      "test", "root"});
  if (auto name = r.string(j, p, "name", true)) {
    d.name = *name;
    if (is_synthetic(d.name)) {
      if (d.name != "spirals-2") {
        const auto k = d.name.substr(10);
        if (k.empty() || !std::all_of(k.begin(), k.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
            k.size() > 6 || std::stoi(k) < 2)
          r.add(p + ".name", "unknown dataset '" + d.name + "'");
      }
      if (auto n = r.integer(j, p, "n", true, 1)) d.n = *n;
    } else if (d.name == "cifar10") {
      if (auto v = r.strings(j, p, "paths")) d.paths = *v;
      if (d.paths.empty()) r.add(p + ".paths", "cifar10 needs at least one file");
      if (auto v = r.strings(j, p, "test_paths")) d.test_paths = *v;
    } else if (d.name == "idx") {
      if (auto v = r.string(j, p, "images", true)) d.images = *v;
      if (auto v = r.string(j, p, "labels", true)) d.labels = *v;
      if (auto v = r.string(j, p, "test_images", false)) d.test_images = *v;
      if (auto v = r.string(j, p, "test_labels", false)) d.test_labels = *v;
      if (d.test_images.empty() != d.test_labels.empty())
        r.add(p + ".test_images", "test_images and test_labels go together");
    } else {
      r.add(p + ".name", "unknown dataset '" + d.name + "'");
    }
  }
  if (auto v = r.integer(j, p, "train", false, 0)) d.train = *v;
  if (auto v = r.integer(j, p, "test", false, 0)) d.test = *v;
  if (auto v = r.string(j, p, "root", false)) d.root = *v;
}

void parse_model(const json& j, Reader& r, ExperimentConfig& cfg) {
  const std::string p = "model";
  r.check_keys(j, p, {"preset", "hidden", "channels"});
  if (auto preset = r.string(j, p, "preset", true)) {
    const auto& names = preset_names();
    if (std::find(names.begin(), names.end(), *preset) == names.end())
      r.add(p + ".preset", "unknown preset '" + *preset + "'");
    cfg.preset = *preset;
  }
  if (auto h = r.integer(j, p, "hidden", false, 1)) cfg.preset_options.hidden = *h;
  if (const json* c = r.field(j, p, "channels", false)) {
    if (!c->is_array() || c->size() != 3 ||
        std::any_of(c->begin(), c->end(), [](const json& e) { return !e.is_number_integer() || e.get<Index>() < 1; }))
      r.add(p + ".channels", "expected three positive integers");
    else
      for (std::size_t i = 0; i < 3; ++i) cfg.preset_options.channels[i] = (*c)[i].get<Index>();
  }
}

void parse_activation(const json& j, Reader& r, ExperimentConfig& cfg) {
  const std::string p = "activation";
  r.check_keys(j, p, {"kind", "param", "freeze"});
  if (auto kind = r.string(j, p, "kind", true)) {
    if (auto k = ActivationKind::parse(*kind))
      cfg.activation = *k;
    else
      r.add(p + ".kind", "unknown activation '" + *kind + "'");
  }
  if (auto param = r.number(j, p, "param", 0.0, INFINITY, true, true)) {
    if (cfg.activation.tag == ActivationKind::Tag::LReLU)
      cfg.activation = ActivationKind::lrelu(*param);
    else if (cfg.activation.tag == ActivationKind::Tag::Swish)
      cfg.activation = ActivationKind::swish(*param);
    else
      r.add(p + ".param", "only lrelu and swish take a parameter");
  }
  if (auto f = r.boolean(j, p, "freeze")) cfg.freeze = *f;
}

void parse_optimizer(const json& j, Reader& r, ExperimentConfig& cfg) {
  const std::string p = "optimizer";
  r.check_keys(j, p, {"kind", "rates", "schedule", "momentum", "epsilon", "beta1", "beta2", "rho"});
  auto& o = cfg.optimizer;
  if (auto kind = r.string(j, p, "kind", true)) {
    if (auto k = OptimizerConfig::parse_kind(*kind))
      o.kind = *k;
    else
      r.add(p + ".kind", "unknown optimizer '" + *kind + "'");
  }
  if (const json* rates = r.field(j, p, "rates", false)) {
    if (!rates->is_array() || rates->empty() ||
        std::any_of(rates->begin(), rates->end(), [](const json& e) { return !e.is_number() || !(e.get<double>() > 0.0); }))
      r.add(p + ".rates", "expected a non-empty array of positive numbers");
    else
      cfg.rates = rates->get<std::vector<double>>();
  }
  if (const json* sched = r.field(j, p, "schedule", false)) {
    if (j.contains("rates")) r.add(p + ".schedule", "give either rates or schedule, not both");
    if (!sched->is_array() || sched->empty()) {
      r.add(p + ".schedule", "expected a non-empty array of {epochs, rate}");
    } else {
      for (std::size_t i = 0; i < sched->size(); ++i) {
        const auto sp = p + ".schedule[" + std::to_string(i) + "]";
        const json& s = (*sched)[i];
        if (!s.is_object()) {
          r.add(sp, "expected an object");
          continue;
        }
        r.check_keys(s, sp, {"epochs", "rate"});
        const auto e = r.integer(s, sp, "epochs", true, 1);
        const json* rate = r.field(s, sp, "rate", true);
        if (rate && (!rate->is_number() || !(rate->get<double>() > 0.0))) {
          r.add(sp + ".rate", "must be a positive number");
          rate = nullptr;
        }
        if (e && rate) o.schedule.push_back({*e, rate->get<double>()});
      }
    }
  }
  if (auto v = r.number(j, p, "momentum", 0.0, 1.0, false, true)) o.momentum = *v;
  if (auto v = r.number(j, p, "epsilon", 0.0, INFINITY, true, true)) o.epsilon = *v;
  if (auto v = r.number(j, p, "beta1", 0.0, 1.0, false, true)) o.beta1 = *v;
  if (auto v = r.number(j, p, "beta2", 0.0, 1.0, false, true)) o.beta2 = *v;
  if (auto v = r.number(j, p, "rho", 0.0, 1.0, true, true)) o.rho = *v;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError({std::string("(document): ") + e.what()});
  }
  if (!j.is_object()) throw ConfigError({"(document): expected an object"});

  Reader r;
  ExperimentConfig cfg;
  r.check_keys(j, "", {"version", "name", "seed", "dataset", "model", "activation", "optimizer", "epochs",
                       "batch_size", "tracked_layers", "tracked_weights", "output"});
  if (auto v = r.integer(j, "", "version", true, 0); v && *v != kConfigVersion)
    r.add("version", "unsupported version " + std::to_string(*v));
  if (auto v = r.string(j, "", "name", false)) cfg.name = *v;
  if (const json* seed = r.field(j, "", "seed", true)) {
    if (seed->is_number_unsigned())
      cfg.seed = seed->get<std::uint64_t>();
    else
      r.add("seed", "expected a non-negative integer");
  }
  if (const json* d = r.object(j, "", "dataset", true)) parse_dataset(*d, r, cfg.dataset);
  if (const json* m = r.object(j, "", "model", true)) parse_model(*m, r, cfg);
  if (const json* a = r.object(j, "", "activation", true)) parse_activation(*a, r, cfg);
  if (const json* o = r.object(j, "", "optimizer", true)) parse_optimizer(*o, r, cfg);
  if (auto v = r.integer(j, "", "epochs", true, 1)) cfg.epochs = *v;
  if (auto v = r.integer(j, "", "batch_size", false, 1)) cfg.batch_size = *v;
  if (const json* t = r.field(j, "", "tracked_layers", false)) {
    if (!t->is_array() ||
        std::any_of(t->begin(), t->end(), [](const json& e) { return !e.is_number_integer() || e.get<Index>() < 0; }))
      r.add("tracked_layers", "expected an array of non-negative integers");
    else
      cfg.tracked_layers = t->get<std::vector<Index>>();
  }
  if (auto v = r.integer(j, "", "tracked_weights", false, 0)) cfg.tracked_weights = *v;
  if (auto v = r.string(j, "", "output", false)) cfg.output = *v;

  if (!cfg.optimizer.schedule.empty() && cfg.optimizer.total_epochs() < cfg.epochs)
    r.add("optimizer.schedule", "covers " + std::to_string(cfg.optimizer.total_epochs()) + " epochs, fewer than " +
                                    std::to_string(cfg.epochs));
  if (cfg.name.empty() && r.issues.empty())
    cfg.name = cfg.preset + "-" + cfg.activation.name() + "-" + OptimizerConfig::kind_name(cfg.optimizer.kind);

  if (!r.issues.empty()) throw ConfigError(r.issues);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open"});
  std::stringstream ss;
  ss << in.rdbuf();
  auto cfg = parse_config(ss.str());
  const auto dir = path.parent_path();
  if (cfg.dataset.root.empty())
    cfg.dataset.root = dir;
  else if (cfg.dataset.root.is_relative())
    cfg.dataset.root = dir / cfg.dataset.root;
  return cfg;
}

std::vector<ScheduleStage> ExperimentConfig::resolved_schedule() const {
  return optimizer.schedule.empty() ? equal_stages(epochs, rates) : optimizer.schedule;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.optimizer = optimizer;
  t.optimizer.schedule = resolved_schedule();
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.tracked_layers = tracked_layers;
  t.tracked_weights = tracked_weights;
  t.freeze_activations = freeze;
  return t;
}

json ExperimentConfig::to_json() const {
  json d{{"name", dataset.name}};
  if (is_synthetic(dataset.name)) d["n"] = dataset.n;
  if (!dataset.paths.empty()) d["paths"] = dataset.paths;
  if (!dataset.test_paths.empty()) d["test_paths"] = dataset.test_paths;
  if (!dataset.images.empty()) d["images"] = dataset.images;
  if (!dataset.labels.empty()) d["labels"] = dataset.labels;
  if (!dataset.test_images.empty()) d["test_images"] = dataset.test_images;
  if (!dataset.test_labels.empty()) d["test_labels"] = dataset.test_labels;
  if (dataset.train) d["train"] = *dataset.train;
  if (dataset.test) d["test"] = *dataset.test;

  json sched = json::array();
  for (const auto& s : resolved_schedule()) sched.push_back({{"epochs", s.epochs}, {"rate", s.rate}});
  json act{{"kind", activation.name()}, {"freeze", freeze}};
  if (activation.tag == ActivationKind::Tag::LReLU || activation.tag == ActivationKind::Tag::Swish)
    act["param"] = activation.param;
  json out{{"version", version},
           {"name", name},
           {"seed", seed},
           {"dataset", d},
           {"model",
            {{"preset", preset},
             {"hidden", preset_options.hidden},
             {"channels", std::vector<Index>(preset_options.channels.begin(), preset_options.channels.end())}}},
           {"activation", act},
           {"optimizer",
            {{"kind", OptimizerConfig::kind_name(optimizer.kind)},
             {"schedule", sched},
             {"momentum", optimizer.momentum},
             {"epsilon", optimizer.epsilon},
             {"beta1", optimizer.beta1},
             {"beta2", optimizer.beta2},
             {"rho", optimizer.rho}}},
           {"epochs", epochs},
           {"batch_size", batch_size},
           {"tracked_layers", tracked_layers},
           {"tracked_weights", tracked_weights}};
  if (!output.empty()) out["output"] = output;
  return out;
}

// ---------------------------------------------------------------- data

namespace {

fs::path resolve(const fs::path& root, const std::string& p) {
  const fs::path q(p);
  return q.is_relative() && !root.empty() ? root / q : q;
}

std::vector<fs::path> resolve_all(const fs::path& root, const std::vector<std::string>& ps) {
  std::vector<fs::path> out;
  for (const auto& p : ps) out.push_back(resolve(root, p));
  return out;
}

Rng stream(std::uint64_t seed, std::uint64_t k) { return Rng(seed ^ (k * 0x9E3779B97F4A7C15ULL)); }

}  // namespace

std::pair<Dataset, Dataset> load_experiment_data(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  Rng rng = stream(cfg.seed, 0);
  std::pair<Dataset, Dataset> out;
  if (is_synthetic(d.name)) {
    const Dataset pool = make_synthetic(d.name, d.n, rng);
    const Index test = d.test.value_or(d.train ? d.n - *d.train : d.n / 5);
    const Index train = d.train.value_or(d.n - test);
    out = subset(pool, train, test, rng);
    return out;
  }

  Dataset pool, test_pool;
  bool separate_test = false;
  bool unit_range = true;
  Index default_train = 0, default_test = 0;
  if (d.name == "cifar10") {
    pool = load_cifar10_bin(resolve_all(d.root, d.paths));
    if (!d.test_paths.empty()) {
      test_pool = load_cifar10_bin(resolve_all(d.root, d.test_paths));
      separate_test = true;
    }
    default_train = 5000;
    default_test = 1000;
  } else if (d.name == "idx") {
    pool = load_idx(resolve(d.root, d.images), resolve(d.root, d.labels));
    if (!d.test_images.empty()) {
      test_pool = load_idx(resolve(d.root, d.test_images), resolve(d.root, d.test_labels));
      separate_test = true;
      const int classes = std::max(pool.classes, test_pool.classes);
      pool.classes = test_pool.classes = classes;
      default_train = pool.size();
      default_test = test_pool.size();
    } else {
      default_test = pool.size() / 5;
      default_train = pool.size() - default_test;
    }
  } else {
    throw ArgumentError("unknown dataset '" + d.name + "'");
  }
  pool.validate(unit_range);
  if (separate_test) {
    test_pool.validate(unit_range);
    out.first = subset(pool, d.train.value_or(default_train), 0, rng).first;
    out.second = subset(test_pool, d.test.value_or(default_test), 0, rng).first;
  } else {
    out = subset(pool, d.train.value_or(default_train), d.test.value_or(default_test), rng);
  }
  return out;
}

// ---------------------------------------------------------------- running

std::string run_csv_header(const Model& model) {
  std::string h = "epoch,loss,acc,lr";
  const auto sites = model.activation_sites();
  for (std::size_t s = 0; s < sites.size(); ++s) {
    const auto tag = sites[s]->kind().tag;
    const auto prefix = ",act" + std::to_string(s) + ".";
    if (sites[s]->kind().is_adaptive())
      h += prefix + "a" + prefix + "b" + prefix + "c" + prefix + "d";
    else if (tag == ActivationKind::Tag::PReLU)
      h += prefix + "slope";
  }
  return h;
}

std::string deltas_csv_header(Index tracked_weights) {
  std::string h = "epoch,layer,mean_abs_dw";
  for (Index k = 0; k < tracked_weights; ++k) h += ",dw" + std::to_string(k);
  return h;
}

std::string shapes_csv(const std::vector<ShapeTrace>& traces) {
  std::string out = std::string(kShapesCsvHeader) + "\n";
  for (const auto& t : traces)
    for (std::size_t i = 0; i < t.z.size(); ++i)
      out += std::to_string(t.site) + "," + format_number(t.z[i]) + "," + format_number(t.fz[i]) + "\n";
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "config.json", cfg.to_json().dump(2) + "\n");

  const auto [train_set, test_set] = load_experiment_data(cfg);
  const Index classes = std::max(train_set.classes, test_set.classes);
  const auto spec = make_preset(cfg.preset, train_set.sample_shape(), classes, cfg.activation, cfg.preset_options);
  Rng init_rng = stream(cfg.seed, 1);
  Model model = init(spec, init_rng);
  Rng train_rng = stream(cfg.seed, 2);

  std::ofstream run(out_dir / "run.csv", std::ios::binary);
  std::ofstream deltas(out_dir / "deltas.csv", std::ios::binary);
  if (!run || !deltas) throw FormatError("cannot write into " + out_dir.string());
  run << run_csv_header(model) << '\n' << std::flush;
  deltas << deltas_csv_header(cfg.tracked_weights) << '\n' << std::flush;

  const auto sink = [&](const RunRecord& rec) {
    const auto epoch = std::to_string(rec.epoch + 1);
    run << epoch << ',' << format_number(rec.train_loss) << ',' << format_number(rec.test_accuracy) << ','
        << format_number(rec.lr);
    for (const auto& s : rec.activation_params)
      for (double v : s.values) run << ',' << format_number(v);
    run << '\n' << std::flush;
    for (const auto& d : rec.deltas) {
      deltas << epoch << ',' << d.layer << ',' << format_number(d.mean_abs);
      for (Index k = 0; k < cfg.tracked_weights; ++k) {
        deltas << ',';
        if (static_cast<std::size_t>(k) < d.tracked.size()) deltas << format_number(d.tracked[static_cast<std::size_t>(k)]);
      }
      deltas << '\n';
    }
    deltas << std::flush;
  };

  ExperimentResult result;
  try {
    result.records = train(model, train_set, test_set, cfg.train_config(), train_rng, sink);
  } catch (const TrainingError& e) {
    write_text(out_dir / "summary.txt", std::string("status=diverged ") + e.what() + "\n");
    throw;
  }

  write_text(out_dir / "shapes.csv", shapes_csv(activation_shape_trace(model, default_shape_grid())));

  ConvergenceCurve curve;
  for (const auto& r : result.records) curve.push_back({static_cast<double>(r.epoch + 1), r.train_loss});
  result.final_accuracy = result.records.empty() ? 0.0 : result.records.back().test_accuracy;
  result.area = curve.size() >= 2 ? convergence_area(curve) : std::numeric_limits<double>::quiet_NaN();
  write_text(out_dir / "summary.txt", "status=ok name=" + cfg.name + " epochs=" + std::to_string(cfg.epochs) +
                                          " final_acc=" + format_number(result.final_accuracy) +
                                          " area=" + format_number(result.area) + "\n");
  save_checkpoint(out_dir / "checkpoint.json", model, cfg.seed);
  return result;
}

// ---------------------------------------------------------------- compare

std::optional<CompareMetric> parse_compare_metric(const std::string& name) {
  if (name == "area") return CompareMetric::Area;
  if (name == "final_acc") return CompareMetric::FinalAccuracy;
  return std::nullopt;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError(where + ": bad number '" + s + "'");
  return v;
}

struct RunTable {
  ConvergenceCurve curve;
  std::vector<double> acc;
};

RunTable read_run_table(const fs::path& run_csv) {
  std::ifstream in(run_csv);
  if (!in) throw FormatError("cannot open " + run_csv.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(run_csv.string() + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "epoch" || header[1] != "loss" || header[2] != "acc")
    throw FormatError(run_csv.string() + ": unexpected header");
  RunTable t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw FormatError(run_csv.string() + ": ragged row");
    t.curve.push_back({parse_double(cells[0], run_csv.string()), parse_double(cells[1], run_csv.string())});
    t.acc.push_back(parse_double(cells[2], run_csv.string()));
  }
  return t;
}

}  // namespace

ConvergenceCurve read_loss_curve(const fs::path& run_csv) { return read_run_table(run_csv).curve; }

std::vector<CompareRow> compare(const std::vector<fs::path>& run_dirs, CompareMetric metric) {
  if (run_dirs.size() < 2) throw ComparisonError("compare: need at least two runs");
  std::vector<CompareRow> rows;
  for (const auto& dir : run_dirs) {
    RunTable t;
    try {
      t = read_run_table(dir / "run.csv");
    } catch (const FormatError& e) {
      throw ComparisonError(std::string("compare: ") + e.what());
    }
    if (t.curve.size() < 2) throw ComparisonError("compare: " + dir.string() + " has fewer than two epochs");
    CompareRow row;
    row.run = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    row.epochs = static_cast<Index>(t.curve.size());
    row.area = convergence_area(t.curve);
    row.final_accuracy = t.acc.back();
    if (!rows.empty() && rows.front().epochs != row.epochs)
      throw ComparisonError("compare: " + rows.front().run + " has " + std::to_string(rows.front().epochs) +
                            " epochs but " + row.run + " has " + std::to_string(row.epochs));
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(), [metric](const CompareRow& x, const CompareRow& y) {
    if (metric == CompareMetric::Area) {
      if (x.area != y.area) return x.area < y.area;
    } else if (x.final_accuracy != y.final_accuracy) {
      return x.final_accuracy > y.final_accuracy;
    }
    return x.run < y.run;
  });
  return rows;
}

std::string format_compare_table(const std::vector<CompareRow>& rows, CompareMetric metric) {
  std::size_t width = 3;
  for (const auto& r : rows) width = std::max(width, r.run.size());
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-4s  %-*s  %12s  %9s  %6s   (ranked by %s)\n", "rank", static_cast<int>(width), "run",
                "area", "final_acc", "epochs", metric == CompareMetric::Area ? "area" : "final_acc");
  out += buf;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-4zu  %-*s  %12.6f  %9.4f  %6td\n", i + 1, static_cast<int>(width),
                  rows[i].run.c_str(), rows[i].area, rows[i].final_accuracy, rows[i].epochs);
    out += buf;
  }
  return out;
}

}  // namespace adact
