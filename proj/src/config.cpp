#include "caed/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "caed/error.hpp"
#include "json.hpp"

namespace caed {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError((path.empty() ? std::string("document") : path) + ": expected an object");
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  check_object(j, path);
  for (const auto& item : j.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; });
    if (!ok) throw ConfigError("unknown key '" + join(path, item.key()) + "'");
  }
}

const json* find(const json& j, const char* key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double number(const json& j, const char* key, const std::string& path, std::optional<double> fallback) {
  const json* v = find(j, key);
  if (!v) {
    if (!fallback) throw ConfigError("missing required key '" + join(path, key) + "'");
    return *fallback;
  }
  if (!v->is_number()) throw ConfigError("'" + join(path, key) + "' must be a number");
  return v->get<double>();
}

std::size_t count(const json& j, const char* key, const std::string& path, std::optional<std::size_t> fallback) {
  const json* v = find(j, key);
  if (!v) {
    if (!fallback) throw ConfigError("missing required key '" + join(path, key) + "'");
    return *fallback;
  }
  if (!v->is_number_unsigned()) throw ConfigError("'" + join(path, key) + "' must be a non-negative integer");
  return v->get<std::size_t>();
}

std::string text(const json& j, const char* key, const std::string& path, std::optional<std::string> fallback) {
  const json* v = find(j, key);
  if (!v) {
    if (!fallback) throw ConfigError("missing required key '" + join(path, key) + "'");
    return *fallback;
  }
  if (!v->is_string()) throw ConfigError("'" + join(path, key) + "' must be a string");
  return v->get<std::string>();
}

std::vector<double> numbers(const json& j, const char* key, const std::string& path) {
  const json* v = find(j, key);
  if (!v) throw ConfigError("missing required key '" + join(path, key) + "'");
  if (!v->is_array()) throw ConfigError("'" + join(path, key) + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : *v) {
    if (!e.is_number()) throw ConfigError("'" + join(path, key) + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

TaskKind task_from_name(const std::string& name, const std::string& path) {
  if (name == "classification") return TaskKind::Classification;
  if (name == "reconstruction") return TaskKind::Reconstruction;
  throw ConfigError("'" + path + "' must be \"classification\" or \"reconstruction\"");
}

std::string task_name(TaskKind k) { return k == TaskKind::Classification ? "classification" : "reconstruction"; }

std::string init_name(CaInit init) {
  switch (init) {
    case CaInit::Binary01: return "binary01";
    case CaInit::BinaryPM1: return "binary_pm1";
    case CaInit::Bernoulli: return "bernoulli";
  }
  return "binary01";
}

std::string param_name(ParamKind k) {
  switch (k) {
    case ParamKind::Dense: return "dense";
    case ParamKind::Kronecker: return "kronecker";
    case ParamKind::Colored: return "colored";
  }
  return "dense";
}

void parse_task(const json& j, ExperimentConfig& cfg) {
  auto& task = cfg.task;
  if (j.is_string()) {
    task.kind = task_from_name(j.get<std::string>(), "task");
  } else {
    check_keys(j, "task", {"kind", "hidden", "activation", "classes", "input_scale"});
    task.kind = task_from_name(text(j, "kind", "task", std::nullopt), "task.kind");
    if (const json* h = find(j, "hidden")) {
      if (!h->is_array()) throw ConfigError("'task.hidden' must be an array of layer sizes");
      task.hidden.clear();
      for (const auto& e : *h) {
        if (!e.is_number_unsigned() || e.get<std::size_t>() == 0) {
          throw ConfigError("'task.hidden' entries must be positive integers");
        }
        task.hidden.push_back(e.get<std::size_t>());
      }
    } else {
      task.hidden = {task.kind == TaskKind::Classification ? std::size_t{128} : std::size_t{256}};
    }
    const std::string act = text(j, "activation", "task", std::string("relu"));
    try {
      task.hidden_activation = activation_from_name(act);
    } catch (const DomainError&) {
      throw ConfigError("'task.activation' is not a known activation: " + act);
    }
    if (task.hidden_activation == Activation::Softmax) throw ConfigError("'task.activation' cannot be softmax");
    task.classes = count(j, "classes", "task", std::size_t{10});
    if (task.classes < 2) throw ConfigError("'task.classes' must be >= 2");
    if (find(j, "input_scale")) cfg.train.input_scale = number(j, "input_scale", "task", std::nullopt);
    return;
  }
  task.hidden = {task.kind == TaskKind::Classification ? std::size_t{128} : std::size_t{256}};
}

void parse_sensing(const json& j, SensingDescription& s) {
  check_keys(j, "sensing", {"kind", "shots", "rows", "cols", "bands"});
  const std::string kind = text(j, "kind", "sensing", std::nullopt);
  if (kind == "spc") {
    s.kind = SensingKind::Spc;
  } else if (kind == "cassi") {
    s.kind = SensingKind::Cassi;
  } else {
    throw ConfigError("'sensing.kind' must be \"spc\" or \"cassi\"");
  }
  s.shots = count(j, "shots", "sensing", std::nullopt);
  s.rows = count(j, "rows", "sensing", std::size_t{28});
  s.cols = count(j, "cols", "sensing", std::size_t{28});
  s.bands = count(j, "bands", "sensing", s.kind == SensingKind::Spc ? std::optional<std::size_t>{1} : std::nullopt);
  if (s.shots == 0 || s.rows == 0 || s.cols == 0 || s.bands == 0) {
    throw ConfigError("'sensing' dimensions must be >= 1");
  }
  if (s.kind == SensingKind::Spc && s.bands != 1) throw ConfigError("'sensing.bands' must be 1 for spc");
}

void parse_ca(const json& j, const SensingDescription& sensing, CaDescription& ca, bool& trainable,
              std::optional<CaInit>& init) {
  check_keys(j, "ca", {"param", "kernel_rows", "kernel_cols", "filters", "init", "trainable"});
  const std::string param = text(j, "param", "ca", std::string("dense"));
  if (param == "dense") {
    ca.param = ParamKind::Dense;
  } else if (param == "kronecker") {
    ca.param = ParamKind::Kronecker;
  } else if (param == "colored") {
    ca.param = ParamKind::Colored;
  } else {
    throw ConfigError("'ca.param' must be \"dense\", \"kronecker\" or \"colored\"");
  }
  const bool tiled = ca.param != ParamKind::Dense;
  ca.kernel_rows = count(j, "kernel_rows", "ca", tiled ? std::optional<std::size_t>{sensing.rows} : std::size_t{0});
  ca.kernel_cols = count(j, "kernel_cols", "ca", tiled ? std::optional<std::size_t>{sensing.cols} : std::size_t{0});
  if (!tiled) ca.kernel_rows = ca.kernel_cols = 0;
  if (ca.param == ParamKind::Colored) {
    ca.filters = count(j, "filters", "ca", std::nullopt);
  } else if (find(j, "filters")) {
    throw ConfigError("'ca.filters' only applies to the colored parameterization");
  }
  if (const json* v = find(j, "init")) {
    if (!v->is_string()) throw ConfigError("'ca.init' must be a string");
    const auto name = v->get<std::string>();
    if (name == "binary01") {
      init = CaInit::Binary01;
    } else if (name == "binary_pm1") {
      init = CaInit::BinaryPM1;
    } else if (name == "bernoulli") {
      init = CaInit::Bernoulli;
    } else {
      throw ConfigError("'ca.init' must be \"binary01\", \"binary_pm1\" or \"bernoulli\"");
    }
  }
  if (const json* v = find(j, "trainable")) {
    if (!v->is_boolean()) throw ConfigError("'ca.trainable' must be true or false");
    trainable = v->get<bool>();
  }
}

RegularizerSpec parse_regularizer(const json& j, const std::string& path, std::size_t epochs) {
  check_object(j, path);
  const std::string kind = text(j, "kind", path, std::nullopt);
  RegularizerSpec spec;
  if (kind == "binary01" || kind == "binary_pm1") {
    check_keys(j, path, {"kind", "p1", "p2", "rho0", "rhoT", "period", "mode"});
    const double p1 = number(j, "p1", path, 1.0);
    const double p2 = number(j, "p2", path, 1.0);
    if (!(p1 > 0.0 && p2 > 0.0)) throw ConfigError("'" + path + "' exponents must be positive");
    spec.term = kind == "binary01" ? RegularizerTerm{Binary01{p1, p2}} : RegularizerTerm{BinaryPM1{p1, p2}};
  } else if (kind == "multilevel") {
    check_keys(j, path, {"kind", "levels", "exponents", "rho0", "rhoT", "period", "mode"});
    MultiLevel term{numbers(j, "levels", path), {}};
    if (term.levels.empty()) throw ConfigError("'" + join(path, "levels") + "' must not be empty");
    if (find(j, "exponents")) {
      term.exponents = numbers(j, "exponents", path);
    } else {
      term.exponents.assign(term.levels.size(), 1.0);
    }
    if (term.exponents.size() != term.levels.size()) {
      throw ConfigError("'" + join(path, "exponents") + "' needs one entry per level");
    }
    for (double p : term.exponents) {
      if (!(p > 0.0)) throw ConfigError("'" + join(path, "exponents") + "' entries must be positive");
    }
    spec.term = term;
  } else if (kind == "transmittance") {
    check_keys(j, path, {"kind", "target", "rho0", "rhoT", "period", "mode"});
    const double target = number(j, "target", path, std::nullopt);
    if (!(target >= 0.0 && target <= 1.0)) throw ConfigError("'" + join(path, "target") + "' must lie in [0, 1]");
    spec.term = Transmittance{target};
  } else if (kind == "snapshots" || kind == "correlation" || kind == "conditionality") {
    check_keys(j, path, {"kind", "rho0", "rhoT", "period", "mode"});
    if (kind == "snapshots") spec.term = SnapshotGroup{};
    if (kind == "correlation") spec.term = Correlation{};
    if (kind == "conditionality") spec.term = Conditionality{};
  } else {
    throw ConfigError("'" + join(path, "kind") + "' is not a known regularizer: " + kind);
  }

  const double rho0 = number(j, "rho0", path, 1.0);
  if (!(rho0 >= 0.0)) throw ConfigError("'" + join(path, "rho0") + "' must be non-negative");
  const bool has_target = find(j, "rhoT") != nullptr;
  const std::string mode = text(j, "mode", path, std::string(has_target ? "dynamic" : "static"));
  if (mode == "static") {
    if (has_target && number(j, "rhoT", path, std::nullopt) != rho0) {
      throw ConfigError("'" + join(path, "rhoT") + "' must equal rho0 in static mode");
    }
    if (find(j, "period")) throw ConfigError("'" + join(path, "period") + "' only applies in dynamic mode");
    spec.rho = RhoSchedule::constant(rho0);
  } else if (mode == "dynamic") {
    const double rho_t = number(j, "rhoT", path, std::nullopt);
    const std::size_t period = count(j, "period", path, std::max<std::size_t>(1, epochs / 10));
    try {
      spec.rho = RhoSchedule::dynamic(rho0, rho_t, epochs, period);
    } catch (const Error& e) {
      throw ConfigError("'" + path + "': " + e.what());
    }
  } else {
    throw ConfigError("'" + join(path, "mode") + "' must be \"static\" or \"dynamic\"");
  }
  return spec;
}

void parse_optimizer(const json& j, TrainConfig& train) {
  check_object(j, "optimizer");
  const std::string kind = text(j, "kind", "optimizer", std::string("adam"));
  if (kind == "adam") {
    check_keys(j, "optimizer", {"kind", "lr", "beta1", "beta2", "eps", "ca_lr_multiplier"});
    AdamConfig a;
    a.lr = number(j, "lr", "optimizer", a.lr);
    a.beta1 = number(j, "beta1", "optimizer", a.beta1);
    a.beta2 = number(j, "beta2", "optimizer", a.beta2);
    a.eps = number(j, "eps", "optimizer", a.eps);
    if (!(a.beta1 >= 0.0 && a.beta1 < 1.0 && a.beta2 >= 0.0 && a.beta2 < 1.0)) {
      throw ConfigError("'optimizer' betas must lie in [0, 1)");
    }
    if (!(a.eps > 0.0)) throw ConfigError("'optimizer.eps' must be positive");
    train.optimizer = a;
  } else if (kind == "sgd") {
    check_keys(j, "optimizer", {"kind", "lr", "momentum", "ca_lr_multiplier"});
    SgdConfig s;
    s.lr = number(j, "lr", "optimizer", s.lr);
    s.momentum = number(j, "momentum", "optimizer", s.momentum);
    if (!(s.momentum >= 0.0 && s.momentum < 1.0)) throw ConfigError("'optimizer.momentum' must lie in [0, 1)");
    train.optimizer = s;
  } else {
    throw ConfigError("'optimizer.kind' must be \"adam\" or \"sgd\"");
  }
  if (!(learning_rate(train.optimizer) > 0.0)) throw ConfigError("'optimizer.lr' must be positive");
  train.ca_lr_multiplier = number(j, "ca_lr_multiplier", "optimizer", 1.0);
  if (!(train.ca_lr_multiplier >= 0.0)) throw ConfigError("'optimizer.ca_lr_multiplier' must be non-negative");
}

void parse_schedule(const json& j, TrainConfig& train) {
  check_keys(j, "schedule", {"epochs", "batch_size", "gate_threshold", "gate_mode"});
  train.epochs = count(j, "epochs", "schedule", std::size_t{10});
  train.batch_size = count(j, "batch_size", "schedule", std::size_t{32});
  if (train.epochs == 0) throw ConfigError("'schedule.epochs' must be >= 1");
  if (train.batch_size == 0) throw ConfigError("'schedule.batch_size' must be >= 1");
  if (const json* v = find(j, "gate_threshold")) {
    if (v->is_string() && v->get<std::string>() == "off") {
      train.gate_threshold.reset();
    } else if (v->is_number()) {
      const double t = v->get<double>();
      if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("'schedule.gate_threshold' must lie in [0, 1]");
      train.gate_threshold = t;
    } else {
      throw ConfigError("'schedule.gate_threshold' must be a number or \"off\"");
    }
  }
  const std::string mode = text(j, "gate_mode", "schedule", std::string("below"));
  if (mode == "below") {
    train.gate_mode = GateMode::ZeroBelow;
  } else if (mode == "literal") {
    train.gate_mode = GateMode::ZeroAtOrAbove;
  } else {
    throw ConfigError("'schedule.gate_mode' must be \"below\" or \"literal\"");
  }
}

void parse_noise(const json& j, NoiseSpec& noise) {
  check_keys(j, "noise", {"ca", "snr_db"});
  if (const json* ca = find(j, "ca"); ca && !ca->is_null()) {
    check_object(*ca, "noise.ca");
    const std::string kind = text(*ca, "kind", "noise.ca", std::nullopt);
    if (kind == "uniform") {
      check_keys(*ca, "noise.ca", {"kind", "lo", "hi"});
      UniformNoise u{number(*ca, "lo", "noise.ca", std::nullopt), number(*ca, "hi", "noise.ca", std::nullopt)};
      if (!(u.lo <= u.hi)) throw ConfigError("'noise.ca' needs lo <= hi");
      noise.ca_noise = u;
    } else if (kind == "gaussian") {
      check_keys(*ca, "noise.ca", {"kind", "mean", "sigma", "bound"});
      GaussianNoise g{number(*ca, "mean", "noise.ca", 0.0), number(*ca, "sigma", "noise.ca", std::nullopt), 0.0};
      g.bound = number(*ca, "bound", "noise.ca", 3.0 * g.sigma + std::abs(g.mean));
      if (!(g.sigma >= 0.0 && g.bound >= 0.0)) throw ConfigError("'noise.ca' needs sigma >= 0 and bound >= 0");
      noise.ca_noise = g;
    } else {
      throw ConfigError("'noise.ca.kind' must be \"uniform\" or \"gaussian\"");
    }
  }
  if (const json* snr = find(j, "snr_db"); snr && !snr->is_null()) {
    if (snr->is_string() && snr->get<std::string>() == "none") {
      noise.measurement_snr_db.reset();
    } else if (snr->is_number()) {
      noise.measurement_snr_db = snr->get<double>();
    } else {
      throw ConfigError("'noise.snr_db' must be a number, null or \"none\"");
    }
  }
}

void parse_dataset(const json& j, DatasetDescription& d) {
  if (j.is_string()) {
    d.kind = j.get<std::string>();
    if (d.kind != "mnist" && d.kind != "synthetic") throw ConfigError("'dataset' must be \"mnist\" or \"synthetic\"");
  } else {
    check_keys(j, "dataset", {"kind", "dir", "train", "test", "blobs"});
    d.kind = text(j, "kind", "dataset", std::nullopt);
    if (d.kind != "mnist" && d.kind != "synthetic") {
      throw ConfigError("'dataset.kind' must be \"mnist\" or \"synthetic\"");
    }
    d.dir = text(j, "dir", "dataset", d.dir);
    d.train = count(j, "train", "dataset", std::size_t{0});
    d.test = count(j, "test", "dataset", std::size_t{0});
    d.blobs = count(j, "blobs", "dataset", d.blobs);
  }
  if (d.kind == "synthetic") {
    if (d.train == 0) d.train = 256;
    if (d.test == 0) d.test = 64;
  }
}

json regularizer_json(const RegularizerSpec& spec) {
  json j;
  j["kind"] = term_name(spec.term);
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Binary01> || std::is_same_v<T, BinaryPM1>) {
          j["p1"] = t.p1;
          j["p2"] = t.p2;
        } else if constexpr (std::is_same_v<T, MultiLevel>) {
          j["levels"] = t.levels;
          j["exponents"] = t.exponents;
        } else if constexpr (std::is_same_v<T, Transmittance>) {
          j["target"] = t.target;
        }
      },
      spec.term);
  j["rho0"] = spec.rho.rho0;
  if (spec.rho.mode == RhoMode::Dynamic) {
    j["mode"] = "dynamic";
    j["rhoT"] = spec.rho.rho_target;
    j["period"] = spec.rho.update_period;
  } else {
    j["mode"] = "static";
  }
  return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, "",
             {"task", "sensing", "ca", "regularizers", "optimizer", "schedule", "noise", "seed", "dataset"});
  ExperimentConfig cfg;
  for (const char* key : {"task", "sensing", "dataset"}) {
    if (!find(doc, key)) throw ConfigError(std::string("missing required key '") + key + "'");
  }
  parse_sensing(doc["sensing"], cfg.sensing);
  cfg.train.input_scale = cfg.sensing.kind == SensingKind::Spc
                              ? 1.0 / static_cast<double>(cfg.sensing.rows * cfg.sensing.cols)
                              : 1.0 / static_cast<double>(cfg.sensing.bands);
  parse_task(doc["task"], cfg);
  cfg.train.task = cfg.task.kind;

  if (const json* s = find(doc, "schedule")) parse_schedule(*s, cfg.train);
  if (const json* o = find(doc, "optimizer")) parse_optimizer(*o, cfg.train);
  if (const json* n = find(doc, "noise")) parse_noise(*n, cfg.train.noise);
  if (const json* s = find(doc, "seed")) {
    if (!s->is_number_unsigned()) throw ConfigError("'seed' must be a non-negative integer");
    cfg.train.seed = s->get<std::uint64_t>();
  }

  if (const json* regs = find(doc, "regularizers")) {
    if (!regs->is_array()) throw ConfigError("'regularizers' must be an array");
    for (std::size_t q = 0; q < regs->size(); ++q) {
      cfg.train.regularizers.push_back(
          parse_regularizer((*regs)[q], "regularizers[" + std::to_string(q) + "]", cfg.train.epochs));
    }
  }

  std::optional<CaInit> init;
  bool trainable = true;
  if (const json* c = find(doc, "ca")) {
    parse_ca(*c, cfg.sensing, cfg.ca, trainable, init);
  } else {
    parse_ca(json::object(), cfg.sensing, cfg.ca, trainable, init);
  }
  cfg.train.train_ca = trainable;
  if (init) {
    cfg.ca.init = *init;
  } else {
    const bool pm1 = std::any_of(cfg.train.regularizers.begin(), cfg.train.regularizers.end(),
                                 [](const RegularizerSpec& s) { return std::holds_alternative<BinaryPM1>(s.term); });
    cfg.ca.init = pm1 ? CaInit::BinaryPM1 : CaInit::Binary01;
  }

  parse_dataset(doc["dataset"], cfg.dataset);
  if (cfg.dataset.kind == "mnist" && (cfg.sensing.rows != 28 || cfg.sensing.cols != 28 || cfg.sensing.bands != 1)) {
    throw ConfigError("'dataset' mnist needs 28 x 28 single-band sensing");
  }
  try {
    cfg.train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["task"] = {{"kind", task_name(cfg.task.kind)},
                 {"hidden", cfg.task.hidden},
                 {"activation", activation_name(cfg.task.hidden_activation)},
                 {"classes", cfg.task.classes},
                 {"input_scale", cfg.train.input_scale}};
  doc["sensing"] = {{"kind", cfg.sensing.kind == SensingKind::Spc ? "spc" : "cassi"},
                    {"shots", cfg.sensing.shots},
                    {"rows", cfg.sensing.rows},
                    {"cols", cfg.sensing.cols},
                    {"bands", cfg.sensing.bands}};
  json ca = {{"param", param_name(cfg.ca.param)}, {"init", init_name(cfg.ca.init)}, {"trainable", cfg.train.train_ca}};
  if (cfg.ca.param != ParamKind::Dense) {
    ca["kernel_rows"] = cfg.ca.kernel_rows;
    ca["kernel_cols"] = cfg.ca.kernel_cols;
  }
  if (cfg.ca.param == ParamKind::Colored) ca["filters"] = cfg.ca.filters;
  doc["ca"] = ca;
  doc["regularizers"] = json::array();
  for (const auto& spec : cfg.train.regularizers) doc["regularizers"].push_back(regularizer_json(spec));
  json opt;
  if (const auto* a = std::get_if<AdamConfig>(&cfg.train.optimizer)) {
    opt = {{"kind", "adam"}, {"lr", a->lr}, {"beta1", a->beta1}, {"beta2", a->beta2}, {"eps", a->eps}};
  } else {
    const auto& s = std::get<SgdConfig>(cfg.train.optimizer);
    opt = {{"kind", "sgd"}, {"lr", s.lr}, {"momentum", s.momentum}};
  }
  opt["ca_lr_multiplier"] = cfg.train.ca_lr_multiplier;
  doc["optimizer"] = opt;
  json sched = {{"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"gate_mode", cfg.train.gate_mode == GateMode::ZeroBelow ? "below" : "literal"}};
  sched["gate_threshold"] = cfg.train.gate_threshold ? json(*cfg.train.gate_threshold) : json("off");
  doc["schedule"] = sched;
  json noise;
  if (cfg.train.noise.ca_noise) {
    if (const auto* u = std::get_if<UniformNoise>(&*cfg.train.noise.ca_noise)) {
      noise["ca"] = {{"kind", "uniform"}, {"lo", u->lo}, {"hi", u->hi}};
    } else {
      const auto& g = std::get<GaussianNoise>(*cfg.train.noise.ca_noise);
      noise["ca"] = {{"kind", "gaussian"}, {"mean", g.mean}, {"sigma", g.sigma}, {"bound", g.bound}};
    }
  } else {
    noise["ca"] = nullptr;
  }
  noise["snr_db"] = cfg.train.noise.measurement_snr_db ? json(*cfg.train.noise.measurement_snr_db) : json(nullptr);
  doc["noise"] = noise;
  doc["seed"] = cfg.train.seed;
  doc["dataset"] = {{"kind", cfg.dataset.kind},
                    {"dir", cfg.dataset.dir},
                    {"train", cfg.dataset.train},
                    {"test", cfg.dataset.test},
                    {"blobs", cfg.dataset.blobs}};
  return doc.dump(2) + "\n";
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the (seed, stream) pair
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SensingModel make_sensing(const ExperimentConfig& cfg) {
  const auto& s = cfg.sensing;
  if (s.kind == SensingKind::Spc) return SensingModel::spc(s.shots, s.rows, s.cols);
  return SensingModel::cassi(s.shots, s.rows, s.cols, s.bands);
}

CaParameterization make_parameterization(const ExperimentConfig& cfg, Rng& rng) {
  const auto& s = cfg.sensing;
  switch (cfg.ca.param) {
    case ParamKind::Dense:
      return CaParameterization::dense(initial_block({s.shots, s.rows, s.cols, 1}, cfg.ca.init, rng));
    case ParamKind::Kronecker:
      return CaParameterization::kronecker(
          initial_block({s.shots, cfg.ca.kernel_rows, cfg.ca.kernel_cols, 1}, cfg.ca.init, rng), s.rows, s.cols);
    case ParamKind::Colored: {
      CodedApertureSet weights =
          initial_block({s.shots, cfg.ca.kernel_rows, cfg.ca.kernel_cols, cfg.ca.filters}, CaInit::Binary01, rng);
      return CaParameterization::colored(std::move(weights), gaussian_filter_bank(cfg.ca.filters, s.bands), s.rows,
                                         s.cols);
    }
  }
  throw ConfigError("unknown parameterization");
}

DecoderNetwork make_network(const ExperimentConfig& cfg, const SensingModel& sensing, Rng& rng) {
  std::vector<std::size_t> sizes{sensing.measurement_size()};
  std::vector<Activation> acts;
  for (std::size_t h : cfg.task.hidden) {
    sizes.push_back(h);
    acts.push_back(cfg.task.hidden_activation);
  }
  if (cfg.task.kind == TaskKind::Classification) {
    sizes.push_back(cfg.task.classes);
    acts.push_back(Activation::Softmax);
  } else {
    sizes.push_back(sensing.scene_size());
    acts.push_back(Activation::Sigmoid);
  }
  return init_network(sizes, acts, rng);
}

Datasets load_datasets(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& data_dir) {
  Datasets out;
  if (cfg.dataset.kind == "mnist") {
    const std::filesystem::path dir = data_dir ? *data_dir : std::filesystem::path(cfg.dataset.dir);
    out.train = load_mnist_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte").head(cfg.dataset.train);
    out.test = load_mnist_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte").head(cfg.dataset.test);
  } else {
    const auto& s = cfg.sensing;
    Rng train_rng(stream_seed(cfg.train.seed, 10));
    Rng test_rng(stream_seed(cfg.train.seed, 11));
    out.train = synthetic_dataset(cfg.dataset.train, s.rows, s.cols, s.bands, cfg.dataset.blobs, train_rng);
    out.test = synthetic_dataset(cfg.dataset.test, s.rows, s.cols, s.bands, cfg.dataset.blobs, test_rng);
    if (cfg.task.kind == TaskKind::Classification) {
      throw ConfigError("'dataset' synthetic scenes carry no labels; use the reconstruction task");
    }
  }
  out.train.split = Split::Train;
  out.test.split = Split::Test;
  return out;
}

}  // namespace caed
