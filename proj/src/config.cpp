#include "dghl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "dghl/dataio.hpp"
#include "dghl/error.hpp"

namespace dghl {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ValidationError("config: " + key + " = '" + value + "' is not " + want);
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    bad_value(key, value, "a non-negative integer");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    bad_value(key, value, "a number");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "a boolean");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  if (trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_uint(key, trim(item)));
  return out;
}

std::string list_text(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  const char* help;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field uint_field(T RunConfig::*member, const char* help) {
  return {help,
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = static_cast<T>(parse_uint(k, v));
          },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field real_field(double RunConfig::*member, const char* help) {
  return {help,
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_real(k, v);
          },
          [member](const RunConfig& c) { return format_double(c.*member); }};
}

Field bool_field(bool RunConfig::*member, const char* help) {
  return {help,
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_bool(k, v);
          },
          [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field list_field(std::vector<std::size_t> RunConfig::*member, const char* help) {
  return {help,
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_list(k, v);
          },
          [member](const RunConfig& c) { return list_text(c.*member); }};
}

Field string_field(std::string RunConfig::*member, const char* help) {
  return {help, [member](RunConfig& c, const std::string&, const std::string& v) { c.*member = v; },
          [member](const RunConfig& c) { return c.*member; }};
}

using FieldTable = std::vector<std::pair<std::string, Field>>;

const FieldTable& fields() {
  static const FieldTable table = {
      {"sub_window_len", uint_field(&RunConfig::sub_window_len, "timestamps per sub-window (s_w / a_L)")},
      {"hierarchy", list_field(&RunConfig::hierarchy, "tying factors a_1..a_L, comma separated")},
      {"window_step", uint_field(&RunConfig::window_step, "rolling window step s")},
      {"filter_multiplier", uint_field(&RunConfig::filter_multiplier, "generator filter multiplier")},
      {"max_filters", uint_field(&RunConfig::max_filters, "maximum filters per generator layer")},
      {"bn_momentum", real_field(&RunConfig::bn_momentum, "batch-norm running statistics momentum")},
      {"bn_eps", real_field(&RunConfig::bn_eps, "batch-norm epsilon")},
      {"latent_dims", list_field(&RunConfig::latent_dims, "latent dimension per level d_1..d_L")},
      {"langevin_train_steps", uint_field(&RunConfig::langevin_train_steps, "Langevin steps per training iteration")},
      {"langevin_eval_steps", uint_field(&RunConfig::langevin_eval_steps, "Langevin steps at inference")},
      {"langevin_step_size", real_field(&RunConfig::langevin_step_size, "Langevin step size s_z")},
      {"sigma_z", real_field(&RunConfig::sigma_z, "observation noise scale sigma_z")},
      {"learning_rate", real_field(&RunConfig::learning_rate, "initial Adam learning rate")},
      {"train_steps", uint_field(&RunConfig::train_steps, "training iterations")},
      {"batch_size", uint_field(&RunConfig::batch_size, "windows per mini-batch")},
      {"lr_decay", real_field(&RunConfig::lr_decay, "learning-rate decay factor")},
      {"n_decays", uint_field(&RunConfig::n_decays, "number of evenly spaced decays")},
      {"masks_enabled", bool_field(&RunConfig::masks_enabled, "honour observation masks in training")},
      {"checkpoint_every", uint_field(&RunConfig::checkpoint_every, "write a trainer checkpoint every N iterations (0 = never)")},
      {"occlusion_r", uint_field(&RunConfig::occlusion_r, "occlusion segments r")},
      {"occlusion_p", real_field(&RunConfig::occlusion_p, "occlusion probability p")},
      {"occlude_train", bool_field(&RunConfig::occlude_train, "apply occlusion to training data")},
      {"occlude_test", bool_field(&RunConfig::occlude_test, "apply occlusion to test data")},
      {"channels", list_field(&RunConfig::channels, "feature indices entering the score (empty = all)")},
      {"downsample", uint_field(&RunConfig::downsample, "mean-pooling factor applied on load")},
      {"knn_k", uint_field(&RunConfig::knn_k, "neighbours for the nearest-neighbour baseline")},
      {"per_feature_scores", bool_field(&RunConfig::per_feature_scores, "write per-feature score columns")},
      {"timing", bool_field(&RunConfig::timing, "write wall-clock seconds to the loss CSV")},
      {"workers", uint_field(&RunConfig::workers, "entities processed in parallel")},
      {"seed", uint_field(&RunConfig::seed, "master random seed")},
      {"train_data", string_field(&RunConfig::train_data, "training entity file or directory")},
      {"test_data", string_field(&RunConfig::test_data, "test entity file or directory")},
      {"model_dir", string_field(&RunConfig::model_dir, "directory holding trained models")},
      {"output", string_field(&RunConfig::output, "output file or directory")},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw ValidationError("config: unknown key '" + key + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  field(key).set(*this, key, trim(value));
}

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return names;
}

std::string RunConfig::help(const std::string& key) { return field(key).help; }

void RunConfig::validate() const {
  hierarchy_spec().validate();
  windowing().validate();
  generator_arch(1).validate();
  train_config().validate();
  eval_langevin().validate();
  occlusion_spec().validate();
  if (!(bn_eps > 0.0)) throw ValidationError("config: bn_eps must be > 0");
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) {
    throw ValidationError("config: bn_momentum must lie in [0, 1]");
  }
  if (downsample < 1) throw ValidationError("config: downsample must be >= 1");
  if (knn_k < 1) throw ValidationError("config: knn_k must be >= 1");
  if (workers < 1) throw ValidationError("config: workers must be >= 1");
}

HierarchySpec RunConfig::hierarchy_spec() const {
  return HierarchySpec{hierarchy, latent_dims, sub_window_len};
}

WindowingSpec RunConfig::windowing() const {
  const HierarchySpec spec = hierarchy_spec();
  return {spec.tying.empty() ? 0 : spec.window_len(), window_step};
}

GeneratorArch RunConfig::generator_arch(std::size_t n_features) const {
  GeneratorArch arch;
  arch.n_features = n_features;
  arch.sub_window_len = sub_window_len;
  arch.filter_multiplier = filter_multiplier;
  arch.max_filters = max_filters;
  arch.state_dim = hierarchy_spec().state_dim();
  return arch;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.iterations = train_steps;
  cfg.batch_size = batch_size;
  cfg.learning_rate = learning_rate;
  cfg.lr_decay = lr_decay;
  cfg.n_decays = n_decays;
  cfg.langevin = {langevin_train_steps, langevin_step_size, sigma_z, true};
  cfg.masks_enabled = masks_enabled;
  cfg.seed = seed;
  cfg.checkpoint_every = checkpoint_every;
  return cfg;
}

LangevinConfig RunConfig::eval_langevin() const {
  return {langevin_eval_steps, langevin_step_size, sigma_z, false};
}

DetectConfig RunConfig::detect_config() const {
  DetectConfig cfg;
  cfg.windowing = windowing();
  cfg.langevin = eval_langevin();
  cfg.channels = channels;
  cfg.seed = seed;
  return cfg;
}

OcclusionSpec RunConfig::occlusion_spec() const { return {occlusion_r, occlusion_p, seed}; }

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
  return out;
}

void apply_config(RunConfig& base, std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig cfg;
  apply_config(cfg, in, source);
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path);
  return parse_config(in, path);
}

}  // namespace dghl
