#include "chatclf/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "chatclf/error.hpp"
#include "chatclf/rng.hpp"

namespace chatclf {
namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ValidationError("config key '" + key + "': bad value '" + value + "' (expected " + expected + ")");
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || end != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || end != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || end != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  bad_value(key, v, "true or false");
}

int to_int32(const std::string& key, const std::string& v) {
  const auto x = to_int(key, v);
  if (x < INT32_MIN || x > INT32_MAX) bad_value(key, v, "a 32-bit integer");
  return static_cast<int>(x);
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::string kinds_text(const std::vector<ModelKind>& kinds) {
  std::string s;
  for (std::size_t i = 0; i < kinds.size(); ++i) s += (i ? "," : "") + to_string(kinds[i]);
  return s;
}

std::string reals_text(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_real(v[i]);
  return s;
}

struct Setting {
  std::string key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
  bool is_path = false;
};

template <typename F>
Setting gbt_setting(const std::string& name, F member) {
  return {"select.gbt." + name,
          [name, member](PipelineConfig& c, const std::string& v) {
            auto& field = c.selection_gbt.*member;
            if constexpr (std::is_same_v<std::decay_t<decltype(field)>, int>) {
              field = to_int32("select.gbt." + name, v);
            } else {
              field = to_real("select.gbt." + name, v);
            }
          },
          [member](const PipelineConfig& c) {
            const auto& field = c.selection_gbt.*member;
            if constexpr (std::is_same_v<std::decay_t<decltype(field)>, int>) {
              return std::to_string(field);
            } else {
              return format_real(field);
            }
          }};
}

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = [] {
    std::vector<Setting> t;
    auto path = [&t](const std::string& key, std::filesystem::path PipelineConfig::*m) {
      t.push_back({key, [m](PipelineConfig& c, const std::string& v) { c.*m = v; },
                   [m](const PipelineConfig& c) { return (c.*m).string(); }, true});
    };
    path("corpus", &PipelineConfig::corpus);
    t.push_back({"corpus_format",
                 [](PipelineConfig& c, const std::string& v) {
                   if (v != "auto" && v != "jsonl" && v != "csv") bad_value("corpus_format", v, "auto, jsonl or csv");
                   c.corpus_format = v;
                 },
                 [](const PipelineConfig& c) { return c.corpus_format; }});
    path("annotations", &PipelineConfig::annotations);
    path("embeddings", &PipelineConfig::embeddings);
    path("output_dir", &PipelineConfig::output_dir);
    path("cache_dir", &PipelineConfig::cache_dir);
    t.push_back({"seed", [](PipelineConfig& c, const std::string& v) { c.seed = to_u64("seed", v); },
                 [](const PipelineConfig& c) { return std::to_string(c.seed); }});
    t.push_back({"workers",
                 [](PipelineConfig& c, const std::string& v) {
                   const auto w = to_int("workers", v);
                   if (w < 0 || w > 4096) bad_value("workers", v, "0..4096");
                   c.workers = static_cast<unsigned>(w);
                 },
                 [](const PipelineConfig& c) { return std::to_string(c.workers); }});
    t.push_back({"fusion",
                 [](PipelineConfig& c, const std::string& v) {
                   try {
                     c.fusion = fusion_mode_from_string(v);
                   } catch (const ValidationError&) {
                     bad_value("fusion", v, "CAg or MAg");
                   }
                 },
                 [](const PipelineConfig& c) { return to_string(c.fusion); }});
    t.push_back({"quorum", [](PipelineConfig& c, const std::string& v) { c.quorum = to_int32("quorum", v); },
                 [](const PipelineConfig& c) { return std::to_string(c.quorum); }});
    t.push_back({"compare_fusion",
                 [](PipelineConfig& c, const std::string& v) { c.compare_fusion = to_bool("compare_fusion", v); },
                 [](const PipelineConfig& c) { return bool_text(c.compare_fusion); }});
    t.push_back({"exclude_moderators",
                 [](PipelineConfig& c, const std::string& v) { c.exclude_moderators = to_bool("exclude_moderators", v); },
                 [](const PipelineConfig& c) { return bool_text(c.exclude_moderators); }});
    t.push_back({"balance", [](PipelineConfig& c, const std::string& v) { c.balance = to_bool("balance", v); },
                 [](const PipelineConfig& c) { return bool_text(c.balance); }});
    t.push_back({"missing_ids",
                 [](PipelineConfig& c, const std::string& v) {
                   if (v == "skip") c.missing_ids = MissingIdPolicy::skip;
                   else if (v == "strict") c.missing_ids = MissingIdPolicy::strict;
                   else bad_value("missing_ids", v, "skip or strict");
                 },
                 [](const PipelineConfig& c) { return c.missing_ids == MissingIdPolicy::skip ? "skip" : "strict"; }});
    t.push_back({"reduction",
                 [](PipelineConfig& c, const std::string& v) {
                   try {
                     c.reduction = reduction_path_from_string(v);
                   } catch (const ValidationError&) {
                     bad_value("reduction", v, "on, off or both");
                   }
                 },
                 [](const PipelineConfig& c) { return to_string(c.reduction); }});
    t.push_back({"select.mask_mode",
                 [](PipelineConfig& c, const std::string& v) {
                   try {
                     c.mask_mode = mask_mode_from_string(v);
                   } catch (const ValidationError&) {
                     bad_value("select.mask_mode", v, "per-run or aggregate");
                   }
                 },
                 [](const PipelineConfig& c) { return to_string(c.mask_mode); }});
    t.push_back({"select.runs",
                 [](PipelineConfig& c, const std::string& v) { c.selection_runs = to_int32("select.runs", v); },
                 [](const PipelineConfig& c) { return std::to_string(c.selection_runs); }});
    t.push_back({"select.tau", [](PipelineConfig& c, const std::string& v) { c.tau = to_real("select.tau", v); },
                 [](const PipelineConfig& c) { return format_real(c.tau); }});
    t.push_back(gbt_setting("rounds", &GBTConfig::rounds));
    t.push_back(gbt_setting("max_depth", &GBTConfig::max_depth));
    t.push_back(gbt_setting("learning_rate", &GBTConfig::learning_rate));
    t.push_back(gbt_setting("lambda", &GBTConfig::lambda));
    t.push_back(gbt_setting("gamma", &GBTConfig::gamma));
    t.push_back(gbt_setting("min_child_weight", &GBTConfig::min_child_weight));
    t.push_back(gbt_setting("max_bin", &GBTConfig::max_bin));
    t.push_back({"models",
                 [](PipelineConfig& c, const std::string& v) {
                   std::vector<ModelKind> kinds;
                   for (const auto& name : split_list(v)) {
                     try {
                       kinds.push_back(model_kind_from_string(name));
                     } catch (const ValidationError&) {
                       bad_value("models", v, "a comma list of LR, SVM, GNB, BNB, KNN, GBT, MLP");
                     }
                     if (std::count(kinds.begin(), kinds.end(), kinds.back()) > 1) {
                       bad_value("models", v, "each model at most once");
                     }
                   }
                   c.models = kinds;
                 },
                 [](const PipelineConfig& c) { return kinds_text(c.models); }});
    t.push_back({"eval.runs", [](PipelineConfig& c, const std::string& v) { c.eval_runs = to_int32("eval.runs", v); },
                 [](const PipelineConfig& c) { return std::to_string(c.eval_runs); }});
    t.push_back({"eval.train_fraction",
                 [](PipelineConfig& c, const std::string& v) { c.train_fraction = to_real("eval.train_fraction", v); },
                 [](const PipelineConfig& c) { return format_real(c.train_fraction); }});
    auto kind_setting = [&t](const std::string& key, ModelKind PipelineConfig::*m) {
      t.push_back({key,
                   [key, m](PipelineConfig& c, const std::string& v) {
                     try {
                       c.*m = model_kind_from_string(v);
                     } catch (const ValidationError&) {
                       bad_value(key, v, "LR, SVM, GNB, BNB, KNN, GBT or MLP");
                     }
                   },
                   [m](const PipelineConfig& c) { return to_string(c.*m); }});
    };
    t.push_back({"cv.enabled", [](PipelineConfig& c, const std::string& v) { c.cv_enabled = to_bool("cv.enabled", v); },
                 [](const PipelineConfig& c) { return bool_text(c.cv_enabled); }});
    kind_setting("cv.model", &PipelineConfig::cv_model);
    t.push_back({"cv.iterations",
                 [](PipelineConfig& c, const std::string& v) { c.cv_iterations = to_int32("cv.iterations", v); },
                 [](const PipelineConfig& c) { return std::to_string(c.cv_iterations); }});
    t.push_back({"cv.train_fraction",
                 [](PipelineConfig& c, const std::string& v) { c.cv_train_fraction = to_real("cv.train_fraction", v); },
                 [](const PipelineConfig& c) { return format_real(c.cv_train_fraction); }});
    t.push_back({"sweep.enabled",
                 [](PipelineConfig& c, const std::string& v) { c.sweep_enabled = to_bool("sweep.enabled", v); },
                 [](const PipelineConfig& c) { return bool_text(c.sweep_enabled); }});
    kind_setting("sweep.model", &PipelineConfig::sweep_model);
    t.push_back({"sweep.runs_per_fraction",
                 [](PipelineConfig& c, const std::string& v) { c.sweep_runs = to_int32("sweep.runs_per_fraction", v); },
                 [](const PipelineConfig& c) { return std::to_string(c.sweep_runs); }});
    t.push_back({"sweep.fractions",
                 [](PipelineConfig& c, const std::string& v) {
                   std::vector<double> f;
                   for (const auto& item : split_list(v)) f.push_back(to_real("sweep.fractions", item));
                   c.sweep_fractions = f;
                 },
                 [](const PipelineConfig& c) { return reals_text(c.sweep_fractions); }});
    kind_setting("report.paired_model", &PipelineConfig::paired_model);
    return t;
  }();
  return table;
}

const Setting* find_setting(const std::string& key) {
  for (const auto& s : settings()) {
    if (s.key == key) return &s;
  }
  return nullptr;
}

}  // namespace

std::string to_string(ReductionPath path) {
  switch (path) {
    case ReductionPath::off: return "off";
    case ReductionPath::on: return "on";
    default: return "both";
  }
}

ReductionPath reduction_path_from_string(const std::string& text) {
  if (text == "off") return ReductionPath::off;
  if (text == "on") return ReductionPath::on;
  if (text == "both") return ReductionPath::both;
  throw ValidationError("unknown reduction path '" + text + "' (expected on, off or both)");
}

std::string format_real(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf, end);
}

std::uint64_t PipelineConfig::stage_seed(const std::string& stage) const {
  const auto it = seed_overrides.find(stage);
  return it != seed_overrides.end() ? it->second : derive_seed(seed, "stage/" + stage);
}

ModelSpec PipelineConfig::model_spec(ModelKind kind) const {
  const auto it = model_params.find(kind);
  return ModelSpec::make(kind, it == model_params.end() ? Hyperparams{} : it->second,
                         derive_seed(seed, "model/" + to_string(kind)));
}

std::vector<ModelSpec> PipelineConfig::model_specs() const {
  std::vector<ModelSpec> out;
  for (auto k : models) out.push_back(model_spec(k));
  return out;
}

std::filesystem::path PipelineConfig::resolved_cache_dir() const {
  return cache_dir.empty() ? output_dir / "cache" : cache_dir;
}

void PipelineConfig::validate(bool check_paths) const {
  auto fraction = [](const char* key, double f) {
    if (!(f > 0.0 && f < 1.0)) throw ValidationError(std::string(key) + " must lie in (0, 1)");
  };
  auto at_least_one = [](const char* key, int n) {
    if (n < 1) throw ValidationError(std::string(key) + " must be >= 1");
  };
  if (check_paths) {
    const std::pair<const char*, const std::filesystem::path*> inputs[] = {
        {"corpus", &corpus}, {"annotations", &annotations}, {"embeddings", &embeddings}};
    for (const auto& [key, p] : inputs) {
      if (p->empty()) throw ValidationError(std::string("config key '") + key + "' is required");
      if (!std::filesystem::is_regular_file(*p)) {
        throw ValidationError(std::string(key) + " file does not exist: " + p->string());
      }
    }
  }
  if (output_dir.empty()) throw ValidationError("output_dir must not be empty");
  at_least_one("quorum", quorum);
  at_least_one("select.runs", selection_runs);
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("select.tau must lie in [0, 1]");
  selection_gbt.validate();
  if (models.empty()) throw ValidationError("models must list at least one model");
  for (auto k : models) model_spec(k);
  for (const auto& [k, params] : model_params) model_spec(k);
  at_least_one("eval.runs", eval_runs);
  fraction("eval.train_fraction", train_fraction);
  at_least_one("cv.iterations", cv_iterations);
  fraction("cv.train_fraction", cv_train_fraction);
  at_least_one("sweep.runs_per_fraction", sweep_runs);
  if (sweep_fractions.empty()) throw ValidationError("sweep.fractions must not be empty");
  for (std::size_t i = 0; i < sweep_fractions.size(); ++i) {
    fraction("sweep.fractions", sweep_fractions[i]);
    if (i && !(sweep_fractions[i] > sweep_fractions[i - 1])) {
      throw ValidationError("sweep.fractions must be strictly increasing");
    }
  }
  if (reduction == ReductionPath::both &&
      std::find(models.begin(), models.end(), paired_model) == models.end()) {
    throw ValidationError("report.paired_model " + to_string(paired_model) + " is not in models");
  }
}

void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value) {
  if (const auto* s = find_setting(key)) {
    s->set(config, value);
    return;
  }
  if (key.rfind("seeds.", 0) == 0) {
    const std::string stage = key.substr(6);
    if (std::find(kStageSeedNames.begin(), kStageSeedNames.end(), stage) == kStageSeedNames.end()) {
      throw ValidationError("unknown config key '" + key + "'");
    }
    config.seed_overrides[stage] = to_u64(key, value);
    return;
  }
  if (key.rfind("model.", 0) == 0) {
    const auto dot = key.find('.', 6);
    if (dot != std::string::npos) {
      const std::string kind_name = key.substr(6, dot - 6);
      const std::string param = key.substr(dot + 1);
      ModelKind kind;
      try {
        kind = model_kind_from_string(kind_name);
      } catch (const ValidationError&) {
        throw ValidationError("unknown config key '" + key + "': no model " + kind_name);
      }
      const auto defaults = default_hyperparams(kind);
      if (!defaults.count(param)) {
        throw ValidationError("unknown config key '" + key + "': " + to_string(kind) + " has no parameter " + param);
      }
      config.model_params[kind][param] = to_real(key, value);
      return;
    }
  }
  throw ValidationError("unknown config key '" + key + "'");
}

PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir, PipelineConfig config) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    try {
      const auto* s = find_setting(key);
      if (s && s->is_path && !value.empty() && !base_dir.empty() && std::filesystem::path(value).is_relative()) {
        value = (base_dir / value).lexically_normal().string();
      }
      apply_setting(config, key, value);
    } catch (const ValidationError& e) {
      throw ValidationError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig config) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  return parse_config(in, path.parent_path(), std::move(config));
}

void apply_override(PipelineConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ValidationError("override '" + assignment + "' must be key=value");
  apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : settings()) out.emplace_back(s.key, s.get(config));
  for (const auto& stage : kStageSeedNames) out.emplace_back("seeds." + stage, std::to_string(config.stage_seed(stage)));
  for (auto kind : all_model_kinds()) {
    const auto spec = config.model_spec(kind);
    for (const auto& [param, value] : spec.hyperparams) {
      out.emplace_back("model." + to_string(kind) + "." + param, format_real(value));
    }
  }
  return out;
}

std::string config_text(const PipelineConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_entries(config)) {
    // Derived stage seeds are shown commented out so they keep following `seed`.
    const bool derived = k.rfind("seeds.", 0) == 0 && !config.seed_overrides.count(k.substr(6));
    out += (derived ? "# " : "") + k + " = " + v + "\n";
  }
  return out;
}

}  // namespace chatclf
