#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chatclf/agreement.hpp"
#include "chatclf/classifiers.hpp"
#include "chatclf/embeddings.hpp"
#include "chatclf/eval.hpp"
#include "chatclf/gbt.hpp"

namespace chatclf {

enum class ReductionPath { off, on, both };

std::string to_string(ReductionPath path);
ReductionPath reduction_path_from_string(const std::string& text);

struct PipelineConfig {
  std::filesystem::path corpus;
  std::string corpus_format = "auto";  // auto, jsonl or csv
  std::filesystem::path annotations;
  std::filesystem::path embeddings;
  std::filesystem::path output_dir = "out";
  std::filesystem::path cache_dir;  // empty: <output_dir>/cache
  std::uint64_t seed = 0;
  unsigned workers = 0;             // 0: hardware concurrency

  FusionMode fusion = FusionMode::CAg;
  int quorum = 3;
  bool compare_fusion = false;      // also evaluate CAg against MAg
  bool exclude_moderators = false;
  bool balance = true;
  MissingIdPolicy missing_ids = MissingIdPolicy::skip;

  ReductionPath reduction = ReductionPath::both;
  MaskMode mask_mode = MaskMode::per_run;
  int selection_runs = 100;         // aggregate mask only
  double tau = 0.5;
  GBTConfig selection_gbt;

  std::vector<ModelKind> models = all_model_kinds();
  std::map<ModelKind, Hyperparams> model_params;  // overrides of the defaults

  int eval_runs = 1000;
  double train_fraction = 0.66;

  bool cv_enabled = true;
  ModelKind cv_model = ModelKind::SVM;
  int cv_iterations = 10;
  double cv_train_fraction = 0.2;

  bool sweep_enabled = false;
  ModelKind sweep_model = ModelKind::SVM;
  int sweep_runs = 100;
  std::vector<double> sweep_fractions = default_sweep_fractions();

  ModelKind paired_model = ModelKind::SVM;

  // Stage seeds; unset ones derive from `seed` by stage name.
  std::map<std::string, std::uint64_t> seed_overrides;

  std::uint64_t stage_seed(const std::string& stage) const;
  ModelSpec model_spec(ModelKind kind) const;
  std::vector<ModelSpec> model_specs() const;
  std::filesystem::path resolved_cache_dir() const;

  // Ranges always; input paths only when `check_paths`.
  void validate(bool check_paths = true) const;
};

inline const std::vector<std::string> kStageSeedNames = {"balance", "compare", "fusion", "cv", "sweep",
                                                         "select"};

// Sets one key; throws ValidationError on unknown keys or bad values.
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value);

// Parses "key = value" lines; '#' starts a comment. Relative paths resolve
// against `base_dir`.
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {},
                            PipelineConfig config = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig config = {});

// "key=value" override, as given on the command line.
void apply_override(PipelineConfig& config, const std::string& assignment);

// Every key with its effective value, in a form parse_config reads back.
std::string config_text(const PipelineConfig& config);
std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& config);

std::string format_real(double v);  // shortest text that reads back exactly

}  // namespace chatclf
