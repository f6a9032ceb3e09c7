#include "chatclf/pipeline.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "chatclf/agreement.hpp"
#include "chatclf/digest.hpp"
#include "chatclf/embeddings.hpp"
#include "chatclf/error.hpp"
#include "chatclf/parallel.hpp"

namespace chatclf {
namespace {

Json stats_object(const CorpusStats& s) {
  return {{"room_count", s.room_count},
          {"message_count_with_moderator", s.message_count_with_moderator},
          {"message_count_without_moderator", s.message_count_without_moderator},
          {"user_count", s.user_count},
          {"mean_chars", s.mean_chars},
          {"median_chars", s.median_chars},
          {"mean_tokens", s.mean_tokens},
          {"median_tokens", s.median_tokens}};
}

bool read_file(const std::filesystem::path& p, std::string& out) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

void write_file_atomic(const std::filesystem::path& p, const std::string& contents) {
  std::filesystem::create_directories(p.parent_path());
  const auto tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << contents;
    if (!out) throw std::runtime_error("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, p);
}

class Logger {
 public:
  explicit Logger(std::ostream* out) : out_(out) {}
  void operator()(const std::string& line) const {
    if (out_) *out_ << line << std::endl;
  }

 private:
  std::ostream* out_;
};

// Runs `body`, turning errors raised on valid inputs into StageError(stage).
template <typename F>
auto stage(const std::string& name, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const ValidationError& e) {
    throw StageError(name, e.what());
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string dataset_digest(const LabeledDataset& d) {
  std::string bytes;
  for (std::size_t i = 0; i < d.size(); ++i) {
    bytes += d.ids[i];
    bytes += '\0';
    bytes += static_cast<char>('0' + d.y[i]);
  }
  bytes.append(reinterpret_cast<const char*>(d.x.data()), static_cast<std::size_t>(d.x.size()) * sizeof(double));
  return sha256_hex(bytes);
}

}  // namespace

Json stats_json(const Corpus& corpus) {
  return {{"all_messages", stats_object(corpus_stats(corpus, MessageFilter::all))},
          {"without_moderator", stats_object(corpus_stats(corpus, MessageFilter::exclude_moderator))}};
}

Json to_json(const AlphaResult& a) {
  return {{"alpha", a.value},
          {"degenerate", a.degenerate},
          {"pairable_units", a.pairable_units},
          {"pairable_values", a.pairable_values},
          {"categories", a.coincidence.category_labels},
          {"coincidence", a.coincidence.values}};
}

Json agreement_json(const AgreementReport& r) {
  Json rooms = Json::array();
  for (const auto& room : r.rooms) {
    Json entry = {{"room_id", room.room_id}};
    entry.update(to_json(room.alpha));
    rooms.push_back(entry);
  }
  return {{"overall", to_json(r.overall)},
          {"mean_room_alpha", r.mean_room_alpha},
          {"rooms", rooms},
          {"skipped_rooms", r.skipped_rooms}};
}

Json fusion_json(const FusedLabels& f) {
  std::map<std::string, std::size_t> reasons;
  for (const auto& e : f.excluded) ++reasons[to_string(e.reason)];
  return {{"mode", to_string(f.mode)},
          {"entries", f.entries.size()},
          {"label_0", f.count(0)},
          {"label_1", f.count(1)},
          {"excluded", f.excluded.size()},
          {"excluded_by_reason", reasons}};
}

Json selection_json(const SelectionReport& r) {
  return {{"runs", r.runs},
          {"tau", r.tau},
          {"seed", r.seed},
          {"kept", r.kept()},
          {"dim", r.final_mask.size()},
          {"mean_reduction", r.mean_reduction},
          {"kept_per_run", r.kept_per_run},
          {"keep_fraction_per_feature", r.keep_fraction_per_feature}};
}

std::string fused_record(const FusedLabels& f) {
  Json entries = Json::array();
  for (const auto& e : f.entries) entries.push_back({e.message_id, e.label});
  Json excluded = Json::array();
  for (const auto& e : f.excluded) excluded.push_back({e.message_id, to_string(e.reason)});
  return Json{{"mode", to_string(f.mode)}, {"entries", entries}, {"excluded", excluded}}.dump() + "\n";
}

FusedLabels parse_fused_record(const std::string& text) {
  try {
    const auto j = Json::parse(text);
    FusedLabels f;
    f.mode = fusion_mode_from_string(j.at("mode").get<std::string>());
    for (const auto& e : j.at("entries")) f.entries.push_back({e.at(0).get<std::string>(), e.at(1).get<int>()});
    for (const auto& e : j.at("excluded")) {
      const auto reason = e.at(1).get<std::string>();
      ExclusionReason r = ExclusionReason::below_quorum;
      if (reason == to_string(ExclusionReason::disagreement)) r = ExclusionReason::disagreement;
      else if (reason == to_string(ExclusionReason::tie)) r = ExclusionReason::tie;
      else if (reason != to_string(ExclusionReason::below_quorum)) throw ValidationError("bad exclusion reason");
      f.excluded.push_back({e.at(0).get<std::string>(), r});
    }
    return f;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("corrupt fused-label record: ") + e.what());
  }
}

PipelineRun run_pipeline(const PipelineConfig& config, std::ostream* log_stream) {
  config.validate();
  const Logger log(log_stream);
  set_worker_count(config.workers);
  const auto cache = config.resolved_cache_dir();

  // load
  struct Inputs {
    Corpus corpus;
    AnnotationSet annotations;
    EmbeddingMatrix embeddings;
  } in;
  Json input_digests;
  try {
    const auto fmt = config.corpus_format == "auto" ? corpus_format_from_path(config.corpus)
                     : config.corpus_format == "csv" ? CorpusFormat::csv
                                                     : CorpusFormat::jsonl;
    in.corpus = load_corpus(config.corpus, fmt);
    in.annotations = load_annotations(config.annotations, &in.corpus);
    in.embeddings = read_embeddings(config.embeddings);
    const std::pair<const char*, const std::filesystem::path*> files[] = {
        {"corpus", &config.corpus}, {"annotations", &config.annotations}, {"embeddings", &config.embeddings}};
    for (const auto& [key, p] : files) {
      input_digests[key] = {{"path", p->string()},
                            {"bytes", std::filesystem::file_size(*p)},
                            {"sha256", sha256_file(*p)}};
    }
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("load: ") + e.what());
  }
  log("load: " + std::to_string(in.corpus.messages.size()) + " messages, " +
      std::to_string(in.annotations.annotations.size()) + " annotations, " +
      std::to_string(in.embeddings.size()) + " vectors of dim " + std::to_string(in.embeddings.dim()));
  for (const auto& w : in.corpus.warnings) log("load: warning: " + w);
  for (const auto& w : in.annotations.warnings) log("load: warning: " + w);

  std::map<std::string, std::string> artifacts;
  artifacts["stats.json"] = stage("load", [&] { return stats_json(in.corpus).dump(2) + "\n"; });

  std::vector<Annotation> annotations = in.annotations.annotations;
  if (config.exclude_moderators) {
    std::set<std::string> moderators;
    for (const auto& m : in.corpus.messages) {
      if (m.is_moderator) moderators.insert(m.id);
    }
    std::erase_if(annotations, [&](const Annotation& a) { return moderators.count(a.message_id) > 0; });
  }

  // alpha
  const auto agreement = stage("agreement", [&] { return agreement_by_room(in.corpus, annotations); });
  artifacts["agreement.json"] = agreement_json(agreement).dump(2) + "\n";
  log("agreement: pooled alpha " + format_fixed3(agreement.overall.value) + ", mean room alpha " +
      format_fixed3(agreement.mean_room_alpha));

  // fuse and balance, cached by input digest
  const std::string base_key = input_digests["annotations"]["sha256"].get<std::string>() +
                               input_digests["corpus"]["sha256"].get<std::string>() +
                               (config.exclude_moderators ? "m" : "-") + std::to_string(config.quorum);
  auto fused_for = [&](FusionMode mode) {
    const std::string key = sha256_hex("fuse/" + base_key + to_string(mode));
    const auto path = cache / ("fused-" + key + ".json");
    std::string text;
    FusedLabels fused;
    if (read_file(path, text)) {
      fused = parse_fused_record(text);
      log("agreement: " + to_string(mode) + " fusion read from cache");
    } else {
      fused = stage("agreement", [&] { return fuse_labels(annotations, mode, config.quorum); });
      write_file_atomic(path, fused_record(fused));
    }
    if (fused.entries.empty()) {
      throw StageError("agreement", to_string(mode) + " fusion with quorum " + std::to_string(config.quorum) +
                                         " kept no messages (" + std::to_string(fused.excluded.size()) +
                                         " excluded)");
    }
    return fused;
  };
  auto balanced_for = [&](const FusedLabels& fused) {
    if (!config.balance) return fused;
    const std::uint64_t seed = config.stage_seed("balance");
    const std::string key = sha256_hex("balance/" + fused_record(fused) + std::to_string(seed));
    const auto path = cache / ("balanced-" + key + ".json");
    std::string text;
    if (read_file(path, text)) return parse_fused_record(text);
    auto balanced = stage("balance", [&] { return balance(fused, seed); });
    write_file_atomic(path, fused_record(balanced));
    return balanced;
  };
  auto join_for = [&](const FusedLabels& labels) {
    return stage("join", [&] { return join(labels, in.embeddings, config.missing_ids); });
  };

  const FusedLabels fused = fused_for(config.fusion);
  const FusedLabels balanced = balanced_for(fused);
  {
    std::ostringstream a, b;
    write_fused_csv(fused, a);
    write_fused_csv(balanced, b);
    artifacts["fused.csv"] = a.str();
    artifacts["balanced.csv"] = b.str();
  }
  log("agreement: " + to_string(fused.mode) + " kept " + std::to_string(fused.entries.size()) + " (" +
      std::to_string(fused.count(1)) + " positive); balanced to " + std::to_string(balanced.entries.size()));

  const JoinResult joined = join_for(balanced);
  const LabeledDataset& data = joined.data;
  artifacts["join.json"] = Json{{"rows", data.size()},
                                {"dim", data.dim()},
                                {"label_0", data.count(0)},
                                {"label_1", data.count(1)},
                                {"missing_ids", joined.missing_ids}}
                               .dump(2) +
                           "\n";
  log("join: " + std::to_string(data.size()) + " rows, " + std::to_string(joined.missing_ids.size()) +
      " labels without a vector");

  // select
  const bool with_reduction = config.reduction != ReductionPath::off;
  ReductionOptions reduction;
  reduction.enabled = true;
  reduction.mode = config.mask_mode;
  reduction.gbt = config.selection_gbt;
  reduction.aggregate_runs = config.selection_runs;
  reduction.tau = config.tau;
  Json selection_info = {{"mask_mode", to_string(config.mask_mode)}};
  if (with_reduction && config.mask_mode == MaskMode::aggregate) {
    const std::uint64_t seed = config.stage_seed("select");
    const std::string key = sha256_hex("select/" + dataset_digest(data) + std::to_string(seed) + "/" +
                                       std::to_string(config.selection_runs) + "/" + format_real(config.tau) +
                                       "/" + std::to_string(config.selection_gbt.rounds) + "/" +
                                       std::to_string(config.selection_gbt.max_depth) + "/" +
                                       format_real(config.selection_gbt.learning_rate) + "/" +
                                       format_real(config.selection_gbt.lambda) + "/" +
                                       format_real(config.selection_gbt.gamma) + "/" +
                                       format_real(config.selection_gbt.min_child_weight) + "/" +
                                       std::to_string(config.selection_gbt.max_bin));
    const auto path = cache / ("selection-" + key + ".json");
    std::string text;
    if (read_file(path, text)) {
      selection_info["report"] = Json::parse(text);
      log("select: aggregate mask read from cache");
    } else {
      const auto report = stage("select", [&] {
        return probe_select_mc(data, config.selection_runs, config.tau, seed, config.selection_gbt);
      });
      // Stored and reread so cold and warm runs render identical JSON.
      const std::string record = selection_json(report).dump() + "\n";
      write_file_atomic(path, record);
      selection_info["report"] = Json::parse(record);
    }
    const auto fractions = selection_info["report"]["keep_fraction_per_feature"].get<std::vector<double>>();
    reduction.global_mask = threshold_mask(fractions, config.tau);
    if (std::none_of(reduction.global_mask.begin(), reduction.global_mask.end(), [](bool b) { return b; })) {
      throw StageError("select", "aggregate mask keeps no features at tau " + format_real(config.tau));
    }
    std::ostringstream mask;
    write_mask(reduction.global_mask, mask);
    artifacts["mask.qmsk"] = mask.str();
    log("select: aggregate mask keeps " + std::to_string(std::count(reduction.global_mask.begin(),
                                                                     reduction.global_mask.end(), true)) +
        " of " + std::to_string(data.dim()) + " features");
  }
  if (with_reduction) artifacts["selection.json"] = selection_info.dump(2) + "\n";

  // evaluate
  PipelineRun run;
  auto& results = run.results;
  results.paired_model = to_string(config.paired_model);
  EvalOptions eval;
  eval.runs = config.eval_runs;
  eval.train_fraction = config.train_fraction;
  eval.seed = config.stage_seed("compare");
  const auto specs = config.model_specs();
  if (config.reduction != ReductionPath::on) {
    log("evaluate: " + std::to_string(config.eval_runs) + " runs without reduction");
    results.without_reduction = stage("evaluate", [&] { return mc_compare(data, specs, eval); });
  }
  if (with_reduction) {
    log("evaluate: " + std::to_string(config.eval_runs) + " runs with reduction (" +
        to_string(config.mask_mode) + ")");
    EvalOptions reduced = eval;
    reduced.reduction = reduction;
    results.with_reduction = stage("evaluate", [&] { return mc_compare(data, specs, reduced); });
  }
  if (config.compare_fusion) {
    log("evaluate: fusion comparison");
    EvalOptions opt = eval;
    opt.seed = config.stage_seed("fusion");
    const auto cag = join_for(balanced_for(fused_for(FusionMode::CAg)));
    const auto mag = join_for(balanced_for(fused_for(FusionMode::MAg)));
    results.cag = stage("evaluate", [&] { return mc_compare(cag.data, specs, opt); });
    results.mag = stage("evaluate", [&] { return mc_compare(mag.data, specs, opt); });
  }
  if (config.cv_enabled) {
    log("evaluate: shuffle-split cross-validation");
    ReductionOptions cv_reduction = reduction;
    cv_reduction.enabled = with_reduction;
    results.cv = stage("evaluate", [&] {
      return shuffle_split_cv(data, config.model_spec(config.cv_model), config.cv_iterations,
                              config.cv_train_fraction, config.stage_seed("cv"), cv_reduction);
    });
  }
  if (config.sweep_enabled) {
    log("evaluate: train-size sweep");
    results.sweep = stage("evaluate", [&] {
      return train_size_sweep(data, config.model_spec(config.sweep_model), config.sweep_fractions,
                              config.sweep_runs, config.stage_seed("sweep"));
    });
  }

  // report
  Json provenance;
  provenance["tool"] = "chatclf";
  provenance["format_version"] = 1;
  Json cfg;
  for (const auto& [k, v] : config_entries(config)) cfg[k] = v;
  provenance["config"] = cfg;
  Json seeds = {{"master", config.seed}};
  for (const auto& s : kStageSeedNames) seeds[s] = config.stage_seed(s);
  provenance["seeds"] = seeds;
  provenance["inputs"] = input_digests;
  provenance["stages"] = {{"fusion", fusion_json(fused)},
                          {"balanced", fusion_json(balanced)},
                          {"dataset_sha256", dataset_digest(data)}};
  provenance["digest"] = sha256_hex(input_digests.dump() + cfg.dump());

  run.bundle = stage("report", [&] {
    auto bundle = make_report(results, Json{});
    for (auto& [name, contents] : artifacts) bundle.files[name] = contents;
    Json outputs;
    for (const auto& [name, contents] : bundle.files) {
      if (name != "provenance.json") outputs[name] = sha256_hex(contents);
    }
    provenance["outputs"] = outputs;
    bundle.provenance = provenance;
    bundle.files["provenance.json"] = provenance.dump(2) + "\n";
    bundle.write(config.output_dir);
    return bundle;
  });
  log("report: wrote " + std::to_string(run.bundle.files.size()) + " files to " + config.output_dir.string());
  return run;
}

}  // namespace chatclf
