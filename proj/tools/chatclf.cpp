// chatclf command line: one subcommand per pipeline stage plus `run`.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "chatclf/agreement.hpp"
#include "chatclf/classifiers.hpp"
#include "chatclf/config.hpp"
#include "chatclf/corpus.hpp"
#include "chatclf/csv.hpp"
#include "chatclf/digest.hpp"
#include "chatclf/embeddings.hpp"
#include "chatclf/error.hpp"
#include "chatclf/eval.hpp"
#include "chatclf/feature_select.hpp"
#include "chatclf/parallel.hpp"
#include "chatclf/pipeline.hpp"
#include "chatclf/report.hpp"
#include "chatclf/synthetic.hpp"

namespace fs = std::filesystem;
using namespace chatclf;

namespace {

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  int workers = -1;
  bool print_config = false;
  bool quiet = false;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw ValidationError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FusedLabels read_labels(const fs::path& path, FusionMode mode = FusionMode::CAg) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_fused_csv(in, mode);
}

std::vector<bool> read_mask_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_mask(in);
}

LabeledDataset load_dataset(const fs::path& embeddings, const fs::path& labels, MissingIdPolicy policy) {
  const auto m = read_embeddings(embeddings);
  auto joined = join(read_labels(labels), m, policy);
  if (!joined.missing_ids.empty()) {
    std::cerr << "warning: " << joined.missing_ids.size() << " labeled ids have no vector\n";
  }
  return std::move(joined.data);
}

Hyperparams parse_params(const std::vector<std::string>& assignments) {
  Hyperparams h;
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ValidationError("--param '" + a + "' must be name=value");
    try {
      std::size_t used = 0;
      const std::string v = a.substr(eq + 1);
      h[a.substr(0, eq)] = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::logic_error&) {
      throw ValidationError("--param '" + a + "': value is not a number");
    }
  }
  return h;
}

struct ReductionFlags {
  bool on = false;
  bool off = false;
  bool paper_mode = false;

  void add(CLI::App* app) {
    auto* r = app->add_flag("--reduction", on, "Evaluate with probe feature reduction");
    auto* n = app->add_flag("--no-reduction", off, "Evaluate without feature reduction");
    r->excludes(n);
    app->add_flag("--paper-mode", paper_mode,
                  "One aggregate mask from the whole dataset instead of one per training split");
  }

  void apply(PipelineConfig& c) const {
    if (on) c.reduction = ReductionPath::on;
    if (off) c.reduction = ReductionPath::off;
    if (paper_mode) {
      c.mask_mode = MaskMode::aggregate;
      if (!off && !on && c.reduction == ReductionPath::off) c.reduction = ReductionPath::on;
    }
  }
};

ReductionOptions reduction_options(const PipelineConfig& c) {
  ReductionOptions r;
  r.enabled = c.reduction != ReductionPath::off;
  r.mode = c.mask_mode;
  r.gbt = c.selection_gbt;
  r.aggregate_runs = c.selection_runs;
  r.tau = c.tau;
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Short-text classification pipeline over sentence embeddings"};
  app.require_subcommand(0, 1);
  Globals g;
  app.add_option("--config", g.config_path, "Config file (key = value lines)");
  app.add_option("--set", g.overrides, "Config override key=value (repeatable)");
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--workers", g.workers, "Worker threads (0: all cores)");
  app.add_flag("--print-config", g.print_config, "Print the effective configuration and exit");
  app.add_flag("-q,--quiet", g.quiet, "No progress output on stderr");

  // stats
  auto* stats = app.add_subcommand("stats", "Corpus summary statistics");
  std::string corpus_path, corpus_format = "auto";
  stats->add_option("--corpus", corpus_path, "Corpus file (JSONL or CSV)");
  stats->add_option("--format", corpus_format, "auto, jsonl or csv");

  // agreement
  auto* agreement = app.add_subcommand("agreement", "Krippendorff's alpha, pooled and per room");
  std::string annotations_path;
  agreement->add_option("--annotations", annotations_path, "Annotation CSV or JSONL");
  agreement->add_option("--corpus", corpus_path, "Corpus file, for per-room alpha");

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Fuse annotator labels (CAg or MAg)");
  std::string mode_text = "CAg";
  int quorum = -1;
  fuse->add_option("--annotations", annotations_path, "Annotation CSV or JSONL");
  fuse->add_option("--mode", mode_text, "CAg or MAg");
  fuse->add_option("--quorum", quorum, "Annotations required per message");

  // balance
  auto* balance_cmd = app.add_subcommand("balance", "Downsample the majority class");
  std::string labels_path;
  balance_cmd->add_option("--labels", labels_path, "Fused label CSV")->required();

  // select
  auto* select = app.add_subcommand("select", "Random-probe feature selection");
  std::string embeddings_path;
  int select_runs = -1;
  double tau = -1;
  select->add_option("--embeddings", embeddings_path, "QEMB or JSONL vectors");
  select->add_option("--labels", labels_path, "Fused label CSV")->required();
  select->add_option("--runs", select_runs, "Probe runs");
  select->add_option("--tau", tau, "Keep-fraction threshold");

  // train
  auto* train = app.add_subcommand("train", "Fit one classifier");
  std::string model_text = "SVM", mask_path;
  std::vector<std::string> params;
  train->add_option("--embeddings", embeddings_path, "QEMB or JSONL vectors");
  train->add_option("--labels", labels_path, "Fused label CSV")->required();
  train->add_option("--model", model_text, "LR, SVM, GNB, BNB, KNN, GBT or MLP");
  train->add_option("--param", params, "Hyperparameter name=value (repeatable)");
  train->add_option("--mask", mask_path, "Feature mask to apply first");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Score vectors with a saved model");
  std::string model_path;
  predict_cmd->add_option("--model", model_path, "Model file from train")->required();
  predict_cmd->add_option("--embeddings", embeddings_path, "QEMB or JSONL vectors");
  predict_cmd->add_option("--mask", mask_path, "Feature mask used at training");

  // compare
  auto* compare = app.add_subcommand("compare", "Monte Carlo comparison of models");
  std::string models_text;
  int runs = -1;
  double train_fraction = -1;
  ReductionFlags compare_red;
  compare->add_option("--embeddings", embeddings_path, "QEMB or JSONL vectors");
  compare->add_option("--labels", labels_path, "Fused label CSV")->required();
  compare->add_option("--models", models_text, "Comma list of models");
  compare->add_option("--runs", runs, "Monte Carlo runs");
  compare->add_option("--train-fraction", train_fraction, "Training share of each split");
  compare_red.add(compare);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Train-size sweep for one model");
  std::string fractions_text;
  sweep->add_option("--embeddings", embeddings_path, "QEMB or JSONL vectors");
  sweep->add_option("--labels", labels_path, "Fused label CSV")->required();
  sweep->add_option("--model", model_text, "Model kind");
  sweep->add_option("--runs-per-fraction", runs, "Runs at each fraction");
  sweep->add_option("--fractions", fractions_text, "Comma list of train fractions");

  // cv
  auto* cv = app.add_subcommand("cv", "Shuffle-split cross-validation for one model");
  int iterations = -1;
  ReductionFlags cv_red;
  cv->add_option("--embeddings", embeddings_path, "QEMB or JSONL vectors");
  cv->add_option("--labels", labels_path, "Fused label CSV")->required();
  cv->add_option("--model", model_text, "Model kind");
  cv->add_option("--iterations", iterations, "Shuffle-split iterations");
  cv->add_option("--train-fraction", train_fraction, "Training share of each split");
  cv_red.add(cv);

  // report
  auto* report = app.add_subcommand("report", "Render table2 and figure CSVs from stored runs");
  std::string results_dir;
  report->add_option("--in", results_dir, "Directory with runs.csv and friends")->required();

  // run
  auto* run = app.add_subcommand("run", "Full pipeline from a config");
  ReductionFlags run_red;
  run_red.add(run);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus, annotations and embeddings");
  SyntheticSpec spec;
  bool benchmark = false;
  synth->add_flag("--benchmark", benchmark, "Start from the pinned benchmark settings");
  synth->add_option("--n", spec.n_samples, "Messages");
  synth->add_option("--dim", spec.dim, "Embedding dimension");
  synth->add_option("--informative", spec.n_informative, "Informative dimensions");
  synth->add_option("--separation", spec.class_separation, "Class mean distance per informative dim");
  synth->add_option("--label-noise", spec.label_noise, "Target flip probability");
  synth->add_option("--annotators", spec.annotators, "Annotators per message");
  synth->add_option("--annotator-noise", spec.annotator_noise, "Per-annotator flip probability");
  synth->add_option("--moderator-fraction", spec.moderator_fraction, "Share of moderator messages");
  synth->add_option("--rooms", spec.rooms, "Rooms");
  synth->add_option("--users", spec.users, "Users");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    PipelineConfig config;
    if (!g.config_path.empty()) config = load_config(g.config_path);
    for (const auto& o : g.overrides) apply_override(config, o);
    if (g.seed) config.seed = *g.seed;
    if (!g.out.empty()) config.output_dir = g.out;
    if (g.workers >= 0) config.workers = static_cast<unsigned>(g.workers);
    // Input flags fall back to the config file.
    if (corpus_path.empty()) corpus_path = config.corpus.string();
    if (annotations_path.empty()) annotations_path = config.annotations.string();
    if (embeddings_path.empty()) embeddings_path = config.embeddings.string();
    if (compare->parsed()) compare_red.apply(config);
    if (cv->parsed()) cv_red.apply(config);
    if (run->parsed()) run_red.apply(config);
    if (*fuse) {
      config.fusion = fusion_mode_from_string(mode_text);
      if (quorum >= 0) config.quorum = quorum;
    }
    if (select_runs >= 0) config.selection_runs = select_runs;
    if (tau >= 0) config.tau = tau;
    if (!models_text.empty()) apply_setting(config, "models", models_text);
    if (*compare && runs >= 0) config.eval_runs = runs;
    if (*compare && train_fraction >= 0) config.train_fraction = train_fraction;
    if (*sweep && runs >= 0) config.sweep_runs = runs;
    if (!fractions_text.empty()) apply_setting(config, "sweep.fractions", fractions_text);
    if (*cv && iterations >= 0) config.cv_iterations = iterations;
    if (*cv && train_fraction >= 0) config.cv_train_fraction = train_fraction;

    if (g.print_config) {
      std::cout << config_text(config);
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return 2;
    }
    config.validate(run->parsed());
    auto need = [](const std::string& value, const char* flag) {
      if (value.empty()) throw ValidationError(std::string(flag) + " is required (or set it in the config)");
    };
    if (*stats) need(corpus_path, "--corpus");
    if (*agreement || *fuse) need(annotations_path, "--annotations");
    if (*select || *train || *predict_cmd || *compare || *sweep || *cv) need(embeddings_path, "--embeddings");
    set_worker_count(config.workers);
    const fs::path out = config.output_dir;
    std::ostream* log = g.quiet ? nullptr : &std::cerr;

    if (*stats) {
      const auto fmt = corpus_format == "auto" ? corpus_format_from_path(corpus_path)
                       : corpus_format == "csv" ? CorpusFormat::csv
                       : corpus_format == "jsonl" ? CorpusFormat::jsonl
                                                  : throw ValidationError("--format must be auto, jsonl or csv");
      const auto corpus = load_corpus(corpus_path, fmt);
      for (const auto& w : corpus.warnings) std::cerr << "warning: " << w << '\n';
      const std::string text = stats_json(corpus).dump(2) + "\n";
      std::cout << text;
      if (!g.out.empty()) write_text(out / "stats.json", text);
    } else if (*agreement) {
      Corpus corpus;
      const bool with_corpus = !corpus_path.empty();
      if (with_corpus) corpus = load_corpus(corpus_path, corpus_format_from_path(corpus_path));
      const auto anns = load_annotations(annotations_path, with_corpus ? &corpus : nullptr);
      for (const auto& w : anns.warnings) std::cerr << "warning: " << w << '\n';
      Json j;
      if (with_corpus) {
        j = agreement_json(agreement_by_room(corpus, anns.annotations));
      } else {
        j = {{"overall", to_json(krippendorff_alpha(anns.annotations))}};
      }
      const std::string text = j.dump(2) + "\n";
      std::cout << text;
      if (!g.out.empty()) write_text(out / "agreement.json", text);
    } else if (*fuse) {
      const auto anns = load_annotations(annotations_path);
      const auto fused = fuse_labels(anns.annotations, config.fusion, config.quorum);
      if (fused.entries.empty()) throw StageError("agreement", "fusion kept no messages");
      std::ostringstream csv;
      write_fused_csv(fused, csv);
      write_text(out / "fused.csv", csv.str());
      std::cout << fusion_json(fused).dump(2) << '\n';
    } else if (*balance_cmd) {
      const auto balanced = balance(read_labels(labels_path), config.stage_seed("balance"));
      std::ostringstream csv;
      write_fused_csv(balanced, csv);
      write_text(out / "balanced.csv", csv.str());
      std::cout << fusion_json(balanced).dump(2) << '\n';
    } else if (*select) {
      const auto data = load_dataset(embeddings_path, labels_path, config.missing_ids);
      if (log) *log << "select: " << config.selection_runs << " probe runs on " << data.size() << " rows\n";
      const auto rep = probe_select_mc(data, config.selection_runs, config.tau, config.stage_seed("select"),
                                       config.selection_gbt);
      std::ostringstream mask;
      write_mask(rep.final_mask, mask);
      write_text(out / "mask.qmsk", mask.str());
      write_text(out / "selection.json", selection_json(rep).dump(2) + "\n");
      std::cout << "kept " << rep.kept() << " of " << rep.final_mask.size() << " features, mean reduction "
                << format_fixed3(rep.mean_reduction) << '\n';
    } else if (*train) {
      auto data = load_dataset(embeddings_path, labels_path, config.missing_ids);
      if (!mask_path.empty()) data = apply_mask(data, read_mask_file(mask_path));
      const auto kind = model_kind_from_string(model_text);
      Hyperparams h = config.model_spec(kind).hyperparams;
      for (const auto& [k, v] : parse_params(params)) h[k] = v;
      const auto model = fit(ModelSpec::make(kind, h, config.model_spec(kind).seed), data);
      fs::create_directories(out);
      std::ofstream file(out / "model.qmdl", std::ios::binary | std::ios::trunc);
      save_model(model, file);
      if (!file) throw ValidationError("cannot write " + (out / "model.qmdl").string());
      const auto train_metrics = metrics(data.y, predict(model, data.x));
      std::cout << to_string(kind) << ": iterations " << model.diagnostics.iterations << ", final loss "
                << format_real(model.diagnostics.final_loss) << ", converged "
                << (model.diagnostics.converged ? "yes" : "no") << ", training f1 "
                << format_fixed3(train_metrics.f1) << '\n';
    } else if (*predict_cmd) {
      std::ifstream file(model_path, std::ios::binary);
      if (!file) throw ValidationError("cannot open " + model_path);
      const auto model = load_model(file);
      const auto m = read_embeddings(embeddings_path);
      Matrix x = m.vectors.cast<double>();
      if (!mask_path.empty()) x = apply_mask(x, read_mask_file(mask_path));
      const Vector scores = predict_score(model, x);
      const Labels labels = predict(model, x);
      std::ostringstream rows;
      rows << "id,score,label\n";
      for (std::size_t i = 0; i < m.size(); ++i) {
        rows << csv::escape(m.ids[i]) << ',' << format_real(scores[static_cast<Eigen::Index>(i)]) << ','
            << labels[i] << '\n';
      }
      write_text(out / "predictions.csv", rows.str());
      std::cout << "scored " << m.size() << " vectors\n";
    } else if (*compare) {
      const auto data = load_dataset(embeddings_path, labels_path, config.missing_ids);
      EvalOptions opt;
      opt.runs = config.eval_runs;
      opt.train_fraction = config.train_fraction;
      opt.seed = config.stage_seed("compare");
      ExperimentResults results;
      results.paired_model = to_string(config.paired_model);
      if (config.reduction != ReductionPath::on) {
        if (log) *log << "compare: " << opt.runs << " runs without reduction\n";
        results.without_reduction = mc_compare(data, config.model_specs(), opt);
      }
      if (config.reduction != ReductionPath::off) {
        if (log) *log << "compare: " << opt.runs << " runs with reduction\n";
        opt.reduction = reduction_options(config);
        results.with_reduction = mc_compare(data, config.model_specs(), opt);
      }
      make_report(results, Json{{"command", "compare"}}).write(out);
      std::cout << make_report(results, Json{}).table2.text();
    } else if (*sweep) {
      const auto data = load_dataset(embeddings_path, labels_path, config.missing_ids);
      ExperimentResults results;
      results.sweep = train_size_sweep(data, config.model_spec(model_kind_from_string(model_text)),
                                       config.sweep_fractions, config.sweep_runs, config.stage_seed("sweep"));
      std::ostringstream csv;
      write_sweep_csv(*results.sweep, csv);
      write_text(out / "sweep.csv", csv.str());
      write_text(out / "fig8.csv", figure_csv("fig8", results));
      write_text(out / "sweep_summary.json", summary_json(*results.sweep).dump(2) + "\n");
      for (const auto& p : results.sweep->points) {
        std::cout << format_real(p.train_fraction) << " mean f1 " << format_fixed3(p.summary.f1.mean) << '\n';
      }
    } else if (*cv) {
      const auto data = load_dataset(embeddings_path, labels_path, config.missing_ids);
      const auto red = reduction_options(config);
      const auto result = shuffle_split_cv(data, config.model_spec(model_kind_from_string(model_text)),
                                           config.cv_iterations, config.cv_train_fraction,
                                           config.stage_seed("cv"), red);
      std::ostringstream csv;
      write_runs_csv(result.runs, csv);
      write_text(out / "cv_runs.csv", csv.str());
      write_text(out / "cv.json", summary_json(result).dump(2) + "\n");
      const auto& f1 = result.summaries.begin()->second.f1;
      std::cout << "cv f1 mean " << format_fixed3(f1.mean) << ", std " << format_fixed3(f1.std) << '\n';
    } else if (*report) {
      const fs::path dir = results_dir;
      ExperimentResults results;
      results.paired_model = to_string(config.paired_model);
      Json provenance = {{"command", "report"}};
      auto read_runs = [&](const std::string& name) -> std::optional<std::vector<RunMetrics>> {
        if (!fs::exists(dir / name)) return std::nullopt;
        std::ifstream in(dir / name);
        provenance["inputs"][name] = sha256_file(dir / name);
        return read_runs_csv(in);
      };
      if (auto all = read_runs("runs.csv")) {
        std::vector<RunMetrics> plain, reduced;
        for (const auto& m : *all) (m.reduced ? reduced : plain).push_back(m);
        if (!plain.empty()) results.without_reduction = result_from_runs(plain);
        if (!reduced.empty()) {
          results.with_reduction = result_from_runs(reduced);
          if (fs::exists(dir / "reduction.csv")) {
            std::ifstream in(dir / "reduction.csv");
            provenance["inputs"]["reduction.csv"] = sha256_file(dir / "reduction.csv");
            results.with_reduction->reduction_per_run = read_reduction_csv(in);
          }
        }
      }
      if (auto a = read_runs("runs_cag.csv")) results.cag = result_from_runs(*a);
      if (auto b = read_runs("runs_mag.csv")) results.mag = result_from_runs(*b);
      if (auto c = read_runs("cv_runs.csv")) {
        results.cv = result_from_runs(*c);
        if (fs::exists(dir / "cv_reduction.csv")) {
          std::ifstream in(dir / "cv_reduction.csv");
          provenance["inputs"]["cv_reduction.csv"] = sha256_file(dir / "cv_reduction.csv");
          results.cv->reduction_per_run = read_reduction_csv(in);
        }
      }
      if (fs::exists(dir / "sweep.csv")) {
        std::ifstream in(dir / "sweep.csv");
        provenance["inputs"]["sweep.csv"] = sha256_file(dir / "sweep.csv");
        results.sweep = read_sweep_csv(in);
      }
      const auto bundle = make_report(results, provenance);
      bundle.write(out);
      std::cout << bundle.table2.text();
    } else if (*run) {
      const auto result = run_pipeline(config, log);
      std::cout << result.bundle.table2.text();
    } else if (*synth) {
      if (benchmark) {
        SyntheticSpec b = benchmark_spec(config.seed);
        // Explicit flags still win over the benchmark settings.
        auto given = [&](const char* name) { return synth->get_option(name)->count() > 0; };
        if (given("--n")) b.n_samples = spec.n_samples;
        if (given("--dim")) b.dim = spec.dim;
        if (given("--informative")) b.n_informative = spec.n_informative;
        if (given("--separation")) b.class_separation = spec.class_separation;
        if (given("--label-noise")) b.label_noise = spec.label_noise;
        if (given("--annotators")) b.annotators = spec.annotators;
        if (given("--annotator-noise")) b.annotator_noise = spec.annotator_noise;
        if (given("--moderator-fraction")) b.moderator_fraction = spec.moderator_fraction;
        if (given("--rooms")) b.rooms = spec.rooms;
        if (given("--users")) b.users = spec.users;
        spec = b;
      } else {
        spec.seed = config.seed;
      }
      const auto data = generate(spec);
      fs::create_directories(out);
      write_corpus_jsonl(data.corpus, out / "corpus.jsonl");
      std::ostringstream anns;
      write_annotations_csv(data.annotations, anns);
      write_text(out / "annotations.csv", anns.str());
      write_embeddings(data.embeddings, out / "embeddings.qemb");
      Json meta = {{"n_samples", spec.n_samples},   {"dim", spec.dim},
                   {"n_informative", spec.n_informative}, {"class_separation", spec.class_separation},
                   {"label_noise", spec.label_noise}, {"annotators", spec.annotators},
                   {"annotator_noise", spec.annotator_noise}, {"moderator_fraction", spec.moderator_fraction},
                   {"rooms", spec.rooms},           {"users", spec.users},
                   {"seed", spec.seed},             {"informative", data.informative}};
      write_text(out / "synth.json", meta.dump(2) + "\n");
      std::cout << "wrote " << data.corpus.messages.size() << " messages to " << out.string() << '\n';
    }
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const StageError& e) {
    std::cerr << "error: stage " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
