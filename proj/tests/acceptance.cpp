// Acceptance suite: one PASS/FAIL line per primary criterion, measured on
// the pinned synthetic benchmark. Exit status is the number of failures.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "chatclf/agreement.hpp"
#include "chatclf/config.hpp"
#include "chatclf/eval.hpp"
#include "chatclf/feature_select.hpp"
#include "chatclf/gbt.hpp"
#include "chatclf/models.hpp"
#include "chatclf/pipeline.hpp"
#include "chatclf/rng.hpp"
#include "chatclf/synthetic.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace chatclf;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 1;
constexpr int kRuns = 100;

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail, double seconds) {
  std::printf("%s  %-28s %s  [%.1f s]\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

// Runs `body`, which fills `detail` and returns pass/fail; exceptions fail.
void criterion(const std::string& name, const std::function<bool(std::string&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("threw: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(ok, name, detail, secs);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::vector<Annotation> coders(const std::vector<std::vector<int>>& units) {
  std::vector<Annotation> out;
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (std::size_t a = 0; a < units[u].size(); ++a) {
      out.push_back({"m" + std::to_string(u), "a" + std::to_string(a), units[u][a]});
    }
  }
  return out;
}

std::vector<Annotation> random_annotations(std::uint64_t seed, int units, int annotators) {
  Rng rng(seed);
  std::vector<Annotation> out;
  for (int u = 0; u < units; ++u) {
    const int truth = static_cast<int>(rng.below(2));
    for (int a = 0; a < annotators; ++a) {
      if (rng.bernoulli(0.2)) continue;  // missing value
      out.push_back({"m" + std::to_string(u), "a" + std::to_string(a), rng.bernoulli(0.25) ? 1 - truth : truth});
    }
  }
  return out;
}

bool alpha_oracle(std::string& detail) {
  const double perfect = krippendorff_alpha(coders({{0, 0, 0}, {1, 1, 1}, {0, 0, 0}, {1, 1, 1}})).value;
  const double hand = krippendorff_alpha(coders({{0, 0}, {1, 1}, {0, 1}, {1, 0}})).value;
  double worst = 0.0;
  bool invariant = true;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const auto anns = random_annotations(s, 40, 3);
    const double a = krippendorff_alpha(anns).value;
    worst = std::max(worst, std::abs(a - oracle::alpha_pairwise(anns)));
    auto swapped = anns;
    for (auto& x : swapped) x.label = 1 - x.label;
    auto renamed = anns;
    for (auto& x : renamed) x.annotator_id = x.annotator_id == "a0" ? "a1" : x.annotator_id == "a1" ? "a0" : x.annotator_id;
    invariant = invariant && krippendorff_alpha(swapped).value == a && krippendorff_alpha(renamed).value == a;
  }
  detail = "perfect " + fmt("%.17g", perfect) + " (== 1), hand |a-0.125| " + fmt("%.2e", std::abs(hand - 0.125)) +
           " (<= 1e-9), random vs pairwise " + fmt("%.2e", worst) + " (<= 1e-9), swap/permutation " +
           (invariant ? "exact" : "differs");
  return perfect == 1.0 && std::abs(hand - 0.125) <= 1e-9 && worst <= 1e-9 && invariant;
}

bool fusion_balance(std::string& detail) {
  SyntheticSpec s;
  s.n_samples = 1000;
  s.dim = 8;
  s.n_informative = 2;
  s.annotator_noise = kCalibratedAnnotatorNoise;
  s.seed = kSeed;
  const auto data = generate(s);
  const auto cag = fuse_labels(data.annotations, FusionMode::CAg);
  const auto mag = fuse_labels(data.annotations, FusionMode::MAg);
  std::set<std::pair<std::string, int>> in_mag;
  for (const auto& e : mag.entries) in_mag.insert({e.message_id, e.label});
  bool subset = true;
  for (const auto& e : cag.entries) subset = subset && in_mag.count({e.message_id, e.label});
  bool balanced = true;
  std::size_t kept = 0;
  for (const auto* f : {&cag, &mag}) {
    const auto b = balance(*f, derive_seed(kSeed, "balance"));
    std::set<std::pair<std::string, int>> input;
    for (const auto& e : f->entries) input.insert({e.message_id, e.label});
    bool sub = true;
    for (const auto& e : b.entries) sub = sub && input.count({e.message_id, e.label});
    balanced = balanced && sub && b.count(0) == b.count(1) &&
               b.count(0) == std::min(f->count(0), f->count(1));
    if (f == &cag) kept = b.entries.size();
  }
  detail = "|CAg| " + std::to_string(cag.entries.size()) + " <= |MAg| " + std::to_string(mag.entries.size()) +
           ", CAg subset of MAg " + (subset ? "yes" : "no") + ", balanced CAg " + std::to_string(kept) +
           " equal classes and subset " + (balanced ? "yes" : "no");
  return subset && cag.entries.size() <= mag.entries.size() && balanced;
}

struct Benchmark {
  LabeledDataset data;
  std::set<std::size_t> informative;
  std::vector<ModelSpec> specs;
  ModelSpec svm;
};

Benchmark load_benchmark() {
  Benchmark b;
  const auto gen = generate(benchmark_spec());
  b.data = labeled_dataset(gen);
  b.informative.insert(gen.informative.begin(), gen.informative.end());
  PipelineConfig config;
  config.seed = kSeed;
  b.specs = config.model_specs();
  b.svm = config.model_spec(ModelKind::SVM);
  return b;
}

EvalOptions eval_options(bool reduced) {
  EvalOptions o;
  o.runs = kRuns;
  o.train_fraction = 0.66;
  o.seed = derive_seed(kSeed, "stage/compare");
  o.reduction.enabled = reduced;
  o.reduction.mode = MaskMode::per_run;
  return o;
}

bool numerical_oracles(std::string& detail) {
  Rng rng(kSeed);
  const std::size_t n = 120;
  const Eigen::Index d = 4;
  Matrix x(static_cast<Eigen::Index>(n), d), grid(static_cast<Eigen::Index>(n), d);
  Labels y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    for (Eigen::Index j = 0; j < d; ++j) {
      x(static_cast<Eigen::Index>(i), j) = rng.normal() + 0.7 * y[i] * (j + 1);
      grid(static_cast<Eigen::Index>(i), j) = static_cast<double>(rng.below(4));
    }
  }
  LabeledDataset ds{x, y, {}};
  for (std::size_t i = 0; i < n; ++i) ds.ids.push_back(std::to_string(i));

  const auto gnb = fit(ModelSpec::make(ModelKind::GNB), ds);
  const Vector gs = predict_score(gnb, x);
  const auto gexp = oracle::gnb_posterior(x, y, 1e-9, x);
  double gnb_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) gnb_err = std::max(gnb_err, std::abs(gs[static_cast<Eigen::Index>(i)] - gexp[i]));

  const auto bnb = fit(ModelSpec::make(ModelKind::BNB), ds);
  const Matrix jll = dynamic_cast<const models::BernoulliNaiveBayes&>(*bnb.impl).joint_log_likelihood(x);
  const auto bexp = oracle::bnb_joint_log_likelihood(x, y, 1.0, 0.0, x);
  double bnb_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 2; ++c) bnb_err = std::max(bnb_err, std::abs(jll(static_cast<Eigen::Index>(i), c) - bexp[i][static_cast<std::size_t>(c)]));
  }

  // integer grid so distance ties occur
  LabeledDataset tied{grid, y, ds.ids};
  std::size_t knn_diff = 0;
  for (int k : {1, 4, 5}) {
    const auto knn = fit(ModelSpec::make(ModelKind::KNN, {{"k", k}}), tied);
    Matrix q = grid.topRows(60).array() + 0.5;
    q.bottomRows(30) = grid.bottomRows(30);
    const auto got = predict(knn, q);
    const auto expect = oracle::knn_predict(grid, y, k, q);
    for (std::size_t i = 0; i < got.size(); ++i) knn_diff += got[i] != expect[i];
  }

  auto p = models::MultilayerPerceptron::initialize(static_cast<std::size_t>(d), 8, kSeed);
  for (Eigen::Index i = 0; i < p.b1.size(); ++i) p.b1[i] = 0.1 * rng.normal();
  const double mlp_err = oracle::mlp_gradient_error(p, x.topRows(10), Labels(y.begin(), y.begin() + 10), 1e-2, 1e-4);

  GBTConfig gc;
  gc.rounds = 40;
  const auto gbt = GradientBoostedTrees::fit(x, y, gc);
  bool monotone = true;
  const auto& loss = gbt.training_loss();
  for (std::size_t i = 1; i < loss.size(); ++i) monotone = monotone && loss[i] <= loss[i - 1];

  detail = "GNB " + fmt("%.1e", gnb_err) + " (<= 1e-9), BNB " + fmt("%.1e", bnb_err) + " (<= 1e-12), KNN mismatches " +
           std::to_string(knn_diff) + " (== 0), MLP grad rel err " + fmt("%.1e", mlp_err) +
           " (<= 1e-4), GBT loss " + (monotone ? "non-increasing" : "increased");
  return gnb_err <= 1e-9 && bnb_err <= 1e-12 && knn_diff == 0 && mlp_err <= 1e-4 && monotone;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = testing::slurp(e.path());
  }
  return files;
}

bool determinism(std::string& detail) {
  testing::TempDir dir("acceptance");
  const auto gen = generate(benchmark_spec());
  write_corpus_jsonl(gen.corpus, dir / "corpus.jsonl");
  {
    std::ofstream ann(dir / "annotations.csv");
    write_annotations_csv(gen.annotations, ann);
  }
  write_embeddings(gen.embeddings, dir / "embeddings.qemb");
  PipelineConfig c;
  c.corpus = dir / "corpus.jsonl";
  c.annotations = dir / "annotations.csv";
  c.embeddings = dir / "embeddings.qemb";
  c.output_dir = dir / "out";
  c.seed = kSeed;
  c.eval_runs = 2;
  c.compare_fusion = true;
  c.sweep_enabled = true;
  c.sweep_runs = 2;
  c.sweep_fractions = {0.2, 0.66};
  run_pipeline(c);
  const auto first = read_tree(c.output_dir);
  fs::remove_all(c.output_dir);
  run_pipeline(c);
  const auto second = read_tree(c.output_dir);
  std::size_t differing = 0;
  for (const auto& [name, body] : first) differing += !second.count(name) || second.at(name) != body;
  differing += second.size() > first.size() ? second.size() - first.size() : 0;
  detail = std::to_string(first.size()) + " files, " + std::to_string(differing) + " differing (== 0)";
  return differing == 0 && !first.empty();
}

}  // namespace

int main() {
  std::printf("acceptance: seed %llu, %d Monte Carlo runs, benchmark separation %.2f\n",
              static_cast<unsigned long long>(kSeed), kRuns, benchmark_spec().class_separation);

  criterion("alpha oracle", alpha_oracle);
  criterion("fusion and balance", fusion_balance);
  criterion("numerical oracles", numerical_oracles);

  const auto bench = load_benchmark();

  criterion("CAg vs MAg noise", [&](std::string& detail) {
    Labels noisy = bench.data.y;
    Rng rng(derive_seed(kSeed, "mag-noise"));
    auto order = rng.permutation(noisy.size());
    const auto flips = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(noisy.size())));
    for (std::size_t i = 0; i < flips; ++i) noisy[order[i]] = 1 - noisy[order[i]];
    LabeledDataset mag = bench.data;
    mag.y = noisy;
    const auto opt = eval_options(false);
    const double f_cag = mc_compare(bench.data, {bench.svm}, opt).summaries.at("SVM").f1.mean;
    const double f_mag = mc_compare(mag, {bench.svm}, opt).summaries.at("SVM").f1.mean;
    detail = "SVM f1 CAg " + fmt("%.4f", f_cag) + " - MAg " + fmt("%.4f", f_mag) + " = " +
             fmt("%.4f", f_cag - f_mag) + " (>= 0.03)";
    return f_cag - f_mag >= 0.03;
  });

  MonteCarloResult plain;
  criterion("classifier suite", [&](std::string& detail) {
    plain = mc_compare(bench.data, bench.specs, eval_options(false));
    bool ok = true;
    for (const auto& m : plain.model_order) {
      const double f = plain.summaries.at(m).f1.mean;
      detail += m + " " + fmt("%.4f", f) + " ";
      ok = ok && f >= 0.90;
    }
    const double svm = plain.summaries.at("SVM").f1.mean;
    detail += "(all >= 0.90, SVM >= 0.95)";
    return ok && svm >= 0.95;
  });

  criterion("reduction parity", [&](std::string& detail) {
    const auto reduced = mc_compare(bench.data, {bench.svm}, eval_options(true));
    const double with = reduced.summaries.at("SVM").f1.mean;
    const double without = plain.summaries.count("SVM")
                               ? plain.summaries.at("SVM").f1.mean
                               : mc_compare(bench.data, {bench.svm}, eval_options(false)).summaries.at("SVM").f1.mean;
    double red = 0.0;
    for (double r : reduced.reduction_per_run) red += r / static_cast<double>(reduced.reduction_per_run.size());
    detail = "SVM f1 with " + fmt("%.4f", with) + " without " + fmt("%.4f", without) + " |diff| " +
             fmt("%.4f", std::abs(with - without)) + " (<= 0.02), mean per-run reduction " + fmt("%.3f", red);
    return std::abs(with - without) <= 0.02;
  });

  criterion("reduction magnitude", [&](std::string& detail) {
    const auto rep = probe_select_mc(bench.data, kRuns, 0.5, derive_seed(kSeed, "stage/select"));
    std::size_t kept_inf = 0, kept_noise = 0;
    for (std::size_t j = 0; j < rep.final_mask.size(); ++j) {
      if (!rep.final_mask[j]) continue;
      (bench.informative.count(j) ? kept_inf : kept_noise) += 1;
    }
    const double recall = static_cast<double>(kept_inf) / static_cast<double>(bench.informative.size());
    const double false_keep = static_cast<double>(kept_noise) /
                              static_cast<double>(bench.data.dim() - bench.informative.size());
    detail = "mean reduction " + fmt("%.3f", rep.mean_reduction) + " (in [0.60, 0.95]), informative recall " +
             fmt("%.3f", recall) + " (>= 0.9), noise false-keep " + fmt("%.3f", false_keep) + " (<= 0.1)";
    return rep.mean_reduction >= 0.60 && rep.mean_reduction <= 0.95 && recall >= 0.9 && false_keep <= 0.1;
  });

  criterion("train-size sweep", [&](std::string& detail) {
    const auto sw = train_size_sweep(bench.data, bench.svm, {0.15, 0.20, 0.25, 0.66}, kRuns,
                                     derive_seed(kSeed, "stage/sweep"));
    const double ref = sw.points.back().summary.f1.mean;
    bool ok = true;
    for (std::size_t i = 0; i < 3; ++i) {
      const double f = sw.points[i].summary.f1.mean;
      detail += fmt("f1@%.2f ", sw.points[i].train_fraction) + fmt("%.4f ", f);
      ok = ok && std::abs(f - ref) <= 0.03;
    }
    detail += "vs f1@0.66 " + fmt("%.4f", ref) + " (each within 0.03)";
    return ok;
  });

  criterion("cross-validation", [&](std::string& detail) {
    ReductionOptions red;
    red.enabled = true;
    red.mode = MaskMode::per_run;
    const auto cv = shuffle_split_cv(bench.data, bench.svm, 10, 0.2, derive_seed(kSeed, "stage/cv"), red);
    const auto& s = cv.summaries.at("SVM");
    detail = std::to_string(cv.runs.size()) + " iterations, SVM f1 mean " + fmt("%.4f", s.f1.mean) +
             " (>= 0.94) std " + fmt("%.4f", s.f1.std) + " (<= 0.02)";
    return cv.runs.size() == 10 && s.f1.mean >= 0.94 && s.f1.std <= 0.02;
  });

  criterion("determinism", determinism);

  std::printf("acceptance: %d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
