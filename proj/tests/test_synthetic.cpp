#include <doctest.h>

#include <cmath>
#include <set>

#include "chatclf/agreement.hpp"
#include "chatclf/classifiers.hpp"
#include "chatclf/error.hpp"
#include "chatclf/eval.hpp"
#include "chatclf/synthetic.hpp"
#include "oracles.hpp"

using namespace chatclf;

namespace {

SyntheticSpec small(std::uint64_t seed = 1) {
  SyntheticSpec s;
  s.n_samples = 400;
  s.dim = 64;
  s.n_informative = 16;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("classes are balanced and informative dims carry the shift") {
  const auto d = generate(small());
  std::size_t ones = 0;
  for (int c : d.classes) ones += static_cast<std::size_t>(c);
  CHECK(ones == 200);
  CHECK(d.targets == d.classes);
  CHECK(d.informative.size() == 16);
  CHECK(std::set<std::size_t>(d.informative.begin(), d.informative.end()).size() == 16);
  CHECK(d.embeddings.vectors.rows() == 400);
  CHECK(d.embeddings.vectors.cols() == 64);
  CHECK(d.corpus.messages.size() == 400);
  CHECK(d.annotations.size() == 1200);

  // class-mean difference is about the separation on informative dims and about 0 elsewhere
  std::set<std::size_t> inf(d.informative.begin(), d.informative.end());
  for (Eigen::Index j = 0; j < 64; ++j) {
    double m[2] = {0, 0};
    for (Eigen::Index i = 0; i < 400; ++i) m[d.classes[static_cast<std::size_t>(i)]] += d.embeddings.vectors(i, j) / 200.0;
    const double expect = inf.count(static_cast<std::size_t>(j)) ? 1.0 : 0.0;
    CHECK(std::abs((m[1] - m[0]) - expect) < 0.45);  // 4.5 standard errors
  }
}

TEST_CASE("generation is a function of the synthetic settings") {
  const auto a = generate(small(3));
  const auto b = generate(small(3));
  CHECK(a.corpus == b.corpus);
  CHECK(a.annotations == b.annotations);
  CHECK(a.embeddings == b.embeddings);
  const auto c = generate(small(4));
  CHECK_FALSE(a.embeddings == c.embeddings);

  // label noise does not disturb the embedding draws
  auto noisy = small(3);
  noisy.label_noise = 0.2;
  const auto n = generate(noisy);
  CHECK(n.embeddings == a.embeddings);
  CHECK(n.targets != a.targets);
}

TEST_CASE("annotator agreement follows the annotator noise") {
  auto s = small(5);
  const auto clean = generate(s);
  CHECK(krippendorff_alpha(clean.annotations).value == 1.0);

  s.n_samples = 2000;
  s.annotator_noise = kCalibratedAnnotatorNoise;
  const auto noisy = generate(s);
  const double alpha = krippendorff_alpha(noisy.annotations).value;
  CHECK(std::abs(alpha - oracle::alpha_pairwise(noisy.annotations)) <= 1e-9);
  // three independent flips at p: 1 - alpha is close to 2p(1-p) / 0.5 for balanced labels
  const double p = kCalibratedAnnotatorNoise;
  CHECK(alpha == doctest::Approx(1.0 - 4.0 * p * (1.0 - p)).epsilon(0.05));
}

TEST_CASE("large separation is learnable end to end") {
  SyntheticSpec s;
  s.n_samples = 600;
  s.dim = 128;
  s.n_informative = 32;
  s.class_separation = 1.5;
  s.seed = 6;
  const auto data = labeled_dataset(generate(s));
  const auto split = stratified_split(data.y, 0.66, 2);
  const auto train = data.subset(split.train);
  const auto test = data.subset(split.test);

  // Nearest centroid with the two training class means.
  Eigen::RowVectorXd mu[2] = {Eigen::RowVectorXd::Zero(128), Eigen::RowVectorXd::Zero(128)};
  double count[2] = {0, 0};
  for (std::size_t i = 0; i < train.size(); ++i) {
    mu[train.y[i]] += train.x.row(static_cast<Eigen::Index>(i));
    count[train.y[i]] += 1;
  }
  for (int c = 0; c < 2; ++c) mu[c] /= count[c];
  Labels centroid(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto row = test.x.row(static_cast<Eigen::Index>(i));
    centroid[i] = (row - mu[1]).squaredNorm() < (row - mu[0]).squaredNorm() ? 1 : 0;
  }
  CHECK(metrics(test.y, centroid).f1 >= 0.99);

  const auto model = fit(ModelSpec::make(ModelKind::SVM, {}, 1), train);
  CHECK(metrics(test.y, predict(model, test.x)).f1 >= 0.99);
}

TEST_CASE("degenerate specs are rejected") {
  auto s = small();
  s.n_informative = 65;
  CHECK_THROWS_AS(generate(s), ValidationError);
  s = small();
  s.class_separation = 0.0;
  CHECK_THROWS_AS(generate(s), ValidationError);
  s = small();
  s.label_noise = 0.5;
  CHECK_THROWS_AS(generate(s), ValidationError);
  s = small();
  s.n_samples = 1;
  CHECK_THROWS_AS(generate(s), ValidationError);
  s = small();
  s.annotators = 0;
  CHECK_THROWS_AS(generate(s), ValidationError);
}

TEST_CASE("pinned benchmark settings") {
  const auto b = benchmark_spec();
  CHECK(b.n_samples == 2000);
  CHECK(b.dim == 768);
  CHECK(b.n_informative == 100);
  CHECK(b.label_noise == 0.0);
  CHECK(b.annotator_noise == kCalibratedAnnotatorNoise);
  CHECK_NOTHROW(b.validate());
}
