#pragma once

#include <cstdint>
#include <vector>

#include "chatclf/corpus.hpp"
#include "chatclf/embeddings.hpp"

namespace chatclf {

struct SyntheticSpec {
  std::size_t n_samples = 2000;
  std::size_t dim = 768;
  std::size_t n_informative = 100;
  // Distance between the two class means along each informative dimension;
  // every dimension carries unit-variance Gaussian noise.
  double class_separation = 1.0;
  double label_noise = 0.0;  // probability the target label disagrees with the class
  int annotators = 3;
  double annotator_noise = 0.0;  // per-annotator flip probability of the target label
  double moderator_fraction = 0.0;
  std::size_t rooms = 25;
  std::size_t users = 309;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  Corpus corpus;
  std::vector<Annotation> annotations;
  EmbeddingMatrix embeddings;
  Labels classes;  // class whose mean generated each embedding
  Labels targets;  // classes after label noise; what annotators see
  std::vector<std::size_t> informative;  // sorted informative dimensions
};

SyntheticData generate(const SyntheticSpec& spec);

// The targets joined with the embeddings, in message order.
LabeledDataset labeled_dataset(const SyntheticData& data);

// Pinned benchmark configuration used by the acceptance suite: 2000 samples,
// 768 dimensions, 100 informative, separation 0.8, clean targets and
// annotators at the calibrated noise level.
SyntheticSpec benchmark_spec(std::uint64_t seed = 20230601);

// Flip probability that gives Krippendorff's alpha near 0.77 for three
// annotators on balanced labels.
inline constexpr double kCalibratedAnnotatorNoise = 0.0614;

}  // namespace chatclf
