#include "chatclf/synthetic.hpp"

#include <algorithm>
#include <cstdio>

#include "chatclf/error.hpp"
#include "chatclf/rng.hpp"

namespace chatclf {

void SyntheticSpec::validate() const {
  if (n_samples < 2) throw ValidationError("synth: n_samples must be >= 2");
  if (dim < 1) throw ValidationError("synth: dim must be >= 1");
  if (n_informative > dim) throw ValidationError("synth: n_informative exceeds dim");
  if (!(class_separation > 0.0)) throw ValidationError("synth: class_separation must be > 0");
  if (label_noise < 0.0 || label_noise >= 0.5) throw ValidationError("synth: label_noise must be in [0, 0.5)");
  if (annotators < 1) throw ValidationError("synth: annotators must be >= 1");
  if (annotator_noise < 0.0 || annotator_noise >= 0.5) {
    throw ValidationError("synth: annotator_noise must be in [0, 0.5)");
  }
  if (moderator_fraction < 0.0 || moderator_fraction >= 1.0) {
    throw ValidationError("synth: moderator_fraction must be in [0, 1)");
  }
  if (rooms < 1 || users < 1) throw ValidationError("synth: rooms and users must be >= 1");
}

namespace {

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

SyntheticData generate(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData out;
  const std::size_t n = spec.n_samples;

  // Independent streams per concern so changing one knob leaves the others' draws intact.
  Rng class_rng(derive_seed(spec.seed, "synth/classes"));
  Rng dim_rng(derive_seed(spec.seed, "synth/informative"));
  Rng x_rng(derive_seed(spec.seed, "synth/embeddings"));
  Rng label_rng(derive_seed(spec.seed, "synth/label-noise"));
  Rng annot_rng(derive_seed(spec.seed, "synth/annotators"));
  Rng corpus_rng(derive_seed(spec.seed, "synth/corpus"));

  out.classes.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.classes[i] = i < n / 2 ? 0 : 1;
  class_rng.shuffle(out.classes);

  auto dims = dim_rng.permutation(spec.dim);
  out.informative.assign(dims.begin(), dims.begin() + static_cast<std::ptrdiff_t>(spec.n_informative));
  std::sort(out.informative.begin(), out.informative.end());
  std::vector<double> shift(spec.dim, 0.0);
  for (std::size_t j : out.informative) shift[j] = 0.5 * spec.class_separation;

  auto& emb = out.embeddings;
  emb.model_name = "synthetic-gaussian";
  emb.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.dim));
  for (std::size_t i = 0; i < n; ++i) {
    const double sign = out.classes[i] ? 1.0 : -1.0;
    for (std::size_t j = 0; j < spec.dim; ++j) {
      emb.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<float>(x_rng.normal() + sign * shift[j]);
    }
  }

  out.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.targets[i] = label_rng.bernoulli(spec.label_noise) ? 1 - out.classes[i] : out.classes[i];
  }

  const std::int64_t base_ms = 1'609'459'200'000;  // 2021-01-01T00:00:00Z
  std::vector<std::int64_t> room_clock(spec.rooms);
  for (std::size_t r = 0; r < spec.rooms; ++r) {
    room_clock[r] = base_ms + static_cast<std::int64_t>(r) * 86'400'000;
  }
  const int id_width = n < 1'000'000 ? 6 : 9;
  std::vector<std::string> filler = {"sim", "nao", "talvez", "acho", "que", "isso", "e", "verdade"};
  for (std::size_t i = 0; i < n; ++i) {
    Message m;
    m.id = numbered("m", i, id_width);
    const std::size_t room = i % spec.rooms;
    m.room_id = numbered("room", room, 2);
    const std::size_t user = i < spec.users ? i : corpus_rng.below(spec.users);
    m.user_id = numbered("u", user, 3);
    room_clock[room] += 1000 + static_cast<std::int64_t>(corpus_rng.below(60'000));
    m.timestamp_ms = room_clock[room];
    m.is_moderator = corpus_rng.bernoulli(spec.moderator_fraction);
    if (m.is_moderator) m.user_id = "moderator";
    // 1..9 tokens, median 5; the first token carries the id.
    const std::size_t tokens = 1 + corpus_rng.below(9);
    m.text = m.id;
    for (std::size_t t = 1; t < tokens; ++t) m.text += " " + filler[corpus_rng.below(filler.size())];
    emb.ids.push_back(m.id);

    for (int a = 0; a < spec.annotators; ++a) {
      const bool flip = annot_rng.bernoulli(spec.annotator_noise);
      out.annotations.push_back({m.id, numbered("a", static_cast<std::size_t>(a), 1),
                                 flip ? 1 - out.targets[i] : out.targets[i]});
    }
    out.corpus.messages.push_back(std::move(m));
  }
  out.corpus.metadata["generator"] = "synthetic";
  out.corpus.metadata["seed"] = std::to_string(spec.seed);
  normalize(out.corpus);
  return out;
}

LabeledDataset labeled_dataset(const SyntheticData& data) {
  LabeledDataset d;
  d.x = data.embeddings.vectors.cast<double>();
  d.y = data.targets;
  d.ids = data.embeddings.ids;
  return d;
}

SyntheticSpec benchmark_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.n_samples = 2000;
  s.dim = 768;
  s.n_informative = 100;
  s.class_separation = 0.8;
  s.label_noise = 0.0;
  s.annotators = 3;
  s.annotator_noise = kCalibratedAnnotatorNoise;
  s.seed = seed;
  return s;
}

}  // namespace chatclf
