#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "chatclf/corpus.hpp"

namespace chatclf {

// Nominal-data coincidence matrix. values[c][k] counts ordered pairs of
// values (c, k) within a unit, each unit weighted by 1 / (m_u - 1).
struct CoincidenceMatrix {
  std::vector<int> category_labels;
  std::vector<std::vector<double>> values;

  double total() const;
};

struct AlphaResult {
  double value = 0.0;
  // Set when only one category occurs, so expected disagreement is zero and
  // the value is 1.0 by convention.
  bool degenerate = false;
  CoincidenceMatrix coincidence;
  std::size_t pairable_units = 0;
  std::size_t pairable_values = 0;
};

// Units are messages; units with fewer than two values are ignored. Throws
// ValidationError when no unit has two values.
AlphaResult krippendorff_alpha(const std::vector<Annotation>& annotations);

struct RoomAlpha {
  std::string room_id;
  AlphaResult alpha;
};

struct AgreementReport {
  std::vector<RoomAlpha> rooms;   // rooms with pairable data, by room_id
  std::vector<std::string> skipped_rooms;
  double mean_room_alpha = 0.0;   // plain average over rooms
  AlphaResult overall;            // pooled over every annotation
};

AgreementReport agreement_by_room(const Corpus& corpus,
                                  const std::vector<Annotation>& annotations);

enum class FusionMode { CAg, MAg };

std::string to_string(FusionMode mode);
FusionMode fusion_mode_from_string(const std::string& text);

struct LabeledId {
  std::string message_id;
  int label = 0;

  friend bool operator==(const LabeledId&, const LabeledId&) = default;
};

enum class ExclusionReason { below_quorum, disagreement, tie };

std::string to_string(ExclusionReason reason);

struct Exclusion {
  std::string message_id;
  ExclusionReason reason;
};

struct FusedLabels {
  FusionMode mode = FusionMode::CAg;
  std::vector<LabeledId> entries;
  std::vector<Exclusion> excluded;

  std::size_t count(int label) const;
};

// Messages come out in order of their first annotation. A message needs at
// least `quorum` annotations under either mode. CAg then requires every
// annotator to agree and MAg requires a strict majority.
FusedLabels fuse_labels(const std::vector<Annotation>& annotations, FusionMode mode,
                        int quorum = 3);

// Downsamples the majority class without replacement to the minority count.
// Kept entries preserve input order. Throws when a class is absent.
FusedLabels balance(const FusedLabels& fused, std::uint64_t seed);

void write_fused_csv(const FusedLabels& fused, std::ostream& out);
FusedLabels read_fused_csv(std::istream& in, FusionMode mode);

}  // namespace chatclf
