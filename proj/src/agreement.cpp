#include "chatclf/agreement.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <set>
#include <unordered_map>

#include "chatclf/csv.hpp"
#include "chatclf/error.hpp"
#include "chatclf/rng.hpp"

namespace chatclf {

double CoincidenceMatrix::total() const {
  double t = 0.0;
  for (const auto& row : values) {
    for (double v : row) t += v;
  }
  return t;
}

namespace {

// Groups values by unit, keeping the order in which units first appear.
std::vector<std::vector<int>> values_by_unit(const std::vector<Annotation>& annotations) {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<int>> units;
  for (const auto& a : annotations) {
    auto [it, inserted] = index.try_emplace(a.message_id, units.size());
    if (inserted) units.emplace_back();
    units[it->second].push_back(a.label);
  }
  return units;
}

}  // namespace

AlphaResult krippendorff_alpha(const std::vector<Annotation>& annotations) {
  const auto units = values_by_unit(annotations);

  AlphaResult result;
  std::set<int> categories;
  for (const auto& u : units) {
    if (u.size() < 2) continue;
    categories.insert(u.begin(), u.end());
  }
  if (categories.empty()) {
    throw ValidationError("krippendorff_alpha: no unit has two or more values");
  }
  auto& cm = result.coincidence;
  cm.category_labels.assign(categories.begin(), categories.end());
  const std::size_t q = cm.category_labels.size();
  cm.values.assign(q, std::vector<double>(q, 0.0));
  auto slot = [&](int label) {
    return static_cast<std::size_t>(
        std::lower_bound(cm.category_labels.begin(), cm.category_labels.end(), label) -
        cm.category_labels.begin());
  };

  for (const auto& u : units) {
    const std::size_t m = u.size();
    if (m < 2) continue;
    ++result.pairable_units;
    result.pairable_values += m;
    std::vector<double> counts(q, 0.0);
    for (int v : u) counts[slot(v)] += 1.0;
    const double w = 1.0 / static_cast<double>(m - 1);
    for (std::size_t c = 0; c < q; ++c) {
      for (std::size_t k = 0; k < q; ++k) {
        const double pairs = c == k ? counts[c] * (counts[c] - 1.0) : counts[c] * counts[k];
        cm.values[c][k] += pairs * w;
      }
    }
  }

  std::vector<double> marginal(q, 0.0);
  for (std::size_t c = 0; c < q; ++c) {
    for (std::size_t k = 0; k < q; ++k) marginal[c] += cm.values[c][k];
  }
  const double n = std::accumulate(marginal.begin(), marginal.end(), 0.0);

  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t c = 0; c < q; ++c) {
    for (std::size_t k = 0; k < q; ++k) {
      if (c == k) continue;
      observed += cm.values[c][k];
      expected += marginal[c] * marginal[k];
    }
  }
  if (expected == 0.0) {
    result.value = 1.0;
    result.degenerate = true;
    return result;
  }
  result.value = 1.0 - (n - 1.0) * observed / expected;
  return result;
}

AgreementReport agreement_by_room(const Corpus& corpus,
                                  const std::vector<Annotation>& annotations) {
  std::unordered_map<std::string, std::string> room_of;
  for (const auto& m : corpus.messages) room_of[m.id] = m.room_id;

  std::map<std::string, std::vector<Annotation>> per_room;
  for (const auto& a : annotations) {
    const auto it = room_of.find(a.message_id);
    if (it != room_of.end()) per_room[it->second].push_back(a);
  }

  AgreementReport report;
  double sum = 0.0;
  for (auto& [room, anns] : per_room) {
    try {
      report.rooms.push_back({room, krippendorff_alpha(anns)});
      sum += report.rooms.back().alpha.value;
    } catch (const ValidationError&) {
      report.skipped_rooms.push_back(room);
    }
  }
  if (!report.rooms.empty()) report.mean_room_alpha = sum / static_cast<double>(report.rooms.size());
  report.overall = krippendorff_alpha(annotations);
  return report;
}

std::string to_string(FusionMode mode) { return mode == FusionMode::CAg ? "CAg" : "MAg"; }

FusionMode fusion_mode_from_string(const std::string& text) {
  if (text == "CAg" || text == "cag" || text == "complete") return FusionMode::CAg;
  if (text == "MAg" || text == "mag" || text == "majority") return FusionMode::MAg;
  throw ValidationError("unknown fusion mode '" + text + "' (expected CAg or MAg)");
}

std::string to_string(ExclusionReason reason) {
  switch (reason) {
    case ExclusionReason::below_quorum:
      return "below-quorum";
    case ExclusionReason::disagreement:
      return "disagreement";
    case ExclusionReason::tie:
      return "tie";
  }
  return "unknown";
}

std::size_t FusedLabels::count(int label) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [label](const LabeledId& e) { return e.label == label; }));
}

FusedLabels fuse_labels(const std::vector<Annotation>& annotations, FusionMode mode,
                        int quorum) {
  if (annotations.empty()) throw ValidationError("fuse_labels: empty annotation set");
  if (quorum < 1) throw ValidationError("fuse_labels: quorum must be >= 1");

  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> order;
  std::vector<std::array<int, 2>> votes;
  for (const auto& a : annotations) {
    if (a.label != 0 && a.label != 1) {
      throw ValidationError("fuse_labels: non-binary label for message '" + a.message_id + "'");
    }
    auto [it, inserted] = index.try_emplace(a.message_id, order.size());
    if (inserted) {
      order.push_back(a.message_id);
      votes.push_back({0, 0});
    }
    ++votes[it->second][a.label];
  }

  FusedLabels fused;
  fused.mode = mode;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int zeros = votes[i][0];
    const int ones = votes[i][1];
    const int total = zeros + ones;
    if (total < quorum) {
      fused.excluded.push_back({order[i], ExclusionReason::below_quorum});
      continue;
    }
    if (mode == FusionMode::CAg) {
      if (zeros == 0 || ones == 0) {
        fused.entries.push_back({order[i], ones > 0 ? 1 : 0});
      } else {
        fused.excluded.push_back({order[i], ExclusionReason::disagreement});
      }
    } else {
      if (2 * ones > total) {
        fused.entries.push_back({order[i], 1});
      } else if (2 * zeros > total) {
        fused.entries.push_back({order[i], 0});
      } else {
        fused.excluded.push_back({order[i], ExclusionReason::tie});
      }
    }
  }
  return fused;
}

FusedLabels balance(const FusedLabels& fused, std::uint64_t seed) {
  const std::size_t pos = fused.count(1);
  const std::size_t neg = fused.count(0);
  if (pos == 0 || neg == 0) {
    throw ValidationError("balance: input has a single class");
  }
  const int majority = pos > neg ? 1 : 0;
  const std::size_t target = std::min(pos, neg);

  std::vector<std::size_t> majority_rows;
  for (std::size_t i = 0; i < fused.entries.size(); ++i) {
    if (fused.entries[i].label == majority) majority_rows.push_back(i);
  }
  std::vector<bool> keep(fused.entries.size(), true);
  if (majority_rows.size() > target) {
    Rng rng(seed);
    rng.shuffle(majority_rows);
    for (std::size_t j = target; j < majority_rows.size(); ++j) keep[majority_rows[j]] = false;
  }

  FusedLabels out;
  out.mode = fused.mode;
  out.excluded = fused.excluded;
  for (std::size_t i = 0; i < fused.entries.size(); ++i) {
    if (keep[i]) out.entries.push_back(fused.entries[i]);
  }
  return out;
}

void write_fused_csv(const FusedLabels& fused, std::ostream& out) {
  out << "message_id,label\n";
  for (const auto& e : fused.entries) {
    out << csv::escape(e.message_id) << ',' << e.label << '\n';
  }
}

FusedLabels read_fused_csv(std::istream& in, FusionMode mode) {
  csv::Reader reader(in);
  FusedLabels fused;
  fused.mode = mode;
  const auto header = reader.next();
  if (!header || header->size() < 2 || (*header)[0] != "message_id" || (*header)[1] != "label") {
    throw ValidationError("fused label CSV must start with header message_id,label");
  }
  while (auto rec = reader.next()) {
    if (rec->size() != 2 || ((*rec)[1] != "0" && (*rec)[1] != "1")) {
      throw ValidationError("line " + std::to_string(reader.record_line()) +
                            ": malformed fused label record");
    }
    fused.entries.push_back({(*rec)[0], (*rec)[1] == "1" ? 1 : 0});
  }
  return fused;
}

}  // namespace chatclf
