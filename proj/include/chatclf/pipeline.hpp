#pragma once

#include <iosfwd>

#include "chatclf/config.hpp"
#include "chatclf/corpus.hpp"
#include "chatclf/feature_select.hpp"
#include "chatclf/report.hpp"

namespace chatclf {

// Both length-statistic variants: all messages and moderators excluded.
Json stats_json(const Corpus& corpus);
Json to_json(const AlphaResult& alpha);
Json agreement_json(const AgreementReport& report);
Json fusion_json(const FusedLabels& fused);
Json selection_json(const SelectionReport& report);

// Fused labels with their exclusions, as stored in the stage cache.
std::string fused_record(const FusedLabels& fused);
FusedLabels parse_fused_record(const std::string& text);

struct PipelineRun {
  ReportBundle bundle;
  ExperimentResults results;
};

// load -> alpha -> fuse -> balance -> join -> [select] -> evaluate -> report.
// Input problems surface as ValidationError prefixed with the stage name;
// failures of later stages as StageError. Every artifact lands in
// config.output_dir. Fused/balanced labels and aggregate masks are cached
// under the cache dir keyed by the digest of their inputs.
PipelineRun run_pipeline(const PipelineConfig& config, std::ostream* log = nullptr);

}  // namespace chatclf
