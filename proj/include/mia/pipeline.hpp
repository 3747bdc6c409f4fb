#pragma once

#include <iosfwd>
#include <string>

#include "mia/config.hpp"
#include "mia/report.hpp"

namespace mia {

struct PipelineOptions {
  std::ostream* log = nullptr;  // stage log lines; null = silent
  bool write_outputs = true;    // report.json, scores.jsonl, manifest.json under output_dir
};

/// Stages, in order: load, dedup (optional), bow_audit, sequences, score,
/// evaluate, doclevel (optional), report. After every stage manifest.json is
/// rewritten with the last completed stage; on failure it records the error
/// and the exception propagates. The output directory is held by a lockfile
/// for the duration of the run.
BenchmarkReport run_pipeline(const RunConfig& config, const PipelineOptions& options = {});

/// SHA-256 over the JSONL serialization of the documents, in order.
std::string dataset_hash(const std::vector<Document>& docs);

/// Removes fields that change between otherwise identical runs (timestamps).
nlohmann::json strip_volatile(nlohmann::json report_json);

}  // namespace mia
