#pragma once

#include "mixrates/em.hpp"
#include "mixrates/experiments.hpp"
#include "mixrates/measure.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mixrates::io {

/// Shortest decimal string that reads back to the same double.
std::string format_double(double x);

/// Header of the records CSV.
inline constexpr const char* kRecordHeader =
    "model,k,k0,n,replicate,seed,loss_name,loss_value,em_iters,converged,wall_ms";

void write_records_csv(std::ostream& out, std::span<const ExperimentRecord> records);
/// Throws ParseError on a header or field mismatch.
std::vector<ExperimentRecord> read_records_csv(std::istream& in);

/// Numeric CSV, one observation per row. A first row that does not parse as
/// numbers is taken as a header. Throws ParseError on ragged or non-numeric rows.
DataMatrix read_data_csv(std::istream& in);
void write_data_csv(std::ostream& out, const DataMatrix& data);

/// Measure document:
///   {"weights": [...], "means": [[...], ...],
///    "covariances": [[[...]], ...],   // optional, per atom
///    "shared_covariance": [[...]]}    // optional, fixed-scale kernel
std::string measure_to_json(const MixingMeasure& g, int indent = 2);
/// Throws ParseError on malformed documents; measure validation errors propagate.
MixingMeasure measure_from_json(const std::string& text);

/// Fit output: the measure document plus iterations, converged and the final objective.
std::string fit_result_to_json(const FitResult& result);

/// Summary document for a slope fit (slope, intercept, slope_se, per-n statistics).
std::string slope_summary_json(const SlopeFit& fit);
/// Plain-text slope summary printed by the CLI; numbers match the JSON digits.
std::string slope_summary_text(const SlopeFit& fit);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace mixrates::io
