#pragma once

// Aggregates ablate run directories into plot-ready tab-separated tables
// with a leading `run` column.

#include <filesystem>
#include <string>
#include <vector>

namespace tdex {

struct ReportCounts {
    std::size_t runs = 0;
    std::size_t results = 0;
    std::size_t episodes = 0;
    std::size_t traces = 0;
    std::size_t losses = 0;
};

/// Tables read from and written by the report, in order.
const std::vector<std::string>& report_tables();

/// Writes summary.tsv, episodes.tsv, traces.tsv and losses.tsv into `out`.
/// Throws DataError if a run directory is missing a table or a header differs.
ReportCounts write_report(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out);

}  // namespace tdex
