#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "transfuse/cohort.hpp"

namespace transfuse {

// ISO-8601 UTC timestamps, "YYYY-MM-DDTHH:MM:SSZ" (trailing Z optional on input).
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view s);

// Splits one CSV record; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

void write_encounters(std::ostream& out, const std::vector<EncounterStatic>& encounters);
void write_observations(std::ostream& out, const RawTables& tables);
void write_transfusions(std::ostream& out, const RawTables& tables);
void write_tables(const std::filesystem::path& dir, const RawTables& tables);

// Validates the three CSV files against each other. Errors name the file and
// line: malformed rows, unknown variables (SchemaError), unknown encounters or
// observations before admission (ReferentialError).
RawTables ingest_tables(const std::filesystem::path& static_path, const std::filesystem::path& obs_path,
                        const std::filesystem::path& txn_path);

void write_exclusions(std::ostream& out, const RawTables& tables, const ExclusionResult& exclusions);

void write_instances(std::ostream& out, const std::vector<CohortInstance>& instances);
std::vector<CohortInstance> read_instances(const std::filesystem::path& path);

void write_cohort_summary(std::ostream& out, const CohortSummary& summary);

}  // namespace transfuse
