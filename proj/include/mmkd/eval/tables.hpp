#pragma once

#include "mmkd/eval/metrics.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mmkd::eval {

struct TableRow {
  std::string name;
  // Variant descriptors rendered as leading columns (e.g. text=yes).
  std::vector<std::pair<std::string, std::string>> flags;
  MetricsReport report;
  // Set when the variant failed; metric cells are left blank.
  std::string error;
};

// Columns: name, flag columns (union, first-seen order), Acc, F1m, F1w,
// one F1 column per class (union, blank where a report lacks the class),
// then a best marker on the highest weighted F1 when there is more than
// one scored row. Scores are percentages with two decimals.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table build_table(const std::vector<TableRow>& rows);
std::string render_text(const Table& table);
std::string render_tsv(const Table& table);

// Writes <stem>.txt and <stem>.tsv. InvalidConfig for an empty row set.
void emit_tables(const std::vector<TableRow>& rows, const std::filesystem::path& stem);

}  // namespace mmkd::eval
