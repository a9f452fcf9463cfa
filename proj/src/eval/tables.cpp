#include "mmkd/eval/tables.hpp"

#include "mmkd/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace mmkd::eval {

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05.2f", 100.0 * v);
  return buf;
}

void add_unique(std::vector<std::string>& list, const std::string& v) {
  if (std::find(list.begin(), list.end(), v) == list.end()) list.push_back(v);
}

// Display width in code points.
std::size_t width_of(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80 ? 1 : 0;
  return n;
}

}  // namespace

Table build_table(const std::vector<TableRow>& rows) {
  if (rows.empty()) throw Error(ErrorKind::kInvalidConfig, "no reports to tabulate");
  std::vector<std::string> flag_names, class_names;
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.flags) add_unique(flag_names, k);
    for (const auto& c : r.report.classes) add_unique(class_names, c);
  }
  std::size_t scored = 0;
  std::size_t best = rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].error.empty()) continue;
    ++scored;
    if (best == rows.size() || rows[i].report.weighted_f1 > rows[best].report.weighted_f1) best = i;
  }
  const bool mark = scored > 1;

  Table t;
  t.header.push_back("config");
  t.header.insert(t.header.end(), flag_names.begin(), flag_names.end());
  for (const char* h : {"Acc", "F1m", "F1w"}) t.header.emplace_back(h);
  for (const auto& c : class_names) t.header.push_back("F1:" + c);
  if (mark) t.header.emplace_back("best");

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::vector<std::string> cells = {r.name};
    for (const auto& f : flag_names) {
      const auto it = std::find_if(r.flags.begin(), r.flags.end(),
                                   [&](const auto& kv) { return kv.first == f; });
      cells.push_back(it == r.flags.end() ? "" : it->second);
    }
    const bool ok = r.error.empty();
    cells.push_back(ok ? pct(r.report.accuracy) : "");
    cells.push_back(ok ? pct(r.report.macro_f1) : "");
    cells.push_back(ok ? pct(r.report.weighted_f1) : "");
    for (const auto& c : class_names) {
      const auto it = std::find(r.report.classes.begin(), r.report.classes.end(), c);
      const auto k = static_cast<std::size_t>(it - r.report.classes.begin());
      cells.push_back(ok && it != r.report.classes.end() && k < r.report.per_class_f1.size()
                          ? pct(r.report.per_class_f1[k])
                          : "");
    }
    if (mark) cells.push_back(i == best ? "*" : (ok ? "" : "failed"));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::string render_text(const Table& table) {
  std::vector<std::size_t> widths(table.header.size(), 0);
  const auto measure = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) widths[c] = std::max(widths[c], width_of(cells[c]));
  };
  measure(table.header);
  for (const auto& r : table.rows) measure(r);
  const auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out += "  ";
      out += cells[c];
      if (c + 1 < cells.size()) out.append(widths[c] - width_of(cells[c]), ' ');
    }
    return out + '\n';
  };
  std::string out = line(table.header);
  std::size_t total = 0;
  for (auto w : widths) total += w;
  out += std::string(total + 2 * (widths.size() - 1), '-') + '\n';
  for (const auto& r : table.rows) out += line(r);
  return out;
}

std::string render_tsv(const Table& table) {
  const auto line = [](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) out += (c ? "\t" : "") + cells[c];
    return out + '\n';
  };
  std::string out = line(table.header);
  for (const auto& r : table.rows) out += line(r);
  return out;
}

void emit_tables(const std::vector<TableRow>& rows, const std::filesystem::path& stem) {
  const Table t = build_table(rows);
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  for (const auto& [ext, text] : {std::pair{".txt", render_text(t)}, std::pair{".tsv", render_tsv(t)}}) {
    auto path = stem;
    path += ext;
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
    out << text;
  }
}

}  // namespace mmkd::eval
