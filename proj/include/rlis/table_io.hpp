#pragma once

// Ingestion of paired summary-statistic tables (TSV/CSV with header).
// Row order is preserved exactly: it is the chain coordinate.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "rlis/model.hpp"

namespace rlis {

struct ReadOptions {
  char delimiter = '\0';  // '\0' -> by extension: ',' for .csv, else tab
  std::string id_col = "id";
  std::string p1_col = "p1";
  std::string p2_col = "p2";
  std::string chrom_col = "chrom";
  std::string pos_col = "pos";
  double zero_floor = 1e-15;    // p == 0 clamps here
  bool sort_by_position = false;
};

struct InputTable {
  std::string source;
  std::vector<std::string> ids;
  std::vector<double> p1, p2;
  std::vector<std::string> chrom;  // present when coordinate columns exist
  std::vector<long long> pos;
  bool has_coordinates = false;
  bool coordinate_sorted = true;

  std::size_t clamped_zeros = 0;
  std::size_t clamped_ones = 0;
  std::vector<std::size_t> skipped_lines;  // 1-based file line numbers

  PairedPValues to_pvalues() const {
    PairedPValues d;
    d.y1 = p1;
    d.y2 = p2;
    d.ids = ids;
    return d;
  }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool is_missing_token(std::string t) {
  for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return t.empty() || t == "na" || t == "nan" || t == "null" || t == ".";
}

}  // namespace detail

inline InputTable read_paired_table(const std::string& path,
                                    const ReadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open input file: " + path);

  char delim = opt.delimiter;
  if (delim == '\0')
    delim = (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") ? ','
                                                                         : '\t';

  std::string line;
  if (!std::getline(in, line))
    throw input_error(path + ": empty file, expected a header line");
  const auto header = detail::split_line(line, delim);
  const auto col_of = [&](const std::string& name) -> long {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };
  const long id_c = col_of(opt.id_col);
  const long p1_c = col_of(opt.p1_col);
  const long p2_c = col_of(opt.p2_col);
  if (p1_c < 0 || p2_c < 0 || id_c < 0) {
    std::string missing;
    if (id_c < 0) missing += " '" + opt.id_col + "'";
    if (p1_c < 0) missing += " '" + opt.p1_col + "'";
    if (p2_c < 0) missing += " '" + opt.p2_col + "'";
    throw input_error(path + ": header is missing column(s):" + missing);
  }
  const long chrom_c = col_of(opt.chrom_col);
  const long pos_c = col_of(opt.pos_col);

  InputTable t;
  t.source = path;
  t.has_coordinates = chrom_c >= 0 && pos_c >= 0;

  std::unordered_set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_line(line, delim);
    const auto need = static_cast<std::size_t>(
        std::max({id_c, p1_c, p2_c, chrom_c, pos_c}) + 1);
    if (fields.size() < need)
      throw input_error(path + ":" + std::to_string(line_no) +
                        ": expected at least " + std::to_string(need) +
                        " fields, got " + std::to_string(fields.size()));

    const std::string& s1 = fields[static_cast<std::size_t>(p1_c)];
    const std::string& s2 = fields[static_cast<std::size_t>(p2_c)];
    if (detail::is_missing_token(s1) || detail::is_missing_token(s2)) {
      t.skipped_lines.push_back(line_no);
      continue;
    }
    const auto parse_p = [&](const std::string& s, const std::string& col) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (end == s.c_str() || *end != '\0')
        throw input_error(path + ":" + std::to_string(line_no) +
                          ": non-numeric " + col + " value '" + s + "'");
      if (!(v >= 0.0 && v <= 1.0))
        throw input_error(path + ":" + std::to_string(line_no) + ": " + col +
                          " value " + s + " outside [0,1]");
      return v;
    };
    double v1 = parse_p(s1, opt.p1_col);
    double v2 = parse_p(s2, opt.p2_col);
    if (v1 == 0.0) {
      v1 = opt.zero_floor;
      ++t.clamped_zeros;
    }
    if (v2 == 0.0) {
      v2 = opt.zero_floor;
      ++t.clamped_zeros;
    }
    if (v1 == 1.0) {
      v1 = 1.0 - 1e-16;
      ++t.clamped_ones;
    }
    if (v2 == 1.0) {
      v2 = 1.0 - 1e-16;
      ++t.clamped_ones;
    }

    const std::string& id = fields[static_cast<std::size_t>(id_c)];
    if (!seen.insert(id).second)
      throw input_error(path + ":" + std::to_string(line_no) +
                        ": duplicate feature id '" + id + "'");
    t.ids.push_back(id);
    t.p1.push_back(v1);
    t.p2.push_back(v2);
    if (t.has_coordinates) {
      t.chrom.push_back(fields[static_cast<std::size_t>(chrom_c)]);
      char* end = nullptr;
      const std::string& ps = fields[static_cast<std::size_t>(pos_c)];
      const long long pv = std::strtoll(ps.c_str(), &end, 10);
      if (end == ps.c_str() || *end != '\0')
        throw input_error(path + ":" + std::to_string(line_no) +
                          ": non-integer position '" + ps + "'");
      t.pos.push_back(pv);
    }
  }

  if (t.has_coordinates && !t.ids.empty()) {
    // Sorted means each chromosome forms one contiguous block with
    // non-decreasing positions.
    std::unordered_set<std::string> closed;
    for (std::size_t j = 1; j < t.ids.size() && t.coordinate_sorted; ++j) {
      if (t.chrom[j] == t.chrom[j - 1]) {
        if (t.pos[j] < t.pos[j - 1]) t.coordinate_sorted = false;
      } else {
        closed.insert(t.chrom[j - 1]);
        if (closed.count(t.chrom[j])) t.coordinate_sorted = false;
      }
    }
    if (opt.sort_by_position) {
      std::vector<std::size_t> order(t.ids.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) {
                         if (t.chrom[a] != t.chrom[b]) return t.chrom[a] < t.chrom[b];
                         return t.pos[a] < t.pos[b];
                       });
      InputTable s = t;
      for (std::size_t j = 0; j < order.size(); ++j) {
        s.ids[j] = t.ids[order[j]];
        s.p1[j] = t.p1[order[j]];
        s.p2[j] = t.p2[order[j]];
        s.chrom[j] = t.chrom[order[j]];
        s.pos[j] = t.pos[order[j]];
      }
      s.coordinate_sorted = true;
      return s;
    }
  }
  return t;
}

}  // namespace rlis
