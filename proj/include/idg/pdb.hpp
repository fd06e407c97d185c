#pragma once

// Minimal reader for the fixed-column ATOM records of wwPDB files.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "idg/core.hpp"

namespace idg {

struct Atom {
  int serial = 0;
  std::string name;
  std::string element;
  char chain = ' ';
  int residue = 0;
  Vec3 pos;
};

struct AtomSet {
  std::vector<Atom> atoms;
  std::vector<std::string> warnings;

  std::size_t size() const { return atoms.size(); }
  bool empty() const { return atoms.empty(); }
  Embedding coordinates() const {
    Embedding x(atoms.size());
    std::transform(atoms.begin(), atoms.end(), x.begin(), [](const Atom& a) { return a.pos; });
    return x;
  }
};

namespace detail {

inline std::string_view column(std::string_view line, std::size_t first, std::size_t last) {
  // 1-based inclusive PDB columns
  if (line.size() < first) return {};
  return line.substr(first - 1, std::min(last, line.size()) - first + 1);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline double parse_real(std::string_view field, std::size_t line, const char* what) {
  auto s = trim(field);
  double value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(std::string("malformed ") + what + " field '" + std::string(field) + "'", line);
  return value;
}

inline int parse_int_or(std::string_view field, int fallback) {
  auto s = trim(field);
  int value = fallback;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() ? value : fallback;
}

/// Element from columns 77-78, or guessed from the atom name: the first letter
/// after stripping leading digits and spaces.
inline std::string element_of(std::string_view line) {
  auto el = trim(column(line, 77, 78));
  std::string out;
  for (char ch : el)
    if (std::isalpha(static_cast<unsigned char>(ch))) out += static_cast<char>(std::toupper(ch));
  if (!out.empty()) {
    if (out.size() == 2) out[1] = static_cast<char>(std::tolower(out[1]));
    return out;
  }
  for (char ch : column(line, 13, 16))
    if (std::isalpha(static_cast<unsigned char>(ch))) return std::string(1, static_cast<char>(std::toupper(ch)));
  return "X";
}

}  // namespace detail

/// Reads ATOM records of the first model, restricted to the chain of the
/// first ATOM record. Alternate locations other than blank or 'A' are
/// dropped. Atoms come back sorted by serial number.
inline AtomSet parse_pdb_atoms(std::string_view text) {
  AtomSet set;
  std::optional<char> chain;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  std::size_t altlocs = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++lineno;
    if (line.starts_with("ENDMDL")) break;
    if (!line.starts_with("ATOM  ") && !(line.starts_with("ATOM") && line.size() == 4)) continue;
    if (line.size() < 54) throw ParseError("ATOM record too short for coordinates", lineno);

    char c = line[21];
    if (!chain) chain = c;
    if (c != *chain) continue;
    char alt = line[16];
    if (alt != ' ' && alt != 'A') {
      ++altlocs;
      continue;
    }

    Atom a;
    a.serial = detail::parse_int_or(detail::column(line, 7, 11), static_cast<int>(set.atoms.size()) + 1);
    a.name = std::string(detail::trim(detail::column(line, 13, 16)));
    a.chain = c;
    a.residue = detail::parse_int_or(detail::column(line, 23, 26), 0);
    a.pos.x = detail::parse_real(detail::column(line, 31, 38), lineno, "x coordinate");
    a.pos.y = detail::parse_real(detail::column(line, 39, 46), lineno, "y coordinate");
    a.pos.z = detail::parse_real(detail::column(line, 47, 54), lineno, "z coordinate");
    a.element = detail::element_of(line);
    set.atoms.push_back(std::move(a));
  }
  std::stable_sort(set.atoms.begin(), set.atoms.end(),
                   [](const Atom& a, const Atom& b) { return a.serial < b.serial; });
  if (set.atoms.empty()) set.warnings.push_back("no ATOM records found");
  if (altlocs > 0)
    set.warnings.push_back("skipped " + std::to_string(altlocs) + " alternate-location records");
  return set;
}

inline AtomSet read_pdb_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path, 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pdb_atoms(ss.str());
}

}  // namespace idg
