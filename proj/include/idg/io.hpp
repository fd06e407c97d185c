#pragma once

// Text formats.
//
// Instance file, version 1:
//   # meta source <text>          optional provenance lines
//   # meta seed <integer>
//   # meta param <key> <text>
//   dgp 1 <n> <m> <has_ref:0|1>
//   <v> <w> <lower> <upper> [<confidence> [<weight>]]     m lines
//   <x> <y> <z>                                           n lines if has_ref
// Other '#' comments and blank lines are ignored.
//
// XYZ: "<n>\n<comment>\n" then "<element> <x> <y> <z>" per atom.

#include <charconv>
#include <span>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "idg/core.hpp"

namespace idg {

/// Shortest decimal representation that reads back to the same double.
inline std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
T parse_number(std::string_view tok, std::size_t line, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(std::string("invalid ") + what + " '" + std::string(tok) + "'", line);
  return value;
}

inline std::string rest_after(std::string_view line, std::size_t skip_tokens) {
  std::size_t i = 0;
  for (std::size_t t = 0; t < skip_tokens; ++t) {
    while (i < line.size() && line[i] == ' ') ++i;
    while (i < line.size() && line[i] != ' ') ++i;
  }
  while (i < line.size() && line[i] == ' ') ++i;
  auto out = line.substr(i);
  while (!out.empty() && (out.back() == '\r' || out.back() == ' ')) out.remove_suffix(1);
  return std::string(out);
}

}  // namespace detail

inline void write_instance(std::ostream& out, const Instance& inst) {
  if (!inst.meta.source.empty()) out << "# meta source " << inst.meta.source << '\n';
  out << "# meta seed " << inst.meta.seed << '\n';
  for (const auto& [k, v] : inst.meta.params) out << "# meta param " << k << ' ' << v << '\n';
  out << "dgp 1 " << inst.vertex_count() << ' ' << inst.edge_count() << ' '
      << (inst.reference ? 1 : 0) << '\n';
  for (std::size_t e = 0; e < inst.edge_count(); ++e) {
    const auto& ed = inst.graph.edge(e);
    const auto& c = inst.constraints[e];
    out << ed.v << ' ' << ed.w << ' ' << format_real(c.lower) << ' ' << format_real(c.upper) << ' '
        << format_real(c.confidence) << ' ' << format_real(c.weight) << '\n';
  }
  if (inst.reference)
    for (const auto& p : *inst.reference)
      out << format_real(p.x) << ' ' << format_real(p.y) << ' ' << format_real(p.z) << '\n';
}

inline Instance read_instance(std::istream& in) {
  std::string raw;
  std::size_t lineno = 0;
  InstanceMeta meta;
  bool have_header = false;
  std::size_t n = 0, m = 0;
  bool has_ref = false;
  std::vector<ConstrainedEdge> items;
  Embedding ref;
  std::size_t last_line = 0;

  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (line.starts_with("# meta ")) {
      auto toks = detail::split_ws(line);
      if (toks.size() >= 3 && toks[2] == "source") {
        meta.source = detail::rest_after(line, 3);
      } else if (toks.size() >= 4 && toks[2] == "seed") {
        meta.seed = detail::parse_number<std::uint64_t>(toks[3], lineno, "seed");
      } else if (toks.size() >= 4 && toks[2] == "param") {
        meta.params[std::string(toks[3])] = detail::rest_after(line, 4);
      }
      continue;
    }
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    last_line = lineno;

    if (!have_header) {
      if (toks.size() != 5 || toks[0] != "dgp")
        throw ParseError("expected header 'dgp <version> <n> <m> <has_ref>'", lineno);
      auto version = detail::parse_number<int>(toks[1], lineno, "version");
      if (version != 1)
        throw ParseError("unsupported instance format version " + std::to_string(version), lineno);
      n = detail::parse_number<std::size_t>(toks[2], lineno, "vertex count");
      m = detail::parse_number<std::size_t>(toks[3], lineno, "edge count");
      auto r = detail::parse_number<int>(toks[4], lineno, "reference flag");
      if (r != 0 && r != 1) throw ParseError("reference flag must be 0 or 1", lineno);
      has_ref = r == 1;
      have_header = true;
      continue;
    }
    if (items.size() < m) {
      if (toks.size() < 4 || toks.size() > 6)
        throw ParseError("edge line needs 4 to 6 fields, got " + std::to_string(toks.size()), lineno);
      ConstrainedEdge it{};
      it.v = detail::parse_number<Index>(toks[0], lineno, "vertex id");
      it.w = detail::parse_number<Index>(toks[1], lineno, "vertex id");
      if (it.v >= n || it.w >= n) throw ParseError("vertex id out of range", lineno);
      if (it.v == it.w) throw ParseError("self-loop", lineno);
      it.c.lower = detail::parse_number<double>(toks[2], lineno, "lower bound");
      it.c.upper = detail::parse_number<double>(toks[3], lineno, "upper bound");
      it.c.confidence = toks.size() > 4 ? detail::parse_number<double>(toks[4], lineno, "confidence") : 1.0;
      it.c.weight = toks.size() > 5 ? detail::parse_number<double>(toks[5], lineno, "weight") : 1.0;
      items.push_back(it);
      continue;
    }
    if (has_ref && ref.size() < n) {
      if (toks.size() != 3) throw ParseError("coordinate line needs 3 fields", lineno);
      ref.push_back({detail::parse_number<double>(toks[0], lineno, "coordinate"),
                     detail::parse_number<double>(toks[1], lineno, "coordinate"),
                     detail::parse_number<double>(toks[2], lineno, "coordinate")});
      continue;
    }
    throw ParseError("unexpected trailing data", lineno);
  }
  if (!have_header) throw ParseError("missing 'dgp' header", lineno);
  if (items.size() < m)
    throw ParseError("truncated file: expected " + std::to_string(m) + " edge lines, found " +
                         std::to_string(items.size()) + " (last data at line " +
                         std::to_string(last_line) + ")",
                     last_line);
  if (has_ref && ref.size() < n)
    throw ParseError("truncated file: expected " + std::to_string(n) + " coordinate lines, found " +
                         std::to_string(ref.size()) + " (last data at line " +
                         std::to_string(last_line) + ")",
                     last_line);
  std::optional<Embedding> reference;
  if (has_ref) reference = std::move(ref);
  try {
    return make_instance(n, std::move(items), std::move(reference), std::move(meta));
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), 0);
  }
}

inline void write_instance_file(const std::string& path, const Instance& inst) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_instance(out, inst);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Instance read_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path, 0);
  return read_instance(in);
}

inline void write_xyz(std::ostream& out, std::span<const Vec3> x, const std::string& comment = "",
                      std::span<const std::string> elements = {}) {
  out << x.size() << '\n' << comment << '\n';
  for (std::size_t i = 0; i < x.size(); ++i)
    out << (i < elements.size() ? elements[i] : std::string("X")) << ' ' << format_real(x[i].x) << ' '
        << format_real(x[i].y) << ' ' << format_real(x[i].z) << '\n';
}

inline Embedding read_xyz(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty XYZ input", 1);
  ++lineno;
  auto toks = detail::split_ws(line);
  if (toks.size() != 1) throw ParseError("expected atom count", lineno);
  auto n = detail::parse_number<std::size_t>(toks[0], lineno, "atom count");
  if (!std::getline(in, line)) throw ParseError("missing comment line", lineno + 1);
  ++lineno;
  Embedding x;
  while (x.size() < n && std::getline(in, line)) {
    ++lineno;
    toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() < 4) throw ParseError("atom line needs element and 3 coordinates", lineno);
    x.push_back({detail::parse_number<double>(toks[1], lineno, "coordinate"),
                 detail::parse_number<double>(toks[2], lineno, "coordinate"),
                 detail::parse_number<double>(toks[3], lineno, "coordinate")});
  }
  if (x.size() < n)
    throw ParseError("truncated XYZ: expected " + std::to_string(n) + " atoms", lineno);
  return x;
}

inline void write_xyz_file(const std::string& path, std::span<const Vec3> x,
                           const std::string& comment = "", std::span<const std::string> elements = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_xyz(out, x, comment, elements);
}

inline Embedding read_xyz_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path, 0);
  return read_xyz(in);
}

}  // namespace idg
