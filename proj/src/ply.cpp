#include "vascuscan/ply.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "vascuscan/error.hpp"

namespace vascuscan {

namespace {

constexpr std::string_view kProvenance = "comment vascuscan v1";

void put_float(std::string& out, double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, static_cast<float>(value));
  out.append(buf, res.ptr);
}

void write_header(std::ostream& os, std::size_t vertex_count, bool labels, bool heat,
                  std::optional<std::size_t> face_count) {
  os << "ply\nformat ascii 1.0\n" << kProvenance << "\n";
  os << "element vertex " << vertex_count << "\n";
  os << "property float x\nproperty float y\nproperty float z\n";
  if (labels) os << "property uchar label\n";
  if (heat) os << "property float heat\n";
  if (face_count) {
    os << "element face " << *face_count << "\n";
    os << "property list uchar int vertex_indices\n";
  }
  os << "end_header\n";
}

[[noreturn]] void malformed(const std::string& what, std::size_t line) {
  throw ValidationError("malformed_ply", "malformed PLY: " + what,
                        {{"line", std::to_string(line)}});
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line) {
  T value{};
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
    malformed("bad number '" + std::string(tok) + "'", line);
  }
  return value;
}

struct ElementSpec {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> scalar_props;  // in order; list props recorded as ""
  bool has_list = false;
  std::size_t list_position = 0;
  std::string list_name;
};

}  // namespace

void write_ply(std::ostream& os, const TriangleMesh& m) {
  m.validate();
  write_header(os, m.vertices.size(), m.labels.has_value(), m.heat.has_value(),
               m.faces.size());
  std::string line;
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    line.clear();
    const Vec3& p = m.vertices[i];
    put_float(line, p.x);
    line += ' ';
    put_float(line, p.y);
    line += ' ';
    put_float(line, p.z);
    if (m.labels) {
      line += ' ';
      line += std::to_string(static_cast<unsigned>((*m.labels)[i]));
    }
    if (m.heat) {
      line += ' ';
      put_float(line, (*m.heat)[i]);
    }
    line += '\n';
    os << line;
  }
  for (const auto& f : m.faces) {
    os << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  }
}

void save_ply(const TriangleMesh& m, const std::filesystem::path& path) {
  std::ostringstream buffer;
  write_ply(buffer, m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ComputationError("io", "cannot open for writing", {{"path", path.string()}});
  out << buffer.str();
  if (!out) throw ComputationError("io", "write failed", {{"path", path.string()}});
}

void save_point_ply(const std::vector<Vec3>& points, const std::vector<std::uint8_t>* labels,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ComputationError("io", "cannot open for writing", {{"path", path.string()}});
  write_header(out, points.size(), labels != nullptr, false, std::nullopt);
  std::string line;
  for (std::size_t i = 0; i < points.size(); ++i) {
    line.clear();
    put_float(line, points[i].x);
    line += ' ';
    put_float(line, points[i].y);
    line += ' ';
    put_float(line, points[i].z);
    if (labels) {
      line += ' ';
      line += std::to_string(static_cast<unsigned>((*labels)[i]));
    }
    line += '\n';
    out << line;
  }
}

TriangleMesh read_ply(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(is, line)) return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") malformed("missing 'ply' magic", lineno);

  std::vector<ElementSpec> elements;
  bool format_seen = false;
  while (true) {
    if (!next_line()) malformed("header not terminated", lineno);
    const auto tok = split(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3 || tok[1] != "ascii") {
        malformed("only 'format ascii 1.0' is supported", lineno);
      }
      format_seen = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) malformed("bad element line", lineno);
      ElementSpec e;
      e.name = std::string(tok[1]);
      e.count = parse_number<std::size_t>(tok[2], lineno);
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty()) malformed("property before element", lineno);
      auto& e = elements.back();
      if (tok.size() == 5 && tok[1] == "list") {
        if (e.has_list) malformed("multiple list properties", lineno);
        e.has_list = true;
        e.list_position = e.scalar_props.size();
        e.list_name = std::string(tok[4]);
        e.scalar_props.emplace_back();
      } else if (tok.size() == 3) {
        e.scalar_props.emplace_back(tok[2]);
      } else {
        malformed("bad property line", lineno);
      }
    } else {
      malformed("unknown header keyword '" + std::string(tok[0]) + "'", lineno);
    }
  }
  if (!format_seen) malformed("missing format line", lineno);

  TriangleMesh m;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      if (e.has_list) malformed("list property on vertex element", lineno);
      int ix = -1, iy = -1, iz = -1, ilabel = -1, iheat = -1;
      for (std::size_t p = 0; p < e.scalar_props.size(); ++p) {
        const auto& name = e.scalar_props[p];
        const int pi = static_cast<int>(p);
        if (name == "x") ix = pi;
        else if (name == "y") iy = pi;
        else if (name == "z") iz = pi;
        else if (name == "label") ilabel = pi;
        else if (name == "heat") iheat = pi;
      }
      if (ix < 0 || iy < 0 || iz < 0) malformed("vertex element lacks x/y/z", lineno);
      m.vertices.resize(e.count);
      if (ilabel >= 0) m.labels.emplace(e.count, 0);
      if (iheat >= 0) m.heat.emplace(e.count, 0.0);
      for (std::size_t i = 0; i < e.count; ++i) {
        if (!next_line()) {
          throw ValidationError("element_count_mismatch",
                                "vertex element declares " + std::to_string(e.count) +
                                    " entries, file ends after " + std::to_string(i));
        }
        const auto tok = split(line);
        if (tok.size() != e.scalar_props.size()) malformed("wrong vertex field count", lineno);
        m.vertices[i] = {parse_number<float>(tok[ix], lineno), parse_number<float>(tok[iy], lineno),
                         parse_number<float>(tok[iz], lineno)};
        if (ilabel >= 0) {
          const unsigned v = parse_number<unsigned>(tok[ilabel], lineno);
          if (v > 255) malformed("label out of uchar range", lineno);
          (*m.labels)[i] = static_cast<std::uint8_t>(v);
        }
        if (iheat >= 0) (*m.heat)[i] = parse_number<float>(tok[iheat], lineno);
      }
    } else if (e.name == "face") {
      if (!e.has_list || (e.list_name != "vertex_indices" && e.list_name != "vertex_index")) {
        malformed("face element needs a vertex_indices list", lineno);
      }
      m.faces.resize(e.count);
      for (std::size_t i = 0; i < e.count; ++i) {
        if (!next_line()) {
          throw ValidationError("element_count_mismatch",
                                "face element declares " + std::to_string(e.count) +
                                    " entries, file ends after " + std::to_string(i));
        }
        const auto tok = split(line);
        // Scalars before the list, then the list, then trailing scalars.
        const std::size_t at = e.list_position;
        if (tok.size() <= at) malformed("short face line", lineno);
        const auto n = parse_number<unsigned>(tok[at], lineno);
        if (n != 3) malformed("only triangular faces are supported", lineno);
        if (tok.size() != e.scalar_props.size() + 3) malformed("wrong face field count", lineno);
        for (int c = 0; c < 3; ++c) {
          m.faces[i][c] = parse_number<std::uint32_t>(tok[at + 1 + c], lineno);
        }
      }
    } else {
      for (std::size_t i = 0; i < e.count; ++i) {
        if (!next_line()) {
          throw ValidationError("element_count_mismatch",
                                "element '" + e.name + "' truncated");
        }
      }
    }
  }
  while (next_line()) {
    if (!split(line).empty()) {
      throw ValidationError("element_count_mismatch", "data after the last declared element",
                            {{"line", std::to_string(lineno)}});
    }
  }
  m.validate();
  return m;
}

TriangleMesh load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("file_not_found", "cannot open PLY file", {{"path", path.string()}});
  }
  try {
    return read_ply(in);
  } catch (const ValidationError& e) {
    auto ctx = e.context();
    ctx["path"] = path.string();
    throw ValidationError(e.code(), e.what(), ctx);
  }
}

}  // namespace vascuscan
