// SPDX-License-Identifier: Apache-2.0
#include "lead/montage.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lead/error.hpp"

namespace lead::prep {
namespace detail {
std::string_view builtin_montage_text();
}

namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 4> kAliases{{
    {"T7", "T3"}, {"T8", "T4"}, {"P7", "T5"}, {"P8", "T6"}}};

}  // namespace

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

void CoordinateTable::add(std::string name, Vec3 position) {
  for (const auto& n : names_)
    if (iequals(n, name)) fail(ErrorKind::kConfig, "duplicate electrode '" + name + "'");
  names_.push_back(std::move(name));
  positions_.push_back(position);
}

std::optional<Vec3> CoordinateTable::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (iequals(names_[i], name)) return positions_[i];
  return std::nullopt;
}

CoordinateTable parse_coordinate_table(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  bool versioned = false;
  CoordinateTable table;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("# lead-montage", 0) == 0) {
      if (line.find("v1") == std::string::npos)
        fail(ErrorKind::kVersion, "unsupported montage table version: " + line);
      versioned = true;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string name;
    Vec3 p;
    if (!(fields >> name >> p.x >> p.y >> p.z))
      fail(ErrorKind::kFormat, "montage line " + std::to_string(lineno) + ": expected 'name x y z'");
    const double n = norm(p);
    if (!(n > 0.0) || !std::isfinite(n))
      fail(ErrorKind::kData, "montage line " + std::to_string(lineno) + ": zero or non-finite position");
    table.add(name, {p.x / n, p.y / n, p.z / n});
  }
  if (!versioned) fail(ErrorKind::kFormat, "montage table lacks '# lead-montage v1' header");
  return table;
}

CoordinateTable load_coordinate_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open montage file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_coordinate_table(buf.str());
}

const CoordinateTable& standard_coordinates() {
  static const CoordinateTable table = parse_coordinate_table(detail::builtin_montage_text());
  return table;
}

const std::vector<std::string>& Montage::canonical_names() {
  static const std::vector<std::string> names{"Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8",
                                              "T3",  "C3",  "Cz", "C4", "T4", "T5", "P3",
                                              "Pz",  "P4",  "T6", "O1", "O2"};
  return names;
}

Montage Montage::from_table(const CoordinateTable& table) {
  Montage m;
  for (const auto& name : canonical_names()) {
    auto pos = table.find(name);
    if (!pos) {
      for (const auto& [alias, target] : kAliases)
        if (target == name && (pos = table.find(alias))) break;
    }
    if (!pos) fail(ErrorKind::kConfig, "montage table has no position for " + name);
    m.names_.push_back(name);
    m.positions_.push_back(*pos);
  }
  return m;
}

const Montage& Montage::standard() {
  static const Montage m = from_table(standard_coordinates());
  return m;
}

std::string Montage::canonical(std::string_view name) {
  for (const auto& [alias, target] : kAliases)
    if (iequals(alias, name)) return std::string(target);
  return std::string(name);
}

std::optional<std::size_t> Montage::index_of(std::string_view name) const {
  const std::string canon = canonical(name);
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (iequals(names_[i], canon)) return i;
  return std::nullopt;
}

}  // namespace lead::prep
