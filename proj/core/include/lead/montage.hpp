// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lead::prep {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

double distance(const Vec3& a, const Vec3& b);
double norm(const Vec3& v);

/// Electrode name -> unit-sphere position. Lookups are case-insensitive.
class CoordinateTable {
 public:
  void add(std::string name, Vec3 position);
  std::optional<Vec3> find(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Vec3>& positions() const { return positions_; }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::vector<Vec3> positions_;
};

/// Parses the "name x y z" text format ("# lead-montage v1" header).
/// Positions are renormalized to unit length.
CoordinateTable parse_coordinate_table(std::string_view text);
CoordinateTable load_coordinate_table(const std::filesystem::path& path);
/// The table compiled in from resources/montage_1020.txt.
const CoordinateTable& standard_coordinates();

/// The 19-channel 10-20 target montage in canonical order.
class Montage {
 public:
  /// Fp1 Fp2 F7 F3 Fz F4 F8 T3 C3 Cz C4 T4 T5 P3 Pz P4 T6 O1 O2
  static const std::vector<std::string>& canonical_names();
  static const Montage& standard();
  static Montage from_table(const CoordinateTable& table);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Vec3>& positions() const { return positions_; }

  /// Index of a canonical name or its alias (T7/T8/P7/P8 for T3/T4/T5/T6).
  std::optional<std::size_t> index_of(std::string_view name) const;

  /// Canonical name for an alias, or the input unchanged.
  static std::string canonical(std::string_view name);

 private:
  std::vector<std::string> names_;
  std::vector<Vec3> positions_;
};

bool iequals(std::string_view a, std::string_view b);

}  // namespace lead::prep
