#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcil/tensorcore.hpp"

namespace fcil {

// G_y when z is empty, G_{y,z} otherwise. One index never mixes the two.
struct GroupKey {
  int y = 0;
  std::optional<int> z;

  auto operator<=>(const GroupKey&) const = default;
  [[nodiscard]] std::string str() const;
};

enum class GroupMode { by_class, by_class_and_z };

using GroupIndex = std::map<GroupKey, std::vector<std::size_t>>;

// Partitions sample positions by group. by_class_and_z requires every sample
// to carry a sensitive attribute.
GroupIndex group_index(std::span<const Sample> samples, GroupMode mode);

}  // namespace fcil
