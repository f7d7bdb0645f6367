#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rpg {

// Flat binary of named little-endian double arrays plus a text
// manifest with one "name shape... @offset count" line per entry.
class Checkpoint {
public:
  struct Entry {
    std::string name;
    std::vector<size_t> shape;
    std::vector<double> data;
  };

  void add(const std::string& name, std::span<const double> data,
           std::vector<size_t> shape = {});
  const Entry* find(const std::string& name) const;
  std::span<const double> get(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }

  // Writes <base>.bin and <base>.manifest.
  void save(const std::string& base_path) const;
  static Checkpoint load(const std::string& base_path);

private:
  std::vector<Entry> entries_;
};

}  // namespace rpg
