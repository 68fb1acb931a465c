#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "hwnas/accel.hpp"
#include "hwnas/nnspace.hpp"

namespace hwnas {

/// Per-layer simulator results for every valid configuration of the space,
/// laid out so that an architecture's report on a configuration is a sum of
/// table rows. Equivalent to accel::simulate(nn::workloads_of(a, s), h).
class CostTable {
 public:
  explicit CostTable(const nn::SupernetSpec& spec, int jobs = 1);

  [[nodiscard]] const nn::SupernetSpec& spec() const { return *spec_; }
  [[nodiscard]] std::size_t layers() const { return blocks_.size(); }
  [[nodiscard]] const std::vector<accel::HwConfig>& configs() const { return accel::valid_configs(); }
  [[nodiscard]] std::size_t num_configs() const { return configs().size(); }

  /// Position of a valid config in configs(); nullopt when invalid.
  [[nodiscard]] std::optional<std::size_t> slot(const accel::HwConfig& h) const;

  [[nodiscard]] accel::PerfReport report(const nn::Architecture& a, std::size_t slot) const;
  /// Throws ValidationError for invalid configurations.
  [[nodiscard]] accel::PerfReport report(const nn::Architecture& a, const accel::HwConfig& h) const;
  [[nodiscard]] double metric(const nn::Architecture& a, std::size_t slot, accel::Metric m) const;

  struct Best {
    std::size_t slot = 0;
    accel::HwConfig config;
    double value = 0.0;
  };
  /// Exhaustive minimum over all valid configurations (first slot on ties).
  [[nodiscard]] Best grid_search(const nn::Architecture& a, accel::Metric m) const;

 private:
  void check_arch(const nn::Architecture& a) const;

  const nn::SupernetSpec* spec_;
  std::vector<int> slot_of_index_;                             // 32768 entries, -1 when invalid
  std::vector<accel::PerfReport> fixed_;                       // stem + head, per slot
  std::vector<std::vector<std::vector<accel::PerfReport>>> blocks_;  // [block][choice][slot]
};

}  // namespace hwnas
