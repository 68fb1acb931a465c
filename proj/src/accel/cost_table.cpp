#include "hwnas/cost_table.hpp"

#include <algorithm>
#include <map>
#include <thread>

namespace hwnas {
namespace {

using accel::LayerWorkload;
using accel::PerfReport;

std::vector<PerfReport> layer_row(const LayerWorkload& w, int jobs) {
  const auto& configs = accel::valid_configs();
  std::vector<PerfReport> row(configs.size());
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < configs.size(); i += step) {
      row[i] = accel::simulate_layer(w, configs[i]);
    }
  };
  if (jobs <= 1) {
    work(0, 1);
    return row;
  }
  std::vector<std::jthread> threads;
  for (int t = 0; t < jobs; ++t) {
    threads.emplace_back(work, static_cast<std::size_t>(t), static_cast<std::size_t>(jobs));
  }
  return row;
}

}  // namespace

CostTable::CostTable(const nn::SupernetSpec& spec, int jobs) : spec_(&spec), slot_of_index_(accel::kSpaceSize, -1) {
  const auto& configs = accel::valid_configs();
  for (std::size_t s = 0; s < configs.size(); ++s) {
    slot_of_index_[static_cast<std::size_t>(configs[s].index())] = static_cast<int>(s);
  }

  std::map<LayerWorkload, std::vector<PerfReport>> cache;
  auto row_of = [&](const LayerWorkload& w) -> const std::vector<PerfReport>& {
    auto it = cache.find(w);
    if (it == cache.end()) {
      it = cache.emplace(w, layer_row(w, jobs)).first;
    }
    return it->second;
  };
  auto accumulate = [&](const std::vector<LayerWorkload>& layers) {
    std::vector<PerfReport> sum(configs.size());
    for (const auto& w : layers) {
      const auto& row = row_of(w);
      for (std::size_t s = 0; s < sum.size(); ++s) {
        sum[s] += row[s];
      }
    }
    return sum;
  };

  auto fixed_layers = nn::stem_workloads(spec);
  const auto head = nn::head_workloads(spec);
  fixed_layers.insert(fixed_layers.end(), head.begin(), head.end());
  fixed_ = accumulate(fixed_layers);

  const auto n_blocks = static_cast<std::size_t>(spec.num_choice_blocks());
  blocks_.resize(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    for (auto c : nn::kAllChoices) {
      blocks_[b].push_back(accumulate(nn::block_workloads(spec, b, c)));
    }
  }
}

std::optional<std::size_t> CostTable::slot(const accel::HwConfig& h) const {
  const int s = slot_of_index_[static_cast<std::size_t>(h.index())];
  if (s < 0) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(s);
}

void CostTable::check_arch(const nn::Architecture& a) const {
  if (a.size() != blocks_.size()) {
    throw ValidationError("architecture has " + std::to_string(a.size()) + " blocks, table expects " +
                          std::to_string(blocks_.size()));
  }
}

PerfReport CostTable::report(const nn::Architecture& a, std::size_t slot) const {
  check_arch(a);
  PerfReport r = fixed_.at(slot);
  for (std::size_t b = 0; b < a.size(); ++b) {
    r += blocks_[b][static_cast<std::size_t>(a.choices[b])][slot];
  }
  return r;
}

PerfReport CostTable::report(const nn::Architecture& a, const accel::HwConfig& h) const {
  const auto s = slot(h);
  if (!s) {
    throw ValidationError("no cost for invalid config " + h.to_string());
  }
  return report(a, *s);
}

double CostTable::metric(const nn::Architecture& a, std::size_t slot, accel::Metric m) const {
  return accel::metric_value(report(a, slot), m);
}

CostTable::Best CostTable::grid_search(const nn::Architecture& a, accel::Metric m) const {
  check_arch(a);
  Best best;
  bool found = false;
  for (std::size_t s = 0; s < num_configs(); ++s) {
    std::int64_t cycles = fixed_[s].total_cycles;
    std::int64_t bytes = fixed_[s].dram_bytes();
    for (std::size_t b = 0; b < a.size(); ++b) {
      const auto& r = blocks_[b][static_cast<std::size_t>(a.choices[b])][s];
      cycles += r.total_cycles;
      bytes += r.dram_bytes();
    }
    PerfReport tmp;
    tmp.total_cycles = cycles;
    tmp.bytes_inp = bytes;
    tmp.derive();
    const double v = accel::metric_value(tmp, m);
    if (!found || v < best.value) {
      found = true;
      best.slot = s;
      best.value = v;
    }
  }
  best.config = configs()[best.slot];
  return best;
}

}  // namespace hwnas
