#pragma once

// Configurable GEMM accelerator: design space, validity rules, and an
// analytical latency / energy model driven by per-layer DRAM traffic.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hwnas/error.hpp"

namespace hwnas::accel {

inline constexpr int kNumParams = 7;
inline constexpr int kOneHotSize = 36;

/// Parameter ranges (log2) in canonical order.
inline constexpr std::array<int, kNumParams> kParamMin{3, 3, 5, 5, 13, 13, 13};
inline constexpr std::array<int, kNumParams> kParamMax{6, 6, 6, 6, 20, 20, 20};
inline constexpr std::array<int, kNumParams> kParamWidth{4, 4, 2, 2, 8, 8, 8};
inline constexpr std::array<std::string_view, kNumParams> kParamNames{
    "block_in", "block_out", "uop_width", "uop_buffer", "inp_buffer", "wgt_buffer", "acc_buffer"};

/// Offset of each parameter's segment inside the 36-wide one-hot vector.
inline constexpr std::array<int, kNumParams> kOneHotOffset{0, 4, 8, 10, 12, 20, 28};

inline constexpr std::int64_t kSramBudgetBytes = std::int64_t{1} << 19;
inline constexpr double kClockHz = 1e9;
inline constexpr double kDramJoulesPerByte = 320e-12;
inline constexpr std::int64_t kDramBytesPerCycle = 16;
inline constexpr int kSpaceSize = 32768;

/// One accelerator design point. Every field is a log2 value.
struct HwConfig {
  int block_in_log2 = 4;
  int block_out_log2 = 4;
  int uop_width_log2 = 5;   // micro-op width in bits
  int uop_buf_log2 = 5;     // micro-op buffer in KiB
  int inp_buf_log2 = 15;    // bytes
  int wgt_buf_log2 = 18;
  int acc_buf_log2 = 17;

  [[nodiscard]] std::array<int, kNumParams> params() const;
  [[nodiscard]] static HwConfig from_params(std::span<const int> p);

  [[nodiscard]] int block_in() const { return 1 << block_in_log2; }
  [[nodiscard]] int block_out() const { return 1 << block_out_log2; }
  [[nodiscard]] int uop_bytes() const { return (1 << uop_width_log2) / 8; }
  [[nodiscard]] std::int64_t uop_buffer_bytes() const { return std::int64_t{1} << (uop_buf_log2 + 10); }
  [[nodiscard]] std::int64_t inp_buffer_bytes() const { return std::int64_t{1} << inp_buf_log2; }
  [[nodiscard]] std::int64_t wgt_buffer_bytes() const { return std::int64_t{1} << wgt_buf_log2; }
  [[nodiscard]] std::int64_t acc_buffer_bytes() const { return std::int64_t{1} << acc_buf_log2; }

  /// Throws RangeError if any field is outside its range.
  void check_range() const;

  /// Lexicographic rank in [0, 32768).
  [[nodiscard]] int index() const;
  [[nodiscard]] static HwConfig from_index(int index);

  /// Concatenated one-hot of the seven parameters (length 36, seven ones).
  [[nodiscard]] std::vector<double> one_hot() const;
  /// Row-wise argmax over the seven segments of a (possibly soft) encoding.
  [[nodiscard]] static HwConfig from_scores(std::span<const double> scores);

  [[nodiscard]] std::string to_string() const;  // "[4,4,5,5,15,18,17]"
  static HwConfig parse(std::string_view text);  // same form, or "default"

  friend bool operator==(const HwConfig&, const HwConfig&) = default;
  friend auto operator<=>(const HwConfig&, const HwConfig&) = default;
};

/// Default template configuration: 16x16 GEMM core, 32/256/128 KiB buffers.
inline constexpr HwConfig kDefaultConfig{};

enum class Validity { kValid, kIsaWidth, kSramBudget };

struct ValidityResult {
  bool valid = false;
  Validity reason = Validity::kValid;
};

[[nodiscard]] std::string_view to_string(Validity v);

/// Micro-op address fields must fit the micro-op width and the on-chip
/// memories must fit the SRAM budget. ISA failures are reported first.
[[nodiscard]] ValidityResult is_valid(const HwConfig& config);
[[nodiscard]] int address_bits(const HwConfig& config);
[[nodiscard]] std::int64_t sram_bytes(const HwConfig& config);

/// Optional per-parameter restriction of the space; unset rows span the full range.
struct HwSpace {
  std::array<int, kNumParams> lo = kParamMin;
  std::array<int, kNumParams> hi = kParamMax;

  [[nodiscard]] std::int64_t cardinality() const;
  [[nodiscard]] std::vector<HwConfig> enumerate() const;
  HwSpace& fix(int param, int value);
};

[[nodiscard]] std::vector<HwConfig> enumerate_space();
[[nodiscard]] double valid_fraction(const HwSpace& space = {});
/// All valid configurations of the full space, in lexicographic order.
[[nodiscard]] const std::vector<HwConfig>& valid_configs();

// ---------------------------------------------------------------------------
// Workloads and the cost model.

struct LayerWorkload {
  int in_h = 1;
  int in_w = 1;
  int c_in = 1;
  int c_out = 1;
  int k_h = 1;
  int k_w = 1;
  int stride = 1;
  bool depthwise = false;

  [[nodiscard]] int out_h() const { return (in_h + stride - 1) / stride; }
  [[nodiscard]] int out_w() const { return (in_w + stride - 1) / stride; }
  [[nodiscard]] std::int64_t macs() const;
  void check() const;

  friend bool operator==(const LayerWorkload&, const LayerWorkload&) = default;
  friend auto operator<=>(const LayerWorkload&, const LayerWorkload&) = default;
};

enum class LoopOrder { kWeightStationary, kInputStationary };

/// Tile extents: output-channel blocks, input-channel blocks, output rows and
/// columns. All powers of two; extents past the layer edge are clipped.
struct TilingChoice {
  int out_blocks = 1;
  int in_blocks = 1;
  int rows = 1;
  int cols = 1;
  LoopOrder order = LoopOrder::kWeightStationary;

  friend bool operator==(const TilingChoice&, const TilingChoice&) = default;
};

struct DramTraffic {
  std::int64_t inp = 0;
  std::int64_t wgt = 0;
  std::int64_t out = 0;
  std::int64_t uop = 0;
  [[nodiscard]] std::int64_t total() const { return inp + wgt + out + uop; }
};

struct PerfReport {
  std::int64_t compute_cycles = 0;
  std::int64_t bytes_inp = 0;
  std::int64_t bytes_wgt = 0;
  std::int64_t bytes_acc = 0;
  std::int64_t bytes_uop = 0;
  std::int64_t total_cycles = 0;
  double latency_s = 0.0;
  double energy_j = 0.0;
  double edp_js = 0.0;

  [[nodiscard]] std::int64_t dram_bytes() const { return bytes_inp + bytes_wgt + bytes_acc + bytes_uop; }
  /// Recomputes latency, energy and EDP from cycles and bytes.
  void derive();
  PerfReport& operator+=(const PerfReport& other);

  friend bool operator==(const PerfReport&, const PerfReport&) = default;
};

[[nodiscard]] std::string perf_csv_header();
[[nodiscard]] std::string to_csv_row(const PerfReport& report);

/// Bytes held on chip by one full-size tile.
struct TileFootprint {
  std::int64_t inp = 0;
  std::int64_t wgt = 0;
  std::int64_t acc = 0;
};

[[nodiscard]] TileFootprint tile_footprint(const LayerWorkload& w, const HwConfig& h, const TilingChoice& t);
[[nodiscard]] bool fits(const LayerWorkload& w, const HwConfig& h, const TilingChoice& t);
[[nodiscard]] std::int64_t tile_count(const LayerWorkload& w, const HwConfig& h, const TilingChoice& t);

/// Closed-form DRAM traffic of a feasible tiling.
[[nodiscard]] DramTraffic dram_traffic(const LayerWorkload& w, const HwConfig& h, const TilingChoice& t);

/// Candidate tilings: every power-of-two extent up to the layer size, both
/// loop orders. Depthwise layers only use in_blocks = 1.
[[nodiscard]] std::vector<TilingChoice> candidate_tilings(const LayerWorkload& w, const HwConfig& h);

/// Minimum total DRAM bytes; ties broken by fewer tiles, then smaller
/// (out_blocks, in_blocks, rows, cols), then weight-stationary first.
[[nodiscard]] TilingChoice optimal_tiling(const LayerWorkload& w, const HwConfig& h);

/// Cycle-level report of one layer under a given tiling.
[[nodiscard]] PerfReport simulate_layer(const LayerWorkload& w, const HwConfig& h, const TilingChoice& t);
[[nodiscard]] PerfReport simulate_layer(const LayerWorkload& w, const HwConfig& h);
[[nodiscard]] PerfReport simulate(std::span<const LayerWorkload> workloads, const HwConfig& h);

enum class Metric { kCycles, kEdp };
[[nodiscard]] std::string_view to_string(Metric m);
[[nodiscard]] Metric parse_metric(std::string_view text);
[[nodiscard]] double metric_value(const PerfReport& report, Metric m);

}  // namespace hwnas::accel
