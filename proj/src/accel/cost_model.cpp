#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <tuple>

#include "hwnas/accel.hpp"

namespace hwnas::accel {
namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

int next_pow2(int n) {
  int p = 1;
  while (p < n) {
    p <<= 1;
  }
  return p;
}

// One run of equal-sized tiles along a loop dimension.
struct Segment {
  int size = 0;
  std::int64_t count = 0;
  bool first = false;
  bool last = false;
};

// At most three runs: first tile, interior tiles, remainder tile.
struct Segments {
  std::array<Segment, 3> runs{};
  int n = 0;
  std::int64_t tiles = 0;

  Segments(int extent, int tile) {
    const int t = std::min(tile, extent);
    tiles = ceil_div(extent, t);
    if (tiles == 1) {
      runs[n++] = {extent, 1, true, true};
      return;
    }
    const int rem = extent - static_cast<int>(tiles - 1) * t;
    runs[n++] = {t, 1, true, false};
    if (tiles > 2) {
      runs[n++] = {t, tiles - 2, false, false};
    }
    runs[n++] = {rem, 1, false, true};
  }

  [[nodiscard]] auto begin() const { return runs.begin(); }
  [[nodiscard]] auto end() const { return runs.begin() + n; }
};

int in_extent(int out_extent, int stride, int kernel, int in_size) {
  return std::min((out_extent - 1) * stride + kernel, in_size);
}

// Sum of input rows (or columns) fetched over all spatial tiles, halos included.
std::int64_t halo_sum(const Segments& segs, int stride, int kernel, int in_size) {
  std::int64_t s = 0;
  for (const auto& seg : segs) {
    s += seg.count * in_extent(seg.size, stride, kernel, in_size);
  }
  return s;
}

struct Geometry {
  int out_h, out_w;
  int co_blocks, ci_blocks;
  std::int64_t co_pad, ci_pad;
  int k_area;
};

Geometry geometry(const LayerWorkload& w, const HwConfig& h) {
  Geometry g{};
  g.out_h = w.out_h();
  g.out_w = w.out_w();
  g.co_blocks = static_cast<int>(ceil_div(w.c_out, h.block_out()));
  g.ci_blocks = w.depthwise ? 1 : static_cast<int>(ceil_div(w.c_in, h.block_in()));
  g.co_pad = std::int64_t{g.co_blocks} * h.block_out();
  g.ci_pad = w.depthwise ? g.co_pad : std::int64_t{g.ci_blocks} * h.block_in();
  g.k_area = w.k_h * w.k_w;
  return g;
}

// One micro-op per (output block, input block, kernel tap); the spatial
// loops run from the GEMM instruction's loop registers.
std::int64_t uop_tile_bytes(int out_blocks, int in_blocks, const LayerWorkload& w, const HwConfig& h) {
  const std::int64_t ib = w.depthwise ? 1 : in_blocks;
  return std::int64_t{out_blocks} * ib * w.k_h * w.k_w * h.uop_bytes();
}

}  // namespace

std::int64_t LayerWorkload::macs() const {
  const std::int64_t per_pixel =
      depthwise ? std::int64_t{c_out} * k_h * k_w : std::int64_t{c_out} * c_in * k_h * k_w;
  return std::int64_t{out_h()} * out_w() * per_pixel;
}

void LayerWorkload::check() const {
  if (in_h < 1 || in_w < 1 || c_in < 1 || c_out < 1 || k_h < 1 || k_w < 1 || stride < 1) {
    throw ValidationError("layer dimensions must be >= 1");
  }
  if (depthwise && c_in != c_out) {
    throw ValidationError("depthwise layer requires c_in == c_out");
  }
}

TileFootprint tile_footprint(const LayerWorkload& w, const HwConfig& h, const TilingChoice& t) {
  const auto g = geometry(w, h);
  const int rows = std::min(t.rows, g.out_h);
  const int cols = std::min(t.cols, g.out_w);
  const std::int64_t to = std::min(t.out_blocks, g.co_blocks);
  const std::int64_t ti = std::min(t.in_blocks, g.ci_blocks);
  const std::int64_t in_rows = in_extent(rows, w.stride, w.k_h, w.in_h);
  const std::int64_t in_cols = in_extent(cols, w.stride, w.k_w, w.in_w);
  TileFootprint f;
  if (w.depthwise) {
    f.inp = in_rows * in_cols * to * h.block_out();
    f.wgt = to * h.block_out() * g.k_area;
  } else {
    f.inp = in_rows * in_cols * ti * h.block_in();
    f.wgt = to * h.block_out() * ti * h.block_in() * g.k_area;
  }
  f.acc = std::int64_t{rows} * cols * to * h.block_out() * 4;
  return f;
}

bool fits(const LayerWorkload& w, const HwConfig& h, const TilingChoice& t) {
  const auto f = tile_footprint(w, h, t);
  return f.inp <= h.inp_buffer_bytes() && f.wgt <= h.wgt_buffer_bytes() && f.acc <= h.acc_buffer_bytes();
}

std::int64_t tile_count(const LayerWorkload& w, const HwConfig& h, const TilingChoice& t) {
  const auto g = geometry(w, h);
  return ceil_div(g.out_h, std::min(t.rows, g.out_h)) * ceil_div(g.out_w, std::min(t.cols, g.out_w)) *
         ceil_div(g.co_blocks, std::min(t.out_blocks, g.co_blocks)) *
         ceil_div(g.ci_blocks, std::min(t.in_blocks, g.ci_blocks));
}

DramTraffic dram_traffic(const LayerWorkload& w, const HwConfig& h, const TilingChoice& t) {
  const auto g = geometry(w, h);
  const Segments rows(g.out_h, t.rows);
  const Segments cols(g.out_w, t.cols);
  const std::int64_t n_o = ceil_div(g.co_blocks, std::min(t.out_blocks, g.co_blocks));
  const std::int64_t n_i = ceil_div(g.ci_blocks, std::min(t.in_blocks, g.ci_blocks));
  const std::int64_t n_spatial = rows.tiles * cols.tiles;

  const std::int64_t input_once =
      halo_sum(rows, w.stride, w.k_h, w.in_h) * halo_sum(cols, w.stride, w.k_w, w.in_w) * g.ci_pad;
  const std::int64_t weights_once = w.depthwise ? g.co_pad * g.k_area : g.co_pad * g.ci_pad * g.k_area;

  // A tile is fetched unless the previous iteration left the same tile resident.
  DramTraffic d;
  d.out = std::int64_t{g.out_h} * g.out_w * g.co_pad;
  const bool ws = t.order == LoopOrder::kWeightStationary;
  if (w.depthwise) {
    d.inp = input_once;
  } else if (ws) {
    d.inp = n_spatial == 1 && n_i == 1 ? input_once : n_o * input_once;
  } else {
    d.inp = n_i == 1 ? input_once : n_o * input_once;
  }
  const bool wgt_reused = ws ? n_i == 1 : n_o == 1 && n_i == 1;
  d.wgt = wgt_reused ? weights_once : n_spatial * weights_once;

  const Segments outs(g.co_blocks, t.out_blocks);
  const Segments ins(g.ci_blocks, t.in_blocks);
  const std::int64_t uop_full = uop_tile_bytes(outs.runs[0].size, ins.runs[0].size, w, h);
  if (uop_full <= h.uop_buffer_bytes()) {
    d.uop = uop_full;
  } else {
    // Every tile streams its own micro-ops.
    std::int64_t per_spatial_tile = 0;
    for (const auto& o : outs) {
      for (const auto& i : ins) {
        per_spatial_tile += o.count * i.count * uop_tile_bytes(o.size, i.size, w, h);
      }
    }
    d.uop = per_spatial_tile * n_spatial;
  }
  return d;
}

std::vector<TilingChoice> candidate_tilings(const LayerWorkload& w, const HwConfig& h) {
  const auto g = geometry(w, h);
  std::vector<TilingChoice> out;
  const int max_o = next_pow2(g.co_blocks);
  const int max_i = next_pow2(g.ci_blocks);
  const int max_r = next_pow2(g.out_h);
  const int max_c = next_pow2(g.out_w);
  for (int o = 1; o <= max_o; o <<= 1) {
    for (int i = 1; i <= max_i; i <<= 1) {
      for (int r = 1; r <= max_r; r <<= 1) {
        for (int c = 1; c <= max_c; c <<= 1) {
          for (auto order : {LoopOrder::kWeightStationary, LoopOrder::kInputStationary}) {
            out.push_back({o, i, r, c, order});
          }
        }
      }
    }
  }
  return out;
}

TilingChoice optimal_tiling(const LayerWorkload& w, const HwConfig& h) {
  w.check();
  const auto g = geometry(w, h);
  const int max_o = next_pow2(g.co_blocks);
  const int max_i = next_pow2(g.ci_blocks);
  const int max_r = next_pow2(g.out_h);
  const int max_c = next_pow2(g.out_w);

  bool found = false;
  TilingChoice best;
  std::tuple<std::int64_t, std::int64_t> best_key{};
  // Loop nesting matches the lexicographic tie-break order, so a strict
  // comparison keeps the first (smallest) tiling among equals.
  for (int o = 1; o <= max_o; o <<= 1) {
    for (int i = 1; i <= max_i; i <<= 1) {
      if (!fits(w, h, {o, i, 1, 1})) {
        continue;
      }
      for (int r = 1; r <= max_r; r <<= 1) {
        for (int c = 1; c <= max_c; c <<= 1) {
          const TilingChoice base{o, i, r, c, LoopOrder::kWeightStationary};
          if (!fits(w, h, base)) {
            break;  // footprints grow with c
          }
          const auto tiles = tile_count(w, h, base);
          for (auto order : {LoopOrder::kWeightStationary, LoopOrder::kInputStationary}) {
            TilingChoice t = base;
            t.order = order;
            const std::tuple<std::int64_t, std::int64_t> key{dram_traffic(w, h, t).total(), tiles};
            if (!found || key < best_key) {
              found = true;
              best = t;
              best_key = key;
            }
          }
        }
      }
    }
  }
  if (!found) {
    throw InfeasibleWorkload("no tiling of layer fits the buffers of " + h.to_string());
  }
  return best;
}

PerfReport simulate_layer(const LayerWorkload& w, const HwConfig& h, const TilingChoice& t) {
  w.check();
  if (!is_valid(h).valid) {
    throw ValidationError("cannot simulate invalid config " + h.to_string());
  }
  if (!fits(w, h, t)) {
    throw InfeasibleWorkload("tiling does not fit the buffers of " + h.to_string());
  }
  const auto g = geometry(w, h);
  const Segments rows(g.out_h, t.rows);
  const Segments cols(g.out_w, t.cols);
  const Segments outs(g.co_blocks, t.out_blocks);
  const Segments ins(g.ci_blocks, t.in_blocks);
  const bool ws = t.order == LoopOrder::kWeightStationary;
  const std::int64_t uop_full = uop_tile_bytes(outs.runs[0].size, ins.runs[0].size, w, h);
  const bool uop_reload = uop_full > h.uop_buffer_bytes();
  const std::int64_t bi = w.depthwise ? h.block_out() : h.block_in();
  const bool inp_reused_ws = rows.tiles * cols.tiles == 1 && ins.tiles == 1;
  const bool wgt_reused = ws ? ins.tiles == 1 : outs.tiles == 1 && ins.tiles == 1;

  PerfReport r;
  // Walk tile classes; loop nest is o,h,w,i (weight-stationary) or h,w,o,i.
  for (const auto& so : outs) {
    for (const auto& sr : rows) {
      for (const auto& sc : cols) {
        for (const auto& si : ins) {
          const std::int64_t n = so.count * sr.count * sc.count * si.count;
          const std::int64_t in_ch = w.depthwise ? std::int64_t{so.size} * bi : std::int64_t{si.size} * bi;
          const std::int64_t in_px = std::int64_t{in_extent(sr.size, w.stride, w.k_h, w.in_h)} *
                                     in_extent(sc.size, w.stride, w.k_w, w.in_w);
          const std::int64_t wgt_bytes =
              w.depthwise ? std::int64_t{so.size} * h.block_out() * g.k_area
                          : std::int64_t{so.size} * h.block_out() * si.size * h.block_in() * g.k_area;

          const bool first_px = sr.first && sc.first;
          bool load_inp = true;
          if (!w.depthwise) {
            load_inp = ws ? !inp_reused_ws || so.first : ins.tiles > 1 || so.first;
          }
          const bool load_wgt = !wgt_reused || first_px;

          // First-tile runs always have count 1, so the flags select single tiles.
          const std::int64_t bytes_inp = load_inp ? in_px * in_ch : 0;
          const std::int64_t bytes_wgt = load_wgt ? wgt_bytes : 0;
          const std::int64_t bytes_out = si.last ? std::int64_t{sr.size} * sc.size * so.size * h.block_out() : 0;
          const std::int64_t bytes_uop = uop_reload ? uop_tile_bytes(so.size, si.size, w, h) : 0;
          const std::int64_t compute =
              std::int64_t{sr.size} * sc.size * so.size * (w.depthwise ? 1 : si.size) * g.k_area;
          const std::int64_t mem = ceil_div(bytes_inp + bytes_wgt + bytes_out + bytes_uop, kDramBytesPerCycle);
          r.compute_cycles += n * compute;
          r.total_cycles += n * std::max(compute, mem);
          r.bytes_inp += n * bytes_inp;
          r.bytes_wgt += n * bytes_wgt;
          r.bytes_acc += n * bytes_out;
          r.bytes_uop += n * bytes_uop;
        }
      }
    }
  }
  if (!uop_reload) {
    r.bytes_uop += uop_full;
    r.total_cycles += ceil_div(uop_full, kDramBytesPerCycle);
  }
  r.derive();
  return r;
}

PerfReport simulate_layer(const LayerWorkload& w, const HwConfig& h) {
  return simulate_layer(w, h, optimal_tiling(w, h));
}

PerfReport simulate(std::span<const LayerWorkload> workloads, const HwConfig& h) {
  if (workloads.empty()) {
    throw ValidationError("simulate needs at least one layer");
  }
  PerfReport total;
  for (const auto& w : workloads) {
    total += simulate_layer(w, h);
  }
  total.derive();
  return total;
}

void PerfReport::derive() {
  latency_s = static_cast<double>(total_cycles) / kClockHz;
  energy_j = static_cast<double>(dram_bytes()) * kDramJoulesPerByte;
  edp_js = energy_j * latency_s;
}

PerfReport& PerfReport::operator+=(const PerfReport& o) {
  compute_cycles += o.compute_cycles;
  bytes_inp += o.bytes_inp;
  bytes_wgt += o.bytes_wgt;
  bytes_acc += o.bytes_acc;
  bytes_uop += o.bytes_uop;
  total_cycles += o.total_cycles;
  derive();
  return *this;
}

std::string perf_csv_header() { return "cycles,bytes_inp,bytes_wgt,bytes_acc,bytes_uop,latency_s,energy_j,edp_js"; }

std::string to_csv_row(const PerfReport& r) {
  std::ostringstream os;
  os << r.total_cycles << ',' << r.bytes_inp << ',' << r.bytes_wgt << ',' << r.bytes_acc << ',' << r.bytes_uop << ','
     << std::setprecision(17) << r.latency_s << ',' << r.energy_j << ',' << r.edp_js;
  return os.str();
}

std::string_view to_string(Metric m) { return m == Metric::kCycles ? "cycles" : "edp"; }

Metric parse_metric(std::string_view text) {
  if (text == "cycles" || text == "latency") {
    return Metric::kCycles;
  }
  if (text == "edp") {
    return Metric::kEdp;
  }
  throw ValidationError("unknown metric '" + std::string(text) + "' (expected cycles or edp)");
}

double metric_value(const PerfReport& r, Metric m) {
  return m == Metric::kCycles ? static_cast<double>(r.total_cycles) : r.edp_js;
}

}  // namespace hwnas::accel
