#include <algorithm>
#include <charconv>
#include <sstream>

#include "hwnas/accel.hpp"

namespace hwnas::accel {

std::array<int, kNumParams> HwConfig::params() const {
  return {block_in_log2, block_out_log2, uop_width_log2, uop_buf_log2, inp_buf_log2, wgt_buf_log2, acc_buf_log2};
}

HwConfig HwConfig::from_params(std::span<const int> p) {
  if (p.size() != kNumParams) {
    throw ValidationError("HwConfig needs 7 parameters, got " + std::to_string(p.size()));
  }
  HwConfig h{p[0], p[1], p[2], p[3], p[4], p[5], p[6]};
  h.check_range();
  return h;
}

void HwConfig::check_range() const {
  const auto p = params();
  for (int i = 0; i < kNumParams; ++i) {
    if (p[i] < kParamMin[i] || p[i] > kParamMax[i]) {
      throw RangeError(std::string(kParamNames[i]) + "=" + std::to_string(p[i]) + " outside [" +
                       std::to_string(kParamMin[i]) + ", " + std::to_string(kParamMax[i]) + "]");
    }
  }
}

int HwConfig::index() const {
  check_range();
  const auto p = params();
  int idx = 0;
  for (int i = 0; i < kNumParams; ++i) {
    idx = idx * kParamWidth[i] + (p[i] - kParamMin[i]);
  }
  return idx;
}

HwConfig HwConfig::from_index(int index) {
  if (index < 0 || index >= kSpaceSize) {
    throw RangeError("config index " + std::to_string(index) + " outside [0, 32768)");
  }
  std::array<int, kNumParams> p{};
  for (int i = kNumParams - 1; i >= 0; --i) {
    p[i] = kParamMin[i] + index % kParamWidth[i];
    index /= kParamWidth[i];
  }
  return from_params(p);
}

std::vector<double> HwConfig::one_hot() const {
  check_range();
  std::vector<double> v(kOneHotSize, 0.0);
  const auto p = params();
  for (int i = 0; i < kNumParams; ++i) {
    v[kOneHotOffset[i] + p[i] - kParamMin[i]] = 1.0;
  }
  return v;
}

HwConfig HwConfig::from_scores(std::span<const double> scores) {
  if (scores.size() != kOneHotSize) {
    throw ValidationError("hardware encoding must have length 36, got " + std::to_string(scores.size()));
  }
  std::array<int, kNumParams> p{};
  for (int i = 0; i < kNumParams; ++i) {
    const auto seg = scores.subspan(kOneHotOffset[i], kParamWidth[i]);
    const auto best = std::max_element(seg.begin(), seg.end());
    p[i] = kParamMin[i] + static_cast<int>(best - seg.begin());
  }
  return from_params(p);
}

std::string HwConfig::to_string() const {
  std::ostringstream os;
  const auto p = params();
  os << '[';
  for (int i = 0; i < kNumParams; ++i) {
    os << (i ? "," : "") << p[i];
  }
  os << ']';
  return os.str();
}

HwConfig HwConfig::parse(std::string_view text) {
  if (text == "default") {
    return kDefaultConfig;
  }
  std::vector<int> values;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char c = text[pos];
    if (c == '[' || c == ']' || c == ',' || c == ' ') {
      ++pos;
      continue;
    }
    int value = 0;
    auto [end, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), value);
    if (ec != std::errc{}) {
      throw ValidationError("malformed hardware config '" + std::string(text) + "'");
    }
    values.push_back(value);
    pos = static_cast<std::size_t>(end - text.data());
  }
  return from_params(values);
}

std::string_view to_string(Validity v) {
  switch (v) {
    case Validity::kValid: return "valid";
    case Validity::kIsaWidth: return "isa-width";
    case Validity::kSramBudget: return "sram-budget";
  }
  return "unknown";
}

int address_bits(const HwConfig& h) {
  const int inp = h.inp_buf_log2 - h.block_in_log2;
  const int wgt = h.wgt_buf_log2 - h.block_in_log2 - h.block_out_log2;
  const int acc = h.acc_buf_log2 - h.block_out_log2 - 2;
  return inp + wgt + acc;
}

std::int64_t sram_bytes(const HwConfig& h) {
  return h.inp_buffer_bytes() + h.wgt_buffer_bytes() + h.acc_buffer_bytes() + h.uop_buffer_bytes();
}

ValidityResult is_valid(const HwConfig& h) {
  h.check_range();
  if (address_bits(h) > (1 << h.uop_width_log2)) {
    return {false, Validity::kIsaWidth};
  }
  if (sram_bytes(h) > kSramBudgetBytes) {
    return {false, Validity::kSramBudget};
  }
  return {true, Validity::kValid};
}

std::int64_t HwSpace::cardinality() const {
  std::int64_t n = 1;
  for (int i = 0; i < kNumParams; ++i) {
    n *= std::max(0, hi[i] - lo[i] + 1);
  }
  return n;
}

HwSpace& HwSpace::fix(int param, int value) {
  lo.at(param) = value;
  hi.at(param) = value;
  return *this;
}

std::vector<HwConfig> HwSpace::enumerate() const {
  for (int i = 0; i < kNumParams; ++i) {
    if (lo[i] < kParamMin[i] || hi[i] > kParamMax[i]) {
      throw RangeError("space restriction for " + std::string(kParamNames[i]) + " exceeds the parameter range");
    }
  }
  std::vector<HwConfig> out;
  out.reserve(static_cast<std::size_t>(cardinality()));
  std::array<int, kNumParams> p = lo;
  if (cardinality() == 0) {
    return out;
  }
  while (true) {
    out.push_back(HwConfig::from_params(p));
    int i = kNumParams - 1;
    while (i >= 0 && p[i] == hi[i]) {
      p[i] = lo[i];
      --i;
    }
    if (i < 0) {
      break;
    }
    ++p[i];
  }
  return out;
}

std::vector<HwConfig> enumerate_space() { return HwSpace{}.enumerate(); }

double valid_fraction(const HwSpace& space) {
  const auto configs = space.enumerate();
  if (configs.empty()) {
    return 0.0;
  }
  const auto n = std::count_if(configs.begin(), configs.end(), [](const HwConfig& h) { return is_valid(h).valid; });
  return static_cast<double>(n) / static_cast<double>(configs.size());
}

const std::vector<HwConfig>& valid_configs() {
  static const std::vector<HwConfig> configs = [] {
    std::vector<HwConfig> v;
    for (const auto& h : enumerate_space()) {
      if (is_valid(h).valid) {
        v.push_back(h);
      }
    }
    return v;
  }();
  return configs;
}

}  // namespace hwnas::accel
