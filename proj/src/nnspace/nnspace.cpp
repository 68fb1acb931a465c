#include "hwnas/nnspace.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace hwnas::nn {

char to_char(ChoiceId c) {
  switch (c) {
    case ChoiceId::kC3: return '3';
    case ChoiceId::kC5: return '5';
    case ChoiceId::kC7: return '7';
    case ChoiceId::kCX: return 'x';
  }
  return '?';
}

ChoiceId choice_from_char(char c) {
  switch (c) {
    case '3': return ChoiceId::kC3;
    case '5': return ChoiceId::kC5;
    case '7': return ChoiceId::kC7;
    case 'x':
    case 'X': return ChoiceId::kCX;
    default: break;
  }
  throw ValidationError(std::string("unknown choice '") + c + "' (expected 3, 5, 7 or x)");
}

Dataset parse_dataset(std::string_view id) {
  if (id == "imagenet") {
    return Dataset::kImageNet;
  }
  if (id == "cifar10") {
    return Dataset::kCifar10;
  }
  throw ValidationError("unknown dataset '" + std::string(id) + "' (expected imagenet or cifar10)");
}

std::string_view to_string(Dataset d) { return d == Dataset::kImageNet ? "imagenet" : "cifar10"; }

int SupernetSpec::num_choice_blocks() const {
  int n = 0;
  for (const auto& s : stages) {
    if (s.kind == StageKind::kChoiceBlock) {
      n += s.repeat;
    }
  }
  return n;
}

std::int64_t SupernetSpec::num_architectures() const {
  std::int64_t n = 1;
  for (int i = 0; i < num_choice_blocks(); ++i) {
    n *= kNumChoices;
  }
  return n;
}

std::string SupernetSpec::to_json() const {
  static constexpr std::array<const char*, 4> kKinds{"conv", "choice_block", "global_pool", "fc"};
  nlohmann::json j;
  j["version"] = version;
  j["dataset"] = std::string(hwnas::nn::to_string(dataset));
  j["stages"] = nlohmann::json::array();
  for (const auto& s : stages) {
    j["stages"].push_back({{"kind", kKinds[static_cast<int>(s.kind)]},
                           {"input_res", s.input_res},
                           {"input_channels", s.input_channels},
                           {"channels", s.channels},
                           {"repeat", s.repeat},
                           {"stride", s.stride},
                           {"kernel", s.kernel}});
  }
  return j.dump(2);
}

const SupernetSpec& supernet(Dataset d) {
  using K = StageKind;
  static const SupernetSpec kImageNet{Dataset::kImageNet,
                                      1,
                                      {
                                          {K::kConv, 224, 3, 16, 1, 2, 3},
                                          {K::kChoiceBlock, 112, 16, 64, 4, 2, 0},
                                          {K::kChoiceBlock, 56, 64, 160, 4, 2, 0},
                                          {K::kChoiceBlock, 28, 160, 320, 8, 2, 0},
                                          {K::kChoiceBlock, 14, 320, 640, 4, 2, 0},
                                          {K::kConv, 7, 640, 1024, 1, 1, 1},
                                          {K::kGlobalPool, 7, 1024, 1024, 1, 1, 0},
                                          {K::kFullyConnected, 1, 1024, 1000, 1, 1, 1},
                                      }};
  static const SupernetSpec kCifar{Dataset::kCifar10,
                                   1,
                                   {
                                       {K::kConv, 32, 3, 64, 1, 1, 3},
                                       {K::kChoiceBlock, 32, 64, 256, 4, 2, 0},
                                       {K::kChoiceBlock, 16, 256, 640, 4, 2, 0},
                                       {K::kChoiceBlock, 8, 640, 1280, 1, 2, 0},
                                       {K::kGlobalPool, 4, 1280, 1280, 1, 1, 0},
                                       {K::kFullyConnected, 1, 1280, 10, 1, 1, 1},
                                   }};
  return d == Dataset::kImageNet ? kImageNet : kCifar;
}

std::string Architecture::to_string() const {
  std::string s;
  s.reserve(choices.size());
  for (auto c : choices) {
    s.push_back(to_char(c));
  }
  return s;
}

Architecture Architecture::parse(std::string_view text) {
  Architecture a;
  for (char c : text) {
    a.choices.push_back(choice_from_char(c));
  }
  return a;
}

Architecture Architecture::uniform(std::size_t layers, ChoiceId c) { return Architecture{std::vector<ChoiceId>(layers, c)}; }

Architecture Architecture::from_scores(std::span<const double> scores) {
  if (scores.size() % kNumChoices != 0) {
    throw ValidationError("architecture encoding length must be a multiple of 4");
  }
  Architecture a;
  for (std::size_t l = 0; l < scores.size() / kNumChoices; ++l) {
    const auto row = scores.subspan(l * kNumChoices, kNumChoices);
    a.choices.push_back(static_cast<ChoiceId>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return a;
}

std::vector<double> encode_onehot(const Architecture& a) {
  std::vector<double> v(a.size() * kNumChoices, 0.0);
  for (std::size_t l = 0; l < a.size(); ++l) {
    v[l * kNumChoices + static_cast<std::size_t>(a.choices[l])] = 1.0;
  }
  return v;
}

Architecture decode_onehot(std::span<const double> v) {
  for (std::size_t l = 0; l < v.size() / kNumChoices; ++l) {
    int ones = 0;
    for (int c = 0; c < kNumChoices; ++c) {
      const double x = v[l * kNumChoices + c];
      if (x != 0.0 && x != 1.0) {
        throw ValidationError("one-hot entries must be 0 or 1");
      }
      ones += x == 1.0;
    }
    if (ones != 1) {
      throw ValidationError("block " + std::to_string(l) + " has " + std::to_string(ones) + " active choices");
    }
  }
  return Architecture::from_scores(v);
}

namespace {

accel::LayerWorkload pointwise(int res, int c_in, int c_out) { return {res, res, c_in, c_out, 1, 1, 1, false}; }

accel::LayerWorkload depthwise(int res, int channels, int kernel, int stride) {
  return {res, res, channels, channels, kernel, kernel, stride, true};
}

struct BlockSite {
  int res_in = 0;
  int c_in = 0;
  int channels = 0;
  int stride = 1;
};

BlockSite locate_block(const SupernetSpec& s, std::size_t block) {
  std::size_t seen = 0;
  for (const auto& st : s.stages) {
    if (st.kind != StageKind::kChoiceBlock) {
      continue;
    }
    if (block < seen + static_cast<std::size_t>(st.repeat)) {
      const bool first = block == seen;
      const int res_out = (st.input_res + st.stride - 1) / st.stride;
      return first ? BlockSite{st.input_res, st.input_channels, st.channels, st.stride}
                   : BlockSite{res_out, st.channels, st.channels, 1};
    }
    seen += static_cast<std::size_t>(st.repeat);
  }
  throw ValidationError("block index " + std::to_string(block) + " out of range");
}

}  // namespace

std::vector<accel::LayerWorkload> stem_workloads(const SupernetSpec& s) {
  std::vector<accel::LayerWorkload> out;
  for (const auto& st : s.stages) {
    if (st.kind == StageKind::kChoiceBlock) {
      break;
    }
    if (st.kind == StageKind::kConv) {
      // The stem is packed on the host (im2col) and runs as a 1x1 conv over
      // k*k*c_in channels at output resolution.
      const int res_out = (st.input_res + st.stride - 1) / st.stride;
      out.push_back(pointwise(res_out, st.input_channels * st.kernel * st.kernel, st.channels));
    }
  }
  return out;
}

std::vector<accel::LayerWorkload> head_workloads(const SupernetSpec& s) {
  std::vector<accel::LayerWorkload> out;
  bool after_blocks = false;
  for (const auto& st : s.stages) {
    if (st.kind == StageKind::kChoiceBlock) {
      after_blocks = true;
      continue;
    }
    if (!after_blocks) {
      continue;
    }
    if (st.kind == StageKind::kConv || st.kind == StageKind::kFullyConnected) {
      out.push_back({st.input_res, st.input_res, st.input_channels, st.channels, st.kernel, st.kernel, st.stride, false});
    }
  }
  return out;
}

std::vector<accel::LayerWorkload> block_workloads(const SupernetSpec& s, std::size_t block, ChoiceId c) {
  const auto site = locate_block(s, block);
  const int mid = site.channels / 2;
  const int pw_in = site.stride > 1 ? site.c_in : site.c_in / 2;
  const int res_out = (site.res_in + site.stride - 1) / site.stride;

  if (c == ChoiceId::kCX) {
    return {pointwise(site.res_in, pw_in, mid), depthwise(site.res_in, mid, 3, site.stride),
            pointwise(res_out, mid, mid),       depthwise(res_out, mid, 3, 1),
            pointwise(res_out, mid, mid),       depthwise(res_out, mid, 3, 1),
            pointwise(res_out, mid, mid)};
  }
  const int k = c == ChoiceId::kC3 ? 3 : c == ChoiceId::kC5 ? 5 : 7;
  return {pointwise(site.res_in, pw_in, mid), depthwise(site.res_in, mid, k, site.stride), pointwise(res_out, mid, mid)};
}

std::vector<accel::LayerWorkload> workloads_of(const Architecture& a, const SupernetSpec& s) {
  if (static_cast<int>(a.size()) != s.num_choice_blocks()) {
    throw ValidationError("architecture has " + std::to_string(a.size()) + " blocks, supernet expects " +
                          std::to_string(s.num_choice_blocks()));
  }
  auto out = stem_workloads(s);
  for (std::size_t b = 0; b < a.size(); ++b) {
    const auto blk = block_workloads(s, b, a.choices[b]);
    out.insert(out.end(), blk.begin(), blk.end());
  }
  const auto head = head_workloads(s);
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

std::vector<double> softmax_rows(std::span<const double> logits, std::size_t width) {
  std::vector<double> p(logits.size());
  for (std::size_t r = 0; r < logits.size() / width; ++r) {
    const auto row = logits.subspan(r * width, width);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      p[r * width + c] = std::exp(row[c] - mx);
      z += p[r * width + c];
    }
    for (std::size_t c = 0; c < width; ++c) {
      p[r * width + c] /= z;
    }
  }
  return p;
}

ArchDistribution::ArchDistribution(std::size_t layers) : layers_(layers), logits_(layers * kNumChoices, 0.0) {}

ArchDistribution::ArchDistribution(std::size_t layers, std::vector<double> logits)
    : layers_(layers), logits_(std::move(logits)) {
  if (logits_.size() != layers_ * kNumChoices) {
    throw ValidationError("logit matrix must have 4 entries per block");
  }
}

std::vector<double> ArchDistribution::probabilities() const { return softmax_rows(logits_); }

Architecture sample_from_probabilities(std::span<const double> probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Architecture a;
  for (std::size_t l = 0; l < probs.size() / kNumChoices; ++l) {
    const double x = u(rng);
    double acc = 0.0;
    int pick = kNumChoices - 1;
    for (int c = 0; c < kNumChoices; ++c) {
      acc += probs[l * kNumChoices + c];
      if (x < acc) {
        pick = c;
        break;
      }
    }
    a.choices.push_back(static_cast<ChoiceId>(pick));
  }
  return a;
}

Architecture ArchDistribution::sample(std::mt19937_64& rng) const {
  const auto p = probabilities();
  return sample_from_probabilities(p, rng);
}

Architecture ArchDistribution::sample(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  return sample(rng);
}

Architecture ArchDistribution::argmax() const { return Architecture::from_scores(logits_); }

Architecture random_architecture(std::size_t layers, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, kNumChoices - 1);
  Architecture a;
  for (std::size_t l = 0; l < layers; ++l) {
    a.choices.push_back(static_cast<ChoiceId>(pick(rng)));
  }
  return a;
}

}  // namespace hwnas::nn
