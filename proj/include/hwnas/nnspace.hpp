#pragma once

// Supernet skeletons, choice-block architectures and their encodings.

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hwnas/accel.hpp"

namespace hwnas::nn {

enum class ChoiceId : int { kC3 = 0, kC5 = 1, kC7 = 2, kCX = 3 };
inline constexpr int kNumChoices = 4;
inline constexpr std::array<ChoiceId, kNumChoices> kAllChoices{ChoiceId::kC3, ChoiceId::kC5, ChoiceId::kC7,
                                                                 ChoiceId::kCX};

[[nodiscard]] char to_char(ChoiceId c);
[[nodiscard]] ChoiceId choice_from_char(char c);

enum class Dataset { kImageNet, kCifar10 };
[[nodiscard]] Dataset parse_dataset(std::string_view id);
[[nodiscard]] std::string_view to_string(Dataset d);

enum class StageKind { kConv, kChoiceBlock, kGlobalPool, kFullyConnected };

/// One row of a supernet table.
struct StageSpec {
  StageKind kind = StageKind::kConv;
  int input_res = 1;  // square spatial input size
  int input_channels = 1;
  int channels = 1;
  int repeat = 1;
  int stride = 1;
  int kernel = 1;  // plain convolutions only
};

struct SupernetSpec {
  Dataset dataset = Dataset::kCifar10;
  int version = 1;
  std::vector<StageSpec> stages;

  [[nodiscard]] int num_choice_blocks() const;
  [[nodiscard]] std::int64_t num_architectures() const;
  [[nodiscard]] std::string to_json() const;
};

/// Immutable table contents for the two supported datasets.
[[nodiscard]] const SupernetSpec& supernet(Dataset d);

struct Architecture {
  std::vector<ChoiceId> choices;

  [[nodiscard]] std::size_t size() const { return choices.size(); }
  [[nodiscard]] std::string to_string() const;  // e.g. "3357x3337"
  static Architecture parse(std::string_view text);
  static Architecture uniform(std::size_t layers, ChoiceId c);
  /// Argmax per block of a (possibly soft) 4L-wide encoding.
  static Architecture from_scores(std::span<const double> scores);

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Block-major, choice-minor one-hot of length 4L.
[[nodiscard]] std::vector<double> encode_onehot(const Architecture& a);
[[nodiscard]] Architecture decode_onehot(std::span<const double> v);

/// Choice blocks expand to 1x1 / depthwise kxk / 1x1 (k = 3, 5, 7) or the
/// seven-conv CX stack on half the block channels. The stem, head convs and
/// the classifier (as a 1x1 conv) are included; pooling is not.
[[nodiscard]] std::vector<accel::LayerWorkload> workloads_of(const Architecture& a, const SupernetSpec& s);

/// Pieces of workloads_of: layers before the first block, the layers of one
/// block for a given choice, and layers after the last block.
[[nodiscard]] std::vector<accel::LayerWorkload> stem_workloads(const SupernetSpec& s);
[[nodiscard]] std::vector<accel::LayerWorkload> block_workloads(const SupernetSpec& s, std::size_t block, ChoiceId c);
[[nodiscard]] std::vector<accel::LayerWorkload> head_workloads(const SupernetSpec& s);

/// Logits alpha (L x 4) and their row-wise softmax.
class ArchDistribution {
 public:
  explicit ArchDistribution(std::size_t layers);
  ArchDistribution(std::size_t layers, std::vector<double> logits);

  [[nodiscard]] std::size_t layers() const { return layers_; }
  [[nodiscard]] std::span<const double> logits() const { return logits_; }
  [[nodiscard]] std::span<double> logits() { return logits_; }
  [[nodiscard]] std::vector<double> probabilities() const;

  /// Independent categorical draw per block; deterministic given the engine state.
  [[nodiscard]] Architecture sample(std::mt19937_64& rng) const;
  [[nodiscard]] Architecture sample(std::uint64_t seed) const;
  [[nodiscard]] Architecture argmax() const;

 private:
  std::size_t layers_;
  std::vector<double> logits_;
};

[[nodiscard]] Architecture random_architecture(std::size_t layers, std::mt19937_64& rng);

/// Categorical draw from an explicit L x 4 probability matrix (row-major).
[[nodiscard]] Architecture sample_from_probabilities(std::span<const double> probs, std::mt19937_64& rng);

/// Row-wise softmax of an L x 4 logit matrix.
[[nodiscard]] std::vector<double> softmax_rows(std::span<const double> logits, std::size_t width = kNumChoices);

}  // namespace hwnas::nn
