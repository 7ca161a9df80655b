#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace editroom {

/// k x d_t matrix of command vectors.
struct TextFeature {
  Eigen::MatrixXd vectors;
  /// Source slots x k: how well each source object's caption matches each
  /// command row. Empty when the command was encoded without a scene.
  Eigen::MatrixXd slot_match;

  int tokens() const { return static_cast<int>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
};

/// Seeded hashed bag-of-tokens encoder. Row 0 is the whole bag. The next rows
/// hold one bag per segment of the command (split at ':', '[' and ']'), and the
/// last max(1, (k-1)/3) rows sum the tokens hashed into each bucket.
class TextFeaturizer {
public:
  TextFeaturizer(int tokens = 8, int dim = 32, std::uint64_t seed = 0x7e47);

  TextFeature encode(std::string_view command) const;
  /// Also fills slot_match for `slots` rows; captions past the end leave zero rows.
  TextFeature encode(std::string_view command, const std::vector<std::string>& captions, int slots) const;

  int tokens() const { return tokens_; }
  int dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }

private:
  int tokens_;
  int dim_;
  std::uint64_t seed_;
};

/// Lowercased words and decimal numbers ("0.5" stays one token); stopwords dropped.
std::vector<std::string> command_tokens(std::string_view command);

}  // namespace editroom
