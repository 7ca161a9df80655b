#include "editroom/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <random>

#include "editroom/error.hpp"
#include "editroom/executor.hpp"

namespace editroom {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ull ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Unit-variance gaussian vector keyed by (seed, salt, token).
Eigen::VectorXd token_vector(std::string_view token, std::uint64_t seed, std::uint64_t salt, int dim) {
  std::mt19937_64 rng(fnv1a(token, seed * 0x9e3779b97f4a7c15ull + salt));
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = n(rng);
  return v;
}

}  // namespace

std::vector<std::string> command_tokens(std::string_view command) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < command.size()) {
    const unsigned char c = static_cast<unsigned char>(command[i]);
    if (std::isalpha(c)) {
      std::string w;
      while (i < command.size() && std::isalpha(static_cast<unsigned char>(command[i])))
        w += static_cast<char>(std::tolower(static_cast<unsigned char>(command[i++])));
      if (!is_stopword(w)) out.push_back(std::move(w));
    } else if (std::isdigit(c) || ((c == '-' || c == '.') && i + 1 < command.size() &&
                                   std::isdigit(static_cast<unsigned char>(command[i + 1])))) {
      std::string w(1, static_cast<char>(c));
      ++i;
      while (i < command.size() && (std::isdigit(static_cast<unsigned char>(command[i])) || command[i] == '.'))
        w += command[i++];
      out.push_back(std::move(w));
    } else {
      ++i;
    }
  }
  return out;
}

TextFeaturizer::TextFeaturizer(int tokens, int dim, std::uint64_t seed) : tokens_(tokens), dim_(dim), seed_(seed) {
  if (tokens < 2 || dim < 1) throw ValidationError("text featurizer needs >= 2 tokens and dim >= 1");
}

TextFeature TextFeaturizer::encode(std::string_view command) const {
  TextFeature f;
  f.vectors = Eigen::MatrixXd::Zero(tokens_, dim_);
  const auto toks = command_tokens(command);
  if (toks.empty()) return f;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  const int buckets = std::max(1, (tokens_ - 1) / 3);
  const int segment_rows = tokens_ - 1 - buckets;
  for (const auto& t : toks) {
    f.vectors.row(0) += token_vector(t, seed_, 0, dim_).transpose() * scale;
    const auto b = static_cast<int>(fnv1a(t, seed_ + 1) % static_cast<std::uint64_t>(buckets));
    f.vectors.row(tokens_ - buckets + b) += token_vector(t, seed_, 1, dim_).transpose() * scale;
  }
  f.vectors.row(0) /= std::sqrt(static_cast<double>(toks.size()));

  // One row per delimited segment; overflow folds into the last segment row.
  if (segment_rows > 0) {
    std::vector<std::vector<std::string>> segments;
    std::string cur;
    auto flush = [&] {
      auto st = command_tokens(cur);
      cur.clear();
      if (!st.empty()) segments.push_back(std::move(st));
    };
    for (char c : command) {
      if (c == ':' || c == '[' || c == ']') flush();
      else cur += c;
    }
    flush();
    auto bag = [&](const std::vector<std::string>& st) {
      Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(dim_);
      for (const auto& t : st) v += token_vector(t, seed_, 0, dim_).transpose();
      return Eigen::RowVectorXd(v * (scale / std::sqrt(static_cast<double>(st.size()))));
    };
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const int row = 1 + std::min(static_cast<int>(k), segment_rows - 1);
      f.vectors.row(row) += bag(segments[k]);
    }
  }
  return f;
}

TextFeature TextFeaturizer::encode(std::string_view command, const std::vector<std::string>& captions,
                                   int slots) const {
  if (static_cast<int>(captions.size()) > slots) throw ValidationError("more captions than slots");
  TextFeature f = encode(command);
  f.slot_match = Eigen::MatrixXd::Zero(slots, tokens_);
  const int buckets = std::max(1, (tokens_ - 1) / 3);
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const TextFeature c = encode(captions[i]);
    // Whole-bag and segment rows share one token space: compare them with the
    // caption bag. Bucket rows compare bucket to bucket.
    for (int j = 0; j < tokens_; ++j) {
      const auto& mine = j < tokens_ - buckets ? c.vectors.row(0) : c.vectors.row(j);
      f.slot_match(static_cast<Eigen::Index>(i), j) = mine.dot(f.vectors.row(j));
    }
  }
  return f;
}

}  // namespace editroom
