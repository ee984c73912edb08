#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace radseq {

using CaptionTokens = std::vector<std::string>;

/// Spatial structures between radicals. A caption that is a bare radical is
/// the implicit single-element structure and has no kind.
enum class StructureKind {
  LeftRight,          // a
  TopBottom,          // d
  TopLeftSurround,    // stl
  TopRightSurround,   // str
  BottomLeftSurround, // sbl
  LeftSurround,       // sl
  BottomSurround,     // sb
  TopSurround,        // st
  Surround,           // s
  Within,             // w
};

inline constexpr std::size_t kStructureKindCount = 10;

std::string_view token_of(StructureKind kind);
std::optional<StructureKind> structure_from_token(std::string_view token);
std::span<const StructureKind> all_structure_kinds();

/// {a, d} take two or more children; every surround/within kind takes exactly two.
bool is_variadic(StructureKind kind);

inline constexpr std::string_view kSos = "<sos>";
inline constexpr std::string_view kEos = "<eos>";
inline constexpr std::string_view kOpenBrace = "{";
inline constexpr std::string_view kCloseBrace = "}";

class CaptionError : public std::invalid_argument {
 public:
  CaptionError(const std::string& what, std::size_t position)
      : std::invalid_argument(what + " at token " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class VocabularyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense token <-> index bijection. Layout: <sos>, <eos>, the ten structure
/// tokens, "{", "}", then radicals.
class Vocabulary {
 public:
  static constexpr int kSosIndex = 0;
  static constexpr int kEosIndex = 1;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  /// Standard layout around the given radical tokens.
  static Vocabulary with_radicals(const std::vector<std::string>& radicals);

  /// One token per line, line number = index.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  static Vocabulary parse_text(std::string_view text);
  std::string to_text() const;

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  int index_of(std::string_view token) const;
  const std::string& token_at(int index) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool is_radical(std::string_view token) const;
  std::vector<std::string> radicals() const;

  /// FNV-1a over the text form; stable across platforms.
  std::uint64_t hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Leaf radical or a structure node with ordered children.
class CaptionTree {
 public:
  static CaptionTree leaf(std::string radical);
  static CaptionTree node(StructureKind kind, std::vector<CaptionTree> children);

  bool is_leaf() const { return !kind_.has_value(); }
  const std::string& radical() const { return radical_; }
  StructureKind kind() const { return *kind_; }
  const std::vector<CaptionTree>& children() const { return children_; }

  std::size_t leaf_count() const;
  std::size_t internal_count() const;
  /// Leaf radicals in pre-order.
  std::vector<std::string> leaves() const;

  friend bool operator==(const CaptionTree&, const CaptionTree&) = default;

 private:
  std::optional<StructureKind> kind_;
  std::string radical_;
  std::vector<CaptionTree> children_;
};

/// Throws CaptionError (with token position) on any grammar violation.
CaptionTree parse(const CaptionTokens& tokens, const Vocabulary& vocab);

CaptionTokens serialize(const CaptionTree& tree);

/// Space-joined token string, e.g. "a { r1 r2 }".
std::string to_string(const CaptionTokens& tokens);
CaptionTokens split_tokens(std::string_view text);

bool is_grammatical(const CaptionTokens& tokens, const Vocabulary& vocab);

/// Token indices with <eos> appended.
std::vector<int> encode(const CaptionTokens& tokens, const Vocabulary& vocab);
/// Inverse of encode; a trailing <eos> is dropped.
CaptionTokens decode(std::span<const int> indices, const Vocabulary& vocab);

struct CoverageReport {
  bool covered = true;
  std::set<std::string> missing;
};

/// Whether every leaf radical used by `test` also occurs as a leaf in `train`.
CoverageReport radical_coverage(const std::vector<CaptionTokens>& train,
                                const std::vector<CaptionTokens>& test,
                                const Vocabulary& vocab);

}  // namespace radseq
