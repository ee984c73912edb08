#include "radseq/caption.hpp"

#include <array>
#include <fstream>
#include <sstream>

namespace radseq {

namespace {

constexpr std::array<StructureKind, kStructureKindCount> kKinds = {
    StructureKind::LeftRight,          StructureKind::TopBottom,
    StructureKind::TopLeftSurround,    StructureKind::TopRightSurround,
    StructureKind::BottomLeftSurround, StructureKind::LeftSurround,
    StructureKind::BottomSurround,     StructureKind::TopSurround,
    StructureKind::Surround,           StructureKind::Within,
};

constexpr std::array<std::string_view, kStructureKindCount> kKindTokens = {
    "a", "d", "stl", "str", "sbl", "sl", "sb", "st", "s", "w",
};

bool is_reserved(std::string_view t) {
  return t == kSos || t == kEos || t == kOpenBrace || t == kCloseBrace ||
         structure_from_token(t).has_value();
}

}  // namespace

std::string_view token_of(StructureKind kind) {
  return kKindTokens[static_cast<std::size_t>(kind)];
}

std::optional<StructureKind> structure_from_token(std::string_view token) {
  for (std::size_t i = 0; i < kKinds.size(); ++i) {
    if (kKindTokens[i] == token) return kKinds[i];
  }
  return std::nullopt;
}

std::span<const StructureKind> all_structure_kinds() { return kKinds; }

bool is_variadic(StructureKind kind) {
  return kind == StructureKind::LeftRight || kind == StructureKind::TopBottom;
}

// ============================================================================
// Vocabulary
// ============================================================================

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2 || tokens_[0] != kSos || tokens_[1] != kEos) {
    throw VocabularyError("vocabulary must start with <sos>, <eos>");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (t.empty() || t.find_first_of(" \t\r\n") != std::string::npos) {
      throw VocabularyError("invalid token at line " + std::to_string(i));
    }
    if (!index_.emplace(t, static_cast<int>(i)).second) {
      throw VocabularyError("duplicate token '" + t + "'");
    }
  }
}

Vocabulary Vocabulary::with_radicals(const std::vector<std::string>& radicals) {
  std::vector<std::string> tokens{std::string(kSos), std::string(kEos)};
  for (auto t : kKindTokens) tokens.emplace_back(t);
  tokens.emplace_back(kOpenBrace);
  tokens.emplace_back(kCloseBrace);
  for (const auto& r : radicals) {
    if (is_reserved(r)) throw VocabularyError("radical collides with reserved token '" + r + "'");
    tokens.push_back(r);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::parse_text(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(std::move(line));
    start = end + 1;
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VocabularyError("cannot open vocabulary " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

std::string Vocabulary::to_text() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw VocabularyError("cannot write vocabulary " + path.string());
  out << to_text();
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

int Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) throw VocabularyError("unknown token '" + std::string(token) + "'");
  return it->second;
}

const std::string& Vocabulary::token_at(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size()) {
    throw VocabularyError("token index " + std::to_string(index) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(index)];
}

bool Vocabulary::is_radical(std::string_view token) const {
  return contains(token) && !is_reserved(token);
}

std::vector<std::string> Vocabulary::radicals() const {
  std::vector<std::string> out;
  for (const auto& t : tokens_) {
    if (!is_reserved(t)) out.push_back(t);
  }
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// ============================================================================
// Trees
// ============================================================================

CaptionTree CaptionTree::leaf(std::string radical) {
  CaptionTree t;
  t.radical_ = std::move(radical);
  return t;
}

CaptionTree CaptionTree::node(StructureKind kind, std::vector<CaptionTree> children) {
  const std::size_t n = children.size();
  if (is_variadic(kind) ? n < 2 : n != 2) {
    throw std::invalid_argument("structure '" + std::string(token_of(kind)) + "' cannot take " +
                                std::to_string(n) + " children");
  }
  CaptionTree t;
  t.kind_ = kind;
  t.children_ = std::move(children);
  return t;
}

std::size_t CaptionTree::leaf_count() const {
  if (is_leaf()) return 1;
  std::size_t n = 0;
  for (const auto& c : children_) n += c.leaf_count();
  return n;
}

std::size_t CaptionTree::internal_count() const {
  if (is_leaf()) return 0;
  std::size_t n = 1;
  for (const auto& c : children_) n += c.internal_count();
  return n;
}

std::vector<std::string> CaptionTree::leaves() const {
  std::vector<std::string> out;
  if (is_leaf()) {
    out.push_back(radical_);
    return out;
  }
  for (const auto& c : children_) {
    auto sub = c.leaves();
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

// ============================================================================
// Parsing
// ============================================================================

namespace {

class Parser {
 public:
  Parser(const CaptionTokens& tokens, const Vocabulary& vocab) : tokens_(tokens), vocab_(vocab) {}

  CaptionTree run() {
    if (tokens_.empty()) throw CaptionError("empty caption", 0);
    CaptionTree tree = parse_caption();
    if (pos_ != tokens_.size()) {
      throw CaptionError(tokens_[pos_] == kCloseBrace ? "unbalanced '}'"
                                                      : "trailing tokens after complete caption",
                         pos_);
    }
    return tree;
  }

 private:
  CaptionTree parse_caption() {
    if (pos_ >= tokens_.size()) throw CaptionError("unexpected end of caption", pos_);
    const std::string& tok = tokens_[pos_];
    if (tok == kSos || tok == kEos) throw CaptionError("reserved token '" + tok + "'", pos_);
    if (tok == kOpenBrace) throw CaptionError("'{' without a structure token", pos_);
    if (tok == kCloseBrace) throw CaptionError("unbalanced '}'", pos_);
    if (!vocab_.contains(tok)) throw CaptionError("unknown token '" + tok + "'", pos_);

    const auto kind = structure_from_token(tok);
    if (!kind) {
      ++pos_;
      return CaptionTree::leaf(tok);
    }
    const std::size_t kind_pos = pos_++;
    if (pos_ >= tokens_.size() || tokens_[pos_] != kOpenBrace) {
      throw CaptionError("structure '" + tok + "' not followed by '{'", pos_);
    }
    const std::size_t open_pos = pos_++;
    std::vector<CaptionTree> children;
    while (true) {
      if (pos_ >= tokens_.size()) throw CaptionError("unbalanced '{'", open_pos);
      if (tokens_[pos_] == kCloseBrace) break;
      children.push_back(parse_caption());
    }
    const std::size_t n = children.size();
    if (is_variadic(*kind) ? n < 2 : n != 2) {
      throw CaptionError("structure '" + tok + "' has " + std::to_string(n) +
                             (is_variadic(*kind) ? " children, expected at least 2"
                                                 : " children, expected 2"),
                         kind_pos);
    }
    ++pos_;
    return CaptionTree::node(*kind, std::move(children));
  }

  const CaptionTokens& tokens_;
  const Vocabulary& vocab_;
  std::size_t pos_ = 0;
};

void emit(const CaptionTree& t, CaptionTokens& out) {
  if (t.is_leaf()) {
    out.push_back(t.radical());
    return;
  }
  out.emplace_back(token_of(t.kind()));
  out.emplace_back(kOpenBrace);
  for (const auto& c : t.children()) emit(c, out);
  out.emplace_back(kCloseBrace);
}

}  // namespace

CaptionTree parse(const CaptionTokens& tokens, const Vocabulary& vocab) {
  return Parser(tokens, vocab).run();
}

CaptionTokens serialize(const CaptionTree& tree) {
  CaptionTokens out;
  emit(tree, out);
  return out;
}

bool is_grammatical(const CaptionTokens& tokens, const Vocabulary& vocab) {
  try {
    parse(tokens, vocab);
    return true;
  } catch (const CaptionError&) {
    return false;
  }
}

std::string to_string(const CaptionTokens& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

CaptionTokens split_tokens(std::string_view text) {
  CaptionTokens out;
  std::istringstream in{std::string(text)};
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

std::vector<int> encode(const CaptionTokens& tokens, const Vocabulary& vocab) {
  if (tokens.empty()) throw VocabularyError("cannot encode an empty caption");
  std::vector<int> out;
  out.reserve(tokens.size() + 1);
  for (const auto& t : tokens) out.push_back(vocab.index_of(t));
  out.push_back(Vocabulary::kEosIndex);
  return out;
}

CaptionTokens decode(std::span<const int> indices, const Vocabulary& vocab) {
  CaptionTokens out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] == Vocabulary::kEosIndex && i + 1 == indices.size()) break;
    out.push_back(vocab.token_at(indices[i]));
  }
  return out;
}

CoverageReport radical_coverage(const std::vector<CaptionTokens>& train,
                                const std::vector<CaptionTokens>& test,
                                const Vocabulary& vocab) {
  std::set<std::string> seen;
  for (const auto& c : train) {
    for (auto& leaf : parse(c, vocab).leaves()) seen.insert(std::move(leaf));
  }
  CoverageReport report;
  for (const auto& c : test) {
    for (auto& leaf : parse(c, vocab).leaves()) {
      if (!seen.count(leaf)) report.missing.insert(std::move(leaf));
    }
  }
  report.covered = report.missing.empty();
  return report;
}

}  // namespace radseq
