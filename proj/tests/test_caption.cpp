#include "radseq/caption.hpp"

#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace radseq;

namespace {

const Vocabulary& vocab() {
  static const Vocabulary v = Vocabulary::with_radicals({"r1", "r2", "r3", "r4", "r5", "r6"});
  return v;
}

CaptionTree random_tree(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> leaf(1, 6);
  std::bernoulli_distribution stop(depth <= 0 ? 1.0 : 0.35);
  if (stop(rng)) return CaptionTree::leaf("r" + std::to_string(leaf(rng)));
  const auto kinds = all_structure_kinds();
  const StructureKind k = kinds[std::uniform_int_distribution<std::size_t>(0, kinds.size() - 1)(rng)];
  std::size_t n = 2;
  if (is_variadic(k)) n = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
  std::vector<CaptionTree> children;
  for (std::size_t i = 0; i < n; ++i) children.push_back(random_tree(rng, depth - 1));
  return CaptionTree::node(k, std::move(children));
}

// Oracle serializer written against the grammar, not the library.
void emit(const CaptionTree& t, CaptionTokens& out) {
  if (t.is_leaf()) {
    out.push_back(t.radical());
    return;
  }
  out.emplace_back(token_of(t.kind()));
  out.emplace_back("{");
  for (const auto& c : t.children()) emit(c, out);
  out.emplace_back("}");
}

}  // namespace

TEST_CASE("structure tokens") {
  CHECK(all_structure_kinds().size() == 10);
  for (auto k : all_structure_kinds()) CHECK(structure_from_token(token_of(k)) == k);
  CHECK(!structure_from_token("r1"));
  CHECK(is_variadic(StructureKind::LeftRight));
  CHECK(!is_variadic(StructureKind::Surround));
}

TEST_CASE("vocabulary layout and file format") {
  const auto& v = vocab();
  CHECK(v.index_of("<sos>") == 0);
  CHECK(v.index_of("<eos>") == 1);
  CHECK(v.index_of("a") == 2);
  CHECK(v.index_of("w") == 11);
  CHECK(v.index_of("{") == 12);
  CHECK(v.index_of("}") == 13);
  CHECK(v.index_of("r1") == 14);
  CHECK(v.size() == 20);
  CHECK(v.is_radical("r3"));
  CHECK(!v.is_radical("stl"));
  CHECK(v.radicals().size() == 6);
  CHECK_THROWS_AS(Vocabulary({"<eos>", "<sos>"}), VocabularyError);
  CHECK_THROWS_AS(Vocabulary({"<sos>", "<eos>", "x", "x"}), VocabularyError);
  CHECK_THROWS_AS(Vocabulary::with_radicals({"a"}), VocabularyError);

  testing::TempDir dir("vocab");
  v.save(dir / "v.txt");
  const auto back = Vocabulary::load(dir / "v.txt");
  CHECK(back == v);
  CHECK(back.hash() == v.hash());
  CHECK(Vocabulary::parse_text(v.to_text()) == v);
  CHECK(Vocabulary::with_radicals({"r1"}).hash() != v.hash());
}

TEST_CASE("parse examples") {
  const auto& v = vocab();
  const auto stl = parse({"stl", "{", "r1", "r2", "}"}, v);
  CHECK(stl == CaptionTree::node(StructureKind::TopLeftSurround, {CaptionTree::leaf("r1"), CaptionTree::leaf("r2")}));
  CHECK(parse({"r1"}, v) == CaptionTree::leaf("r1"));
  const auto nested = parse({"d", "{", "r1", "a", "{", "r2", "r3", "}", "}"}, v);
  CHECK(nested ==
        CaptionTree::node(StructureKind::TopBottom,
                          {CaptionTree::leaf("r1"),
                           CaptionTree::node(StructureKind::LeftRight, {CaptionTree::leaf("r2"), CaptionTree::leaf("r3")})}));
  CHECK(parse({"a", "{", "r1", "r2", "r3", "}"}, v).children().size() == 3);
}

TEST_CASE("parse errors carry positions") {
  const auto& v = vocab();
  auto position_of = [&](const CaptionTokens& t) -> std::size_t {
    try {
      parse(t, v);
    } catch (const CaptionError& e) {
      return e.position();
    }
    FAIL("expected a CaptionError");
    return 0;
  };
  CHECK(position_of({}) == 0);
  CHECK(position_of({"a", "r1", "r2"}) == 1);                 // structure without "{"
  CHECK(position_of({"a", "{", "r1", "r2"}) == 1);            // "{" never closed
  CHECK(position_of({"a", "{", "r1", "r2", "}", "}"}) == 5);  // trailing token
  CHECK(position_of({"s", "{", "r1", "r2", "r3", "}"}) == 0); // arity, reported at the structure
  CHECK(position_of({"a", "{", "r1", "}"}) == 0);
  CHECK(position_of({"a", "{", "r1", "zz", "}"}) == 3);       // unknown token
  CHECK(position_of({"a", "{", "r1", "<eos>", "}"}) == 3);
  CHECK_THROWS_WITH_AS(parse({"a", "r1"}, v), doctest::Contains("at token 1"), CaptionError);
}

TEST_CASE("serialize examples") {
  CHECK(serialize(CaptionTree::leaf("r1")) == CaptionTokens{"r1"});
  CHECK(serialize(CaptionTree::node(StructureKind::LeftRight, {CaptionTree::leaf("r1"), CaptionTree::leaf("r2")})) ==
        CaptionTokens{"a", "{", "r1", "r2", "}"});
  CHECK_THROWS(CaptionTree::node(StructureKind::Within, {CaptionTree::leaf("r1")}));
  CHECK_THROWS(CaptionTree::node(StructureKind::LeftRight, {CaptionTree::leaf("r1")}));
}

TEST_CASE("random trees: round trip, token count law, prefix balance") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 300; ++i) {
    const auto t = random_tree(rng, 4);
    CaptionTokens want;
    emit(t, want);
    const auto tokens = serialize(t);
    REQUIRE(tokens == want);
    CHECK(parse(tokens, vocab()) == t);
    CHECK(tokens.size() == t.leaf_count() + 3 * t.internal_count());
    long depth = 0;
    for (const auto& tok : tokens) {
      depth += tok == "{" ? 1 : tok == "}" ? -1 : 0;
      CHECK(depth >= 0);
    }
    CHECK(depth == 0);
    CHECK(serialize(parse(tokens, vocab())) == tokens);
  }
}

TEST_CASE("brace mutations are rejected") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100; ++i) {
    CaptionTokens tokens;
    do tokens = serialize(random_tree(rng, 3));
    while (tokens.size() == 1);
    std::vector<std::size_t> braces;
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      if (tokens[k] == "{" || tokens[k] == "}") braces.push_back(k);
    }
    const std::size_t pick = braces[std::uniform_int_distribution<std::size_t>(0, braces.size() - 1)(rng)];
    switch (i % 3) {
      case 0: tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(pick)); break;
      case 1: tokens[pick] = tokens[pick] == "{" ? "}" : "{"; break;
      default: {
        const auto at = std::uniform_int_distribution<std::size_t>(0, tokens.size())(rng);
        tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at), i % 2 ? "{" : "}");
      }
    }
    try {
      parse(tokens, vocab());
      FAIL("mutated caption accepted: " << to_string(tokens));
    } catch (const CaptionError& e) {
      CHECK(e.position() <= tokens.size());
    }
    CHECK(!is_grammatical(tokens, vocab()));
  }
}

TEST_CASE("encode and decode") {
  const auto& v = vocab();
  CHECK(encode({"r1"}, v) == std::vector<int>{v.index_of("r1"), Vocabulary::kEosIndex});
  const CaptionTokens x{"a", "{", "r1", "r2", "}"};
  CHECK(decode(encode(x, v), v) == x);
  CHECK_THROWS(encode({}, v));
  CHECK_THROWS(encode({"nope"}, v));
  CHECK_THROWS(decode(std::vector<int>{999}, v));
}

TEST_CASE("radical coverage") {
  const auto& v = vocab();
  const CaptionTokens a12{"a", "{", "r1", "r2", "}"};
  const CaptionTokens d12{"d", "{", "r1", "r2", "}"};
  const CaptionTokens a13{"a", "{", "r1", "r3", "}"};
  CHECK(radical_coverage({a12}, {d12}, v).covered);
  const auto r = radical_coverage({a12}, {a13}, v);
  CHECK(!r.covered);
  CHECK(r.missing == std::set<std::string>{"r3"});
  CHECK(radical_coverage({a12}, {}, v).covered);
}

TEST_CASE("text helpers") {
  CHECK(split_tokens("  a {  r1 r2 } ") == CaptionTokens{"a", "{", "r1", "r2", "}"});
  CHECK(to_string({"a", "{", "r1", "r2", "}"}) == "a { r1 r2 }");
}
