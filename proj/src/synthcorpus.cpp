#include "radseq/synthcorpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace radseq::synth {

namespace detail {
extern const char* const kBuiltinRadicalsJson;
}

std::vector<RadicalTemplate> parse_templates(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("radicals") || !j["radicals"].is_array()) {
    throw SynthError("template file must hold a \"radicals\" array");
  }
  std::vector<RadicalTemplate> out;
  std::set<std::string> ids;
  for (const auto& r : j["radicals"]) {
    RadicalTemplate t;
    t.id = r.at("id").get<std::string>();
    if (!ids.insert(t.id).second) throw SynthError("duplicate template " + t.id);
    for (const auto& s : r.at("strokes")) {
      Polyline line;
      for (const auto& p : s) {
        const Point2 q{p.at(0).get<double>(), p.at(1).get<double>()};
        if (q.x < 0.0 || q.x > 1.0 || q.y < 0.0 || q.y > 1.0) {
          throw SynthError("template " + t.id + " leaves the unit box");
        }
        line.push_back(q);
      }
      if (line.empty()) throw SynthError("template " + t.id + " has an empty stroke");
      t.strokes.push_back(std::move(line));
    }
    if (t.strokes.empty()) throw SynthError("template " + t.id + " has no strokes");
    out.push_back(std::move(t));
  }
  return out;
}

const std::vector<RadicalTemplate>& builtin_templates() {
  static const std::vector<RadicalTemplate> templates =
      parse_templates(nlohmann::json::parse(detail::kBuiltinRadicalsJson));
  return templates;
}

TemplateMap index_templates(const std::vector<RadicalTemplate>& templates) {
  TemplateMap m;
  for (const auto& t : templates) m.emplace(t.id, t);
  return m;
}

Box Box::sub(const Box& inner) const {
  const Point2 a = place({inner.x0, inner.y0});
  const Point2 b = place({inner.x1, inner.y1});
  return {a.x, a.y, b.x, b.y};
}

std::vector<Box> layout(StructureKind kind, std::size_t children) {
  constexpr double gap = 0.04;
  const bool variadic = is_variadic(kind);
  if (variadic ? children < 2 : children != 2) {
    throw SynthError("structure " + std::string(token_of(kind)) + " cannot hold " +
                     std::to_string(children) + " children");
  }
  std::vector<Box> boxes;
  if (variadic) {
    const double n = static_cast<double>(children);
    const double w = (1.0 - gap * (n - 1.0)) / n;
    for (std::size_t i = 0; i < children; ++i) {
      const double lo = static_cast<double>(i) * (w + gap);
      const double hi = i + 1 == children ? 1.0 : lo + w;
      if (kind == StructureKind::LeftRight) boxes.push_back({lo, 0.0, hi, 1.0});
      else boxes.push_back({0.0, lo, 1.0, hi});
    }
    return boxes;
  }
  boxes.push_back({0.0, 0.0, 1.0, 1.0});
  switch (kind) {
    case StructureKind::TopLeftSurround: boxes.push_back({0.4, 0.4, 0.95, 0.95}); break;
    case StructureKind::TopRightSurround: boxes.push_back({0.05, 0.4, 0.6, 0.95}); break;
    case StructureKind::BottomLeftSurround: boxes.push_back({0.4, 0.05, 0.95, 0.6}); break;
    case StructureKind::LeftSurround: boxes.push_back({0.4, 0.2, 0.95, 0.8}); break;
    case StructureKind::BottomSurround: boxes.push_back({0.2, 0.05, 0.8, 0.6}); break;
    case StructureKind::TopSurround: boxes.push_back({0.2, 0.4, 0.8, 0.95}); break;
    case StructureKind::Surround: boxes.push_back({0.25, 0.25, 0.75, 0.75}); break;
    case StructureKind::Within: boxes.push_back({0.3, 0.3, 0.7, 0.7}); break;
    default: throw SynthError("no layout rule");
  }
  return boxes;
}

namespace {

void densify(const Polyline& line, int stroke, std::vector<PenPoint>& out) {
  out.push_back({line.front().x, line.front().y, stroke});
  for (std::size_t i = 1; i < line.size(); ++i) {
    const Point2 a = line[i - 1], b = line[i];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / kPenSpacing)));
    for (std::size_t k = 1; k <= n; ++k) {
      const double u = static_cast<double>(k) / static_cast<double>(n);
      out.push_back({a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), stroke});
    }
  }
}

const RadicalTemplate& find_template(const TemplateMap& templates, const std::string& id) {
  auto it = templates.find(id);
  if (it == templates.end()) throw SynthError("no template for radical " + id);
  return it->second;
}

void place(const CaptionTree& tree, const Box& box, const TemplateMap& templates, int& stroke,
           std::vector<PenPoint>& out) {
  if (tree.is_leaf()) {
    for (const auto& s : find_template(templates, tree.radical()).strokes) {
      Polyline placed;
      for (const auto& p : s) placed.push_back(box.place(p));
      densify(placed, ++stroke, out);
    }
    return;
  }
  const auto boxes = layout(tree.kind(), tree.children().size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    place(tree.children()[i], box.sub(boxes[i]), templates, stroke, out);
  }
}

void count_strokes(const CaptionTree& tree, const TemplateMap& templates, int& stroke,
                   std::vector<std::pair<int, int>>& out) {
  if (tree.is_leaf()) {
    const int n = static_cast<int>(find_template(templates, tree.radical()).strokes.size());
    out.emplace_back(stroke + 1, stroke + n);
    stroke += n;
    return;
  }
  for (const auto& c : tree.children()) count_strokes(c, templates, stroke, out);
}

}  // namespace

RawTrajectory compose(const CaptionTree& tree, const TemplateMap& templates) {
  std::vector<PenPoint> pts;
  int stroke = 0;
  place(tree, Box{}, templates, stroke, pts);
  return RawTrajectory(std::move(pts));
}

std::vector<std::pair<int, int>> leaf_stroke_ranges(const CaptionTree& tree, const TemplateMap& templates) {
  std::vector<std::pair<int, int>> out;
  int stroke = 0;
  count_strokes(tree, templates, stroke, out);
  return out;
}

namespace {

std::vector<PenPoint> rephase(const std::vector<PenPoint>& stroke, double phase) {
  if (stroke.size() < 3) return stroke;
  std::vector<double> cum(stroke.size(), 0.0);
  for (std::size_t i = 1; i < stroke.size(); ++i) {
    cum[i] = cum[i - 1] + std::hypot(stroke[i].x - stroke[i - 1].x, stroke[i].y - stroke[i - 1].y);
  }
  const double total = cum.back();
  if (total <= 0.0) return stroke;
  const double h = total / static_cast<double>(stroke.size() - 1);
  std::vector<PenPoint> out{stroke.front()};
  std::size_t seg = 1;
  for (double s = phase * h; s < total - 1e-9; s += h) {
    if (s <= 1e-9) continue;
    while (seg + 1 < stroke.size() && cum[seg] < s) ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double u = len > 0.0 ? (s - cum[seg - 1]) / len : 0.0;
    const auto& a = stroke[seg - 1];
    const auto& b = stroke[seg];
    out.push_back({a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), a.stroke});
  }
  out.push_back(stroke.back());
  return out;
}

}  // namespace

RawTrajectory jitter(const RawTrajectory& t, std::uint64_t seed, double strength) {
  if (strength < 0.0 || strength > 1.0) throw std::invalid_argument("jitter strength must be in [0, 1]");
  if (strength == 0.0) return t;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double theta = sym(rng) * strength * 10.0 * std::numbers::pi / 180.0;
  const double shear = sym(rng) * strength * 0.15;
  const double sx = 1.0 + sym(rng) * strength * 0.15;
  const double sy = 1.0 + sym(rng) * strength * 0.15;
  const double phase = unit(rng);

  const Bounds b = bounding_box(t);
  const double cx = 0.5 * (b.min_x + b.max_x), cy = 0.5 * (b.min_y + b.max_y);
  const double extent = std::max({b.max_x - b.min_x, b.max_y - b.min_y, 1e-12});
  std::normal_distribution<double> noise(0.0, 0.01 * strength * extent);
  const double c = std::cos(theta), s = std::sin(theta);

  std::vector<PenPoint> out;
  out.reserve(t.size());
  for (const auto& stroke : t.strokes()) {
    for (const auto& p : rephase(stroke, phase)) {
      const double x = (p.x - cx) * sx, y = (p.y - cy) * sy;
      const double xs = x + shear * y;
      const double xr = c * xs - s * y, yr = s * xs + c * y;
      out.push_back({cx + xr + noise(rng), cy + yr + noise(rng), p.stroke});
    }
  }
  return RawTrajectory(std::move(out));
}

Vocabulary corpus_vocabulary(std::size_t radicals) {
  const auto& templates = builtin_templates();
  if (radicals == 0 || radicals > templates.size()) {
    throw SynthError("need between 1 and " + std::to_string(templates.size()) + " radicals");
  }
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < radicals; ++i) ids.push_back(templates[i].id);
  return Vocabulary::with_radicals(ids);
}

namespace {

CaptionTree random_tree(std::size_t depth, const std::vector<StructureKind>& kinds,
                        std::vector<std::string>& pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick_kind(0, kinds.size() - 1);
  std::bernoulli_distribution nest(0.3);
  std::vector<CaptionTree> children;
  for (int i = 0; i < 2; ++i) {
    if (depth > 1 && nest(rng)) {
      children.push_back(random_tree(depth - 1, kinds, pool, rng));
    } else {
      if (pool.empty()) throw SynthError("not enough radicals for the requested depth");
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      const std::size_t k = pick(rng);
      children.push_back(CaptionTree::leaf(pool[k]));
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
    }
  }
  return CaptionTree::node(kinds[pick_kind(rng)], std::move(children));
}

ClassSpec make_class(CaptionTree tree) {
  ClassSpec c;
  c.caption = serialize(tree);
  c.name = to_string(c.caption);
  c.tree = std::move(tree);
  return c;
}

}  // namespace

std::vector<ClassSpec> sample_classes(const CorpusConfig& cfg, const Vocabulary& vocab) {
  if (cfg.structures.empty()) throw SynthError("no structures requested");
  if (cfg.depth == 0) throw SynthError("depth must be at least 1");
  const auto radicals = vocab.radicals();
  if (radicals.size() < 2) throw SynthError("need at least two radicals");
  std::mt19937_64 rng(cfg.seed);
  std::vector<ClassSpec> out;
  if (cfg.depth == 1) {
    std::vector<CaptionTree> all;
    for (auto kind : cfg.structures) {
      for (const auto& r1 : radicals) {
        for (const auto& r2 : radicals) {
          if (r1 == r2) continue;
          all.push_back(CaptionTree::node(kind, {CaptionTree::leaf(r1), CaptionTree::leaf(r2)}));
        }
      }
    }
    if (cfg.classes > all.size()) {
      throw SynthError("cannot draw " + std::to_string(cfg.classes) + " classes from " +
                       std::to_string(all.size()) + " distinct captions");
    }
    std::shuffle(all.begin(), all.end(), rng);
    for (std::size_t i = 0; i < cfg.classes; ++i) out.push_back(make_class(std::move(all[i])));
    return out;
  }
  std::set<std::string> seen;
  const std::size_t max_attempts = 1000 * cfg.classes + 1000;
  for (std::size_t attempt = 0; out.size() < cfg.classes; ++attempt) {
    if (attempt >= max_attempts) {
      throw SynthError("could not find " + std::to_string(cfg.classes) + " distinct captions");
    }
    std::vector<std::string> pool = radicals;
    ClassSpec c = make_class(random_tree(cfg.depth, cfg.structures, pool, rng));
    if (seen.insert(c.name).second) out.push_back(std::move(c));
  }
  return out;
}

std::uint64_t sample_seed(std::uint64_t corpus_seed, const std::string& class_name, std::uint64_t writer) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : class_name) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(corpus_seed) ^ h) ^ writer);
}

std::vector<Sample> generate_samples(const std::vector<ClassSpec>& classes, const SampleConfig& cfg,
                                     std::uint64_t corpus_seed, const TemplateMap& templates) {
  std::vector<Sample> out;
  out.reserve(classes.size() * cfg.per_class);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const RawTrajectory clean = compose(classes[c].tree, templates);
    for (std::size_t k = 0; k < cfg.per_class; ++k) {
      const std::uint64_t writer = cfg.writer_base + k;
      Sample s;
      s.id = cfg.prefix + "-" + std::to_string(c) + "-" + std::to_string(writer);
      s.class_name = classes[c].name;
      s.trajectory = jitter(clean, sample_seed(corpus_seed, classes[c].name, writer), cfg.strength);
      s.caption = classes[c].caption;
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

std::set<std::string> leaf_set(const ClassSpec& c) {
  const auto l = c.tree.leaves();
  return {l.begin(), l.end()};
}

}  // namespace

std::pair<std::vector<ClassSpec>, std::vector<ClassSpec>> split_zero_shot(
    const std::vector<ClassSpec>& classes, std::size_t holdout, std::uint64_t seed) {
  if (holdout >= classes.size()) throw SynthError("holdout must be smaller than the class count");
  std::map<std::string, std::size_t> uses;
  for (const auto& c : classes) {
    for (const auto& r : leaf_set(c)) ++uses[r];
  }
  std::vector<std::size_t> order(classes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> held(classes.size(), false);
  std::size_t n = 0;
  for (std::size_t i : order) {
    if (n == holdout) break;
    const auto leaves = leaf_set(classes[i]);
    if (std::all_of(leaves.begin(), leaves.end(), [&](const std::string& r) { return uses[r] > 1; })) {
      for (const auto& r : leaves) --uses[r];
      held[i] = true;
      ++n;
    }
  }
  if (n < holdout) throw SynthError("no feasible zero-shot split for holdout " + std::to_string(holdout));
  std::pair<std::vector<ClassSpec>, std::vector<ClassSpec>> out;
  for (std::size_t i = 0; i < classes.size(); ++i) (held[i] ? out.second : out.first).push_back(classes[i]);
  return out;
}

std::pair<std::vector<ClassSpec>, std::size_t> covering_order(const std::vector<ClassSpec>& classes,
                                                              const std::vector<ClassSpec>& must_cover,
                                                              std::uint64_t seed) {
  std::set<std::string> needed;
  for (const auto& c : must_cover) {
    for (const auto& r : leaf_set(c)) needed.insert(r);
  }
  std::vector<ClassSpec> rest = classes;
  std::mt19937_64 rng(seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  std::vector<ClassSpec> out;
  while (!needed.empty()) {
    std::size_t best = rest.size(), best_gain = 0;
    for (std::size_t i = 0; i < rest.size(); ++i) {
      std::size_t gain = 0;
      for (const auto& r : leaf_set(rest[i])) gain += needed.count(r);
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    if (best == rest.size()) throw SynthError("classes do not cover the required radicals");
    for (const auto& r : leaf_set(rest[best])) needed.erase(r);
    out.push_back(std::move(rest[best]));
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(best));
  }
  const std::size_t prefix = out.size();
  for (auto& c : rest) out.push_back(std::move(c));
  return {std::move(out), prefix};
}

std::vector<CaptionTokens> captions_of(const std::vector<ClassSpec>& classes) {
  std::vector<CaptionTokens> out;
  for (const auto& c : classes) out.push_back(c.caption);
  return out;
}

nlohmann::json classes_to_json(const std::vector<ClassSpec>& classes) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : classes) j.push_back({{"name", c.name}, {"caption", c.caption}});
  return j;
}

}  // namespace radseq::synth
