#pragma once

#include "radseq/caption.hpp"
#include "radseq/dataset.hpp"
#include "radseq/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace radseq::synth {

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

using Polyline = std::vector<Point2>;

/// Glyph in the unit box, y pointing down; strokes in writing order.
struct RadicalTemplate {
  std::string id;
  std::vector<Polyline> strokes;
};

/// Shipped templates (r01, r02, ...).
const std::vector<RadicalTemplate>& builtin_templates();
std::vector<RadicalTemplate> parse_templates(const nlohmann::json& j);

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  /// Maps unit-box coordinates into this box.
  Point2 place(Point2 p) const { return {x0 + p.x * (x1 - x0), y0 + p.y * (y1 - y0)}; }
  Box sub(const Box& inner) const;
};

/// Child boxes, relative to the parent's unit box, for `children` children of `kind`.
std::vector<Box> layout(StructureKind kind, std::size_t children);

using TemplateMap = std::map<std::string, RadicalTemplate>;
TemplateMap index_templates(const std::vector<RadicalTemplate>& templates);

/// Points along each placed stroke at most this far apart (unit-box units).
inline constexpr double kPenSpacing = 0.02;

/// Places leaf templates recursively and emits their strokes in pre-order leaf order.
RawTrajectory compose(const CaptionTree& tree, const TemplateMap& templates);

/// Per-leaf stroke ranges of a composed trajectory: leaf i owns stroke ids
/// [first, last], 1-based.
std::vector<std::pair<int, int>> leaf_stroke_ranges(const CaptionTree& tree, const TemplateMap& templates);

/// Seeded writer variation: rotation up to 10 deg * strength, shear, anisotropic
/// scale up to 15% * strength, Gaussian noise 0.01 * strength, arc-length
/// re-phasing. strength 0 returns the input unchanged.
RawTrajectory jitter(const RawTrajectory& t, std::uint64_t seed, double strength);

struct ClassSpec {
  std::string name;
  CaptionTree tree;
  CaptionTokens caption;
};

struct CorpusConfig {
  std::size_t radicals = 20;
  std::vector<StructureKind> structures = {StructureKind::LeftRight, StructureKind::TopBottom};
  std::size_t classes = 150;
  std::uint64_t seed = 1;
  /// 1 gives kind{r1 r2}; larger values let children be subtrees.
  std::size_t depth = 1;
};

/// Distinct caption classes sampled without replacement.
std::vector<ClassSpec> sample_classes(const CorpusConfig& cfg, const Vocabulary& vocab);

Vocabulary corpus_vocabulary(std::size_t radicals);

struct SampleConfig {
  std::size_t per_class = 20;
  double strength = 0.5;
  /// First writer index; train and test use disjoint ranges.
  std::uint64_t writer_base = 0;
  std::string prefix = "s";
};

/// Writer seed for one (class, writer) pair; a pure function of its arguments.
std::uint64_t sample_seed(std::uint64_t corpus_seed, const std::string& class_name, std::uint64_t writer);

std::vector<Sample> generate_samples(const std::vector<ClassSpec>& classes, const SampleConfig& cfg,
                                     std::uint64_t corpus_seed, const TemplateMap& templates);

inline constexpr std::uint64_t kTestWriterBase = 1'000'000;

/// Splits classes so every radical of a held-out class appears in some kept class.
/// Returns (kept, held_out), each in input order.
std::pair<std::vector<ClassSpec>, std::vector<ClassSpec>> split_zero_shot(
    const std::vector<ClassSpec>& classes, std::size_t holdout, std::uint64_t seed);

/// Reorders `classes` so that a greedily chosen prefix covers every radical in
/// `must_cover`; the rest follow in shuffled order. Prefixes of the
/// result give nested training subsets. Returns the covering prefix length too.
std::pair<std::vector<ClassSpec>, std::size_t> covering_order(const std::vector<ClassSpec>& classes,
                                                              const std::vector<ClassSpec>& must_cover,
                                                              std::uint64_t seed);

std::vector<CaptionTokens> captions_of(const std::vector<ClassSpec>& classes);

nlohmann::json classes_to_json(const std::vector<ClassSpec>& classes);

}  // namespace radseq::synth
