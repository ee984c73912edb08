#include "radseq/inference.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace radseq {

EncodedInput encode_features(const Model& model, const FeatureSequence& features) {
  if (features.rows.empty()) throw std::invalid_argument("cannot encode an empty sequence");
  const FeatureSequence* one[] = {&features};
  SequenceBatch batch = SequenceBatch::from_features(one);
  num::Graph g(false);
  Annotations a = encode(g, model.encoder(), batch);
  const auto L = static_cast<Eigen::Index>(a.lengths.front());
  EncodedInput out;
  out.annotations = a.values.mat().topRows(L);
  out.projected = out.annotations * model.decoder().attention.u_att->value.mat();
  out.points = features.rows.size();
  return out;
}

namespace {

struct LiveHyp {
  std::vector<int> tokens;
  double log_prob = 0.0;
  std::vector<std::vector<double>> attention;
};

struct Candidate {
  std::size_t parent;
  int token;
  double score;
};

double rank_score(const std::vector<int>& tokens, double log_prob, bool normalize) {
  if (!normalize || tokens.empty()) return log_prob;
  return log_prob / static_cast<double>(tokens.size());
}

bool better(const Hypothesis& a, const Hypothesis& b, bool normalize) {
  const double sa = rank_score(a.tokens, a.log_prob, normalize);
  const double sb = rank_score(b.tokens, b.log_prob, normalize);
  if (sa != sb) return sa > sb;
  return a.tokens < b.tokens;
}

std::vector<double> row_of(const num::Matrix& m, Eigen::Index r) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
  return v;
}

class ModelScorer : public StepScorer {
 public:
  ModelScorer(const Model& model, const EncodedInput& input)
      : dp_(model.decoder()), input_(input), frames_(static_cast<std::size_t>(input.annotations.rows())) {
    num::Graph g(false);
    BoundDecoder dec = BoundDecoder::bind(g, dp_);
    AttentionContext ctx = replicate_context(g, input_.annotations, input_.projected, frames_, 1);
    states_ = init_state(dec, ctx).mat();
    coverage_ = num::Matrix::Zero(1, static_cast<Eigen::Index>(frames_));
  }

  num::Matrix scores(const std::vector<std::vector<int>>& prefixes) override {
    const std::size_t H = prefixes.size();
    num::Graph g(false);
    BoundDecoder dec = BoundDecoder::bind(g, dp_);
    AttentionContext ctx = replicate_context(g, input_.annotations, input_.projected, frames_, H);
    std::vector<int> prev(H);
    for (std::size_t h = 0; h < H; ++h) {
      prev[h] = prefixes[h].empty() ? Vocabulary::kSosIndex : prefixes[h].back();
    }
    DecoderStep step = decode_step(dec, ctx, prev, g.constant(states_), g.constant(coverage_));
    states_ = step.state.mat();
    coverage_ = step.coverage.mat();
    alpha_ = step.alpha.mat();
    return step.log_probs.mat();
  }

  void reorder(std::span<const std::size_t> parents) override {
    num::Matrix s(static_cast<Eigen::Index>(parents.size()), states_.cols());
    num::Matrix c(static_cast<Eigen::Index>(parents.size()), coverage_.cols());
    for (std::size_t i = 0; i < parents.size(); ++i) {
      s.row(static_cast<Eigen::Index>(i)) = states_.row(static_cast<Eigen::Index>(parents[i]));
      c.row(static_cast<Eigen::Index>(i)) = coverage_.row(static_cast<Eigen::Index>(parents[i]));
    }
    states_ = std::move(s);
    coverage_ = std::move(c);
  }

  std::vector<double> attention(std::size_t row) const override {
    return row_of(alpha_, static_cast<Eigen::Index>(row));
  }

 private:
  const DecoderParams& dp_;
  const EncodedInput& input_;
  std::size_t frames_;
  num::Matrix states_, coverage_, alpha_;
};

}  // namespace

std::vector<Hypothesis> beam_search(StepScorer& scorer, const BeamConfig& cfg) {
  if (cfg.beam == 0) throw std::invalid_argument("beam width must be positive");
  if (cfg.max_len == 0) throw std::invalid_argument("max_len must be positive");
  const int eos = Vocabulary::kEosIndex;

  std::vector<LiveHyp> live(1);
  std::vector<Hypothesis> finished;
  for (std::size_t t = 0; t < cfg.max_len && !live.empty(); ++t) {
    const std::size_t H = live.size();
    std::vector<std::vector<int>> prefixes;
    prefixes.reserve(H);
    for (const auto& l : live) prefixes.push_back(l.tokens);
    const num::Matrix lp = scorer.scores(prefixes);
    if (static_cast<std::size_t>(lp.rows()) != H || lp.cols() <= eos) {
      throw std::logic_error("scorer returned a score matrix of the wrong shape");
    }

    std::vector<Candidate> cands;
    cands.reserve(H * static_cast<std::size_t>(lp.cols()));
    for (std::size_t h = 0; h < H; ++h) {
      for (Eigen::Index k = 0; k < lp.cols(); ++k) {
        cands.push_back({h, static_cast<int>(k), live[h].log_prob + lp(static_cast<Eigen::Index>(h), k)});
      }
    }
    // Ties resolve by the token sequence.
    std::stable_sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) {
        return live[a.parent].tokens < live[b.parent].tokens;
      }
      return a.token < b.token;
    });
    if (cands.size() > cfg.beam) cands.resize(cfg.beam);

    std::vector<LiveHyp> next;
    std::vector<std::size_t> parents;
    for (const auto& c : cands) {
      auto tokens = live[c.parent].tokens;
      tokens.push_back(c.token);
      auto attention = live[c.parent].attention;
      attention.push_back(scorer.attention(c.parent));
      if (c.token == eos) {
        finished.push_back({std::move(tokens), c.score, true, std::move(attention)});
        continue;
      }
      next.push_back({std::move(tokens), c.score, std::move(attention)});
      parents.push_back(c.parent);
    }
    live = std::move(next);
    scorer.reorder(parents);

    if (!finished.empty() && !cfg.length_normalize) {
      // Log-probs only decrease, so no live extension can overtake this.
      double best_done = -std::numeric_limits<double>::infinity();
      for (const auto& f : finished) best_done = std::max(best_done, f.log_prob);
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& l : live) best_live = std::max(best_live, l.log_prob);
      if (best_done >= best_live) break;
    }
  }

  const bool norm = cfg.length_normalize;
  if (finished.empty()) {
    for (auto& l : live) {
      Hypothesis h;
      h.tokens = std::move(l.tokens);
      h.log_prob = l.log_prob;
      h.finished = false;
      h.attention = std::move(l.attention);
      finished.push_back(std::move(h));
    }
  }
  std::sort(finished.begin(), finished.end(),
            [&](const Hypothesis& a, const Hypothesis& b) { return better(a, b, norm); });
  return finished;
}

std::vector<Hypothesis> beam_search(const Model& model, const EncodedInput& input,
                                    const BeamConfig& cfg) {
  ModelScorer scorer(model, input);
  return beam_search(scorer, cfg);
}

double score_sequence(const Model& model, const EncodedInput& input, const std::vector<int>& tokens) {
  const auto& dp = model.decoder();
  const std::size_t L = static_cast<std::size_t>(input.annotations.rows());
  num::Graph g(false);
  BoundDecoder dec = BoundDecoder::bind(g, dp);
  AttentionContext ctx = replicate_context(g, input.annotations, input.projected, L, 1);
  num::Var state = init_state(dec, ctx);
  num::Var coverage = zero_coverage(g, ctx);
  int prev = Vocabulary::kSosIndex;
  double total = 0.0;
  for (int tok : tokens) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= dp.vocab_size) {
      throw std::out_of_range("token index " + std::to_string(tok) + " out of range");
    }
    const int p[] = {prev};
    DecoderStep step = decode_step(dec, ctx, p, state, coverage);
    total += step.log_probs.mat()(0, tok);
    state = step.state;
    coverage = step.coverage;
    prev = tok;
  }
  return total;
}

RecognitionResult to_result(const Model& model, const Hypothesis& h, const EncodedInput& input) {
  const auto& vocab = model.vocab();
  RecognitionResult r;
  r.caption = decode(h.tokens, vocab);
  for (int t : h.tokens) r.steps.push_back(vocab.token_at(t));
  r.truncated = !h.finished;
  r.score = h.log_prob;
  r.attention = h.attention;
  r.frames = static_cast<std::size_t>(input.annotations.rows());
  r.points = input.points;
  try {
    r.tree = parse(r.caption, vocab);
    r.grammatical = true;
  } catch (const CaptionError&) {
    r.grammatical = false;
  }
  return r;
}

RecognitionResult recognize(const Model& model, const RawTrajectory& raw, const BeamConfig& cfg) {
  const FeatureSequence features = preprocess(raw, model.config().resample_spacing);
  const EncodedInput input = encode_features(model, features);
  const auto hyps = beam_search(model, input, cfg);
  return to_result(model, hyps.front(), input);
}

namespace {

nlohmann::json tree_to_json(const CaptionTree& t) {
  if (t.is_leaf()) return {{"radical", t.radical()}};
  nlohmann::json children = nlohmann::json::array();
  for (const auto& c : t.children()) children.push_back(tree_to_json(c));
  return {{"structure", std::string(token_of(t.kind()))}, {"children", std::move(children)}};
}

double six_digits(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return std::strtod(buf, nullptr);
}

}  // namespace

nlohmann::json to_json(const RecognitionResult& r) {
  nlohmann::json j;
  j["caption"] = r.caption;
  j["text"] = to_string(r.caption);
  j["tree"] = r.tree ? tree_to_json(*r.tree) : nlohmann::json(nullptr);
  j["steps"] = r.steps;
  j["score"] = r.score;
  j["grammatical"] = r.grammatical;
  j["truncated"] = r.truncated;
  j["frames"] = r.frames;
  j["points"] = r.points;
  nlohmann::json att = nlohmann::json::array();
  for (const auto& row : r.attention) {
    nlohmann::json jr = nlohmann::json::array();
    for (double v : row) jr.push_back(six_digits(v));
    att.push_back(std::move(jr));
  }
  j["attention"] = std::move(att);
  return j;
}

// ----------------------------------------------------------------------------
// Rendering

namespace {

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void stamp(GrayImage& img, double x, double y, std::uint8_t v, int radius) {
  const int cx = static_cast<int>(std::lround(x));
  const int cy = static_cast<int>(std::lround(y));
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy > radius * radius) continue;
      const int px = cx + dx, py = cy + dy;
      if (px < 0 || py < 0 || px >= static_cast<int>(img.width) || py >= static_cast<int>(img.height))
        continue;
      auto& p = img.pixels[static_cast<std::size_t>(py) * img.width + static_cast<std::size_t>(px)];
      p = std::max(p, v);
    }
  }
}

std::uint8_t level(double intensity) {
  return static_cast<std::uint8_t>(std::lround(60.0 + 195.0 * std::clamp(intensity, 0.0, 1.0)));
}

}  // namespace

AttentionRender render_attention(const RawTrajectory& raw, const RecognitionResult& result,
                                 std::size_t step, double spacing, std::size_t size) {
  if (step >= result.attention.size()) {
    throw std::out_of_range("step " + std::to_string(step) + " beyond " +
                            std::to_string(result.attention.size()) + " decoded steps");
  }
  if (size < 16) throw std::invalid_argument("render size too small");
  const RawTrajectory pts = prepare(raw, spacing);
  const auto& row = result.attention[step];
  double peak = 0.0;
  for (double v : row) peak = std::max(peak, v);

  AttentionRender out;
  out.symbol = result.steps.at(step);
  out.point_intensity.resize(pts.size(), 0.0);
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const std::size_t f = frame_of_point(j + 1);
    if (f == 0 || f > row.size() || peak <= 0.0) continue;
    out.point_intensity[j] = row[f - 1] / peak;
  }

  const double margin = 0.08 * static_cast<double>(size);
  const double span = static_cast<double>(size) - 2.0 * margin;
  auto px = [&](const PenPoint& p) { return margin + (p.x + 0.5) * span; };
  auto py = [&](const PenPoint& p) { return margin + (p.y + 0.5) * span; };

  out.raster.width = size;
  out.raster.height = size;
  out.raster.pixels.assign(size * size, 0);
  const int radius = std::max(1, static_cast<int>(size / 128));
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const std::uint8_t v = level(out.point_intensity[j]);
    stamp(out.raster, px(pts[j]), py(pts[j]), v, radius);
    if (j + 1 < pts.size() && pts[j + 1].stroke == pts[j].stroke) {
      const double x0 = px(pts[j]), y0 = py(pts[j]);
      const double x1 = px(pts[j + 1]), y1 = py(pts[j + 1]);
      const int n = static_cast<int>(std::ceil(std::hypot(x1 - x0, y1 - y0)));
      for (int k = 1; k < n; ++k) {
        const double u = static_cast<double>(k) / n;
        stamp(out.raster, x0 + u * (x1 - x0), y0 + u * (y1 - y0), v, radius);
      }
    }
  }

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"black\"/>\n";
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const int red = level(out.point_intensity[j]);
    const int other = static_cast<int>(std::lround(40.0 * out.point_intensity[j]));
    char color[32];
    std::snprintf(color, sizeof color, "rgb(%d,%d,%d)", red, other, other);
    if (j + 1 < pts.size() && pts[j + 1].stroke == pts[j].stroke) {
      svg << "<line x1=\"" << px(pts[j]) << "\" y1=\"" << py(pts[j]) << "\" x2=\""
          << px(pts[j + 1]) << "\" y2=\"" << py(pts[j + 1]) << "\" stroke=\"" << color
          << "\" stroke-width=\"3\" stroke-linecap=\"round\"/>\n";
    }
    svg << "<circle cx=\"" << px(pts[j]) << "\" cy=\"" << py(pts[j]) << "\" r=\"2\" fill=\""
        << color << "\"/>\n";
  }
  svg << "<text x=\"6\" y=\"" << size - 6 << "\" fill=\"white\" font-size=\"14\">" << xml_escape(out.symbol)
      << "</text>\n</svg>\n";
  out.svg = svg.str();
  return out;
}

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

}  // namespace

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  if (img.width == 0 || img.height == 0 || img.pixels.size() != img.width * img.height) {
    throw std::invalid_argument("invalid image dimensions");
  }
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("cannot allocate png writer");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png encoding failed");
  }
  png_set_write_fn(png, &out, append_bytes, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < img.height; ++y) {
    png_write_row(png, img.pixels.data() + y * img.width);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace radseq
