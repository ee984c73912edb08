#include "radseq/dataset.hpp"

#include <fstream>
#include <sstream>

namespace radseq {

nlohmann::json points_to_json(const RawTrajectory& t) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : t.points()) pts.push_back({p.x, p.y, p.stroke});
  return pts;
}

RawTrajectory points_from_json(const nlohmann::json& points) {
  if (!points.is_array()) throw DataError("\"points\" must be an array");
  std::vector<PenPoint> pts;
  pts.reserve(points.size());
  for (const auto& p : points) {
    if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() ||
        !p[2].is_number_integer()) {
      throw DataError("each point must be [x, y, stroke]");
    }
    pts.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<int>()});
  }
  try {
    return RawTrajectory(std::move(pts));
  } catch (const TrajectoryError& e) {
    throw DataError(e.what());
  }
}

nlohmann::json to_json(const Sample& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["class"] = s.class_name;
  j["points"] = points_to_json(s.trajectory);
  j["caption"] = s.caption;
  return j;
}

Sample sample_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("record must be a JSON object");
  for (const char* key : {"id", "class", "points", "caption"}) {
    if (!j.contains(key)) throw DataError(std::string("record lacks \"") + key + "\"");
  }
  Sample s;
  try {
    s.id = j.at("id").get<std::string>();
    s.class_name = j.at("class").get<std::string>();
    s.caption = j.at("caption").get<CaptionTokens>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(e.what());
  }
  s.trajectory = points_from_json(j.at("points"));
  return s;
}

std::vector<Sample> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sample_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string to_jsonl(const std::vector<Sample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write dataset " + path.string());
  out << to_jsonl(samples);
}

void check_captions(const std::vector<Sample>& samples, const Vocabulary& vocab) {
  for (const auto& s : samples) {
    try {
      parse(s.caption, vocab);
    } catch (const CaptionError& e) {
      throw DataError("sample " + s.id + ": " + e.what());
    }
  }
}

}  // namespace radseq
