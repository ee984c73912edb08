#pragma once

#include "radseq/caption.hpp"
#include "radseq/trajectory.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace radseq {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One dataset record: {"id", "class", "points": [[x, y, stroke], ...], "caption": [...]}.
struct Sample {
  std::string id;
  std::string class_name;
  RawTrajectory trajectory;
  CaptionTokens caption;
};

nlohmann::json to_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j);

/// Accepts [[x, y, stroke], ...].
RawTrajectory points_from_json(const nlohmann::json& points);
nlohmann::json points_to_json(const RawTrajectory& t);

/// Throws DataError naming the line on malformed input.
std::vector<Sample> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::string to_jsonl(const std::vector<Sample>& samples);

/// Throws DataError if any caption fails to parse or uses tokens outside `vocab`.
void check_captions(const std::vector<Sample>& samples, const Vocabulary& vocab);

}  // namespace radseq
