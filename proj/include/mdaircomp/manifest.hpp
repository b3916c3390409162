#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace mdaircomp {

/// Shortest text that parses back to the same double ("nan", "inf", "-inf"
/// for non-finite values).
std::string format_double(double v);

/// Append-only CSV sink. The header is written only when the file is new or
/// empty; an existing file must carry the same header. Rows are flushed as
/// they are written, so a failed run keeps everything emitted before it.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

  void write_row(const std::vector<std::string>& fields);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::size_t columns_;
  std::ofstream out_;
  std::mutex mu_;
};

/// Output of `git describe --always --dirty` captured at configure time.
std::string build_git_describe();

/// Run description written next to every CSV: the command, its resolved
/// configuration, the master seed and every derived seed that matters.
struct RunManifest {
  std::string command;
  std::string git_describe;
  std::uint64_t master_seed = 0;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  std::vector<std::string> outputs;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  /// Pretty-printed with two-space indent and sorted keys, newline-terminated.
  std::string dump() const;
  static RunManifest parse(const std::string& text);
  void write(const std::filesystem::path& path) const;
};

}  // namespace mdaircomp
