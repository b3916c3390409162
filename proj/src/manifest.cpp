#include "mdaircomp/manifest.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace mdaircomp {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

namespace {

std::string join(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    if (fields[i].find_first_of(",\"\n") != std::string::npos)
      throw std::invalid_argument("CSV field needs quoting: " + fields[i]);
    line += fields[i];
  }
  return line;
}

}  // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : path_(path), columns_(header.size()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  const std::string head = join(header);
  if (!fresh) {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    if (first != head)
      throw std::runtime_error("existing CSV " + path.string() + " has a different header");
  }
  out_.open(path, std::ios::app);
  if (!out_) throw std::runtime_error("cannot open " + path.string());
  if (fresh) out_ << head << '\n' << std::flush;
}

void CsvWriter::write_row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_)
    throw std::invalid_argument("CSV row has " + std::to_string(fields.size()) +
                                " fields, header has " + std::to_string(columns_));
  std::lock_guard lock(mu_);
  out_ << join(fields) << '\n' << std::flush;
}

std::string build_git_describe() {
#ifdef MDAIRCOMP_GIT_DESCRIBE
  return MDAIRCOMP_GIT_DESCRIBE;
#else
  return "unknown";
#endif
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["git_describe"] = git_describe;
  j["master_seed"] = master_seed;
  j["config"] = config;
  j["seeds"] = seeds;
  j["outputs"] = outputs;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.git_describe = j.at("git_describe").get<std::string>();
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.config = j.at("config");
  m.seeds = j.at("seeds");
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  return m;
}

std::string RunManifest::dump() const { return to_json().dump(2) + "\n"; }

RunManifest RunManifest::parse(const std::string& text) {
  return from_json(nlohmann::json::parse(text));
}

void RunManifest::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << dump();
}

}  // namespace mdaircomp
