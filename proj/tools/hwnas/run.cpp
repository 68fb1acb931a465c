#include "run.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hwnas/error.hpp"

#ifndef HWNAS_VERSION
#define HWNAS_VERSION "dev"
#endif

namespace hwnas::cli {

namespace fs = std::filesystem;

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const fs::path& p, std::string_view what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    throw ValidationError("missing " + std::string(what) + ": cannot open " + p.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p, std::string_view what) {
  const auto text = read_file(p, what);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("malformed " + std::string(what) + " " + p.string() + ": " + e.what());
  }
}

Run::Run(const Globals& g, std::string subcommand) : g_(g), subcommand_(std::move(subcommand)), dir_(g.out_dir) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) {
    throw ValidationError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }
}

void Run::write(const std::string& name, const std::string& content) {
  std::ofstream out(path(name), std::ios::binary);
  out << content;
  if (!out) {
    throw ValidationError("cannot write " + path(name).string());
  }
}

void Run::checkpoint(const std::string& name, const nlohmann::json& j) {
  const auto text = j.dump() + "\n";
  write(name, text);
  checkpoints_[name] = fnv1a_hex(text);
}

nlohmann::json Run::input(const std::string& role, const std::string& file) {
  if (file.empty()) {
    throw ValidationError("missing " + role + " checkpoint: pass --" + role);
  }
  const auto text = read_file(file, role + " checkpoint");
  inputs_[role] = {{"path", file}, {"fnv1a", fnv1a_hex(text)}};
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("malformed " + role + " checkpoint " + file + ": " + e.what());
  }
}

void Run::finish() {
  nlohmann::json m;
  m["tool_version"] = HWNAS_VERSION;
  m["command"] = g_.command;
  m["subcommand"] = subcommand_;
  m["seed"] = g_.seed;
  m["jobs"] = g_.jobs;
  m["config_file"] = g_.config;
  m["config_hash"] = g_.config.empty() ? "" : fnv1a_hex(read_file(g_.config, "config file"));
  m["parameters"] = params_;
  m["checkpoints"] = checkpoints_;
  m["inputs"] = inputs_;
  m["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  write("manifest.json", m.dump(2) + "\n");
}

}  // namespace hwnas::cli
