#pragma once

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

namespace hwnas::cli {

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int jobs = 1;
  std::string config;
  std::string command;  // full argv, recorded in the manifest
};

// 64-bit FNV-1a as 16 hex digits. Only used to fingerprint files in manifests.
[[nodiscard]] std::string fnv1a_hex(std::string_view bytes);

[[nodiscard]] std::string read_file(const std::filesystem::path& p, std::string_view what);
[[nodiscard]] nlohmann::json read_json(const std::filesystem::path& p, std::string_view what);

// One output directory: fixed filenames plus manifest.json on finish().
class Run {
 public:
  Run(const Globals& g, std::string subcommand);

  [[nodiscard]] std::filesystem::path path(const std::string& name) const { return dir_ / name; }
  void write(const std::string& name, const std::string& content);
  // Writes a checkpoint and records its hash.
  void checkpoint(const std::string& name, const nlohmann::json& j);
  // Loads an input checkpoint and records its hash.
  nlohmann::json input(const std::string& role, const std::string& file);
  nlohmann::json& params() { return params_; }
  void finish();

 private:
  const Globals& g_;
  std::string subcommand_;
  std::filesystem::path dir_;
  nlohmann::json params_ = nlohmann::json::object();
  nlohmann::json checkpoints_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::object();
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results land by index,
// so output order never depends on scheduling.
template <class T>
std::vector<T> parallel_map(std::size_t n, int jobs, const std::function<T(std::size_t)>& fn) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  auto body = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += workers) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1 || n < 2) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) {
      pool.emplace_back(body, w);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  for (auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  return out;
}

}  // namespace hwnas::cli
