#ifndef TACTILE_HAND_MANIFEST_HPP_
#define TACTILE_HAND_MANIFEST_HPP_

// Run manifest: the command, the resolved configuration and the seed,
// written to <run dir>/manifest.ini before a command computes anything.
// The file is itself a valid --config input; [run] holds the bookkeeping
// and every other section is the snapshot.

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include "tactile_hand/config.hpp"

#ifndef TACTILE_HAND_VERSION
#define TACTILE_HAND_VERSION "unknown"
#endif

namespace tactile_hand {

inline std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string command;
  Config config;
  std::uint64_t seed = 0;
  std::string version = TACTILE_HAND_VERSION;
  std::string started;
  std::string finished;
  std::string status = "running";
  std::filesystem::path run_dir;
  std::vector<std::string> outputs;  // relative to run_dir

  std::filesystem::path path() const { return run_dir / "manifest.ini"; }

  Config to_config() const {
    Config c = config;
    c.set("run", "command", command);
    c.set("run", "seed", static_cast<long long>(seed));
    c.set("run", "version", version);
    c.set("run", "started", started);
    c.set("run", "finished", finished);
    c.set("run", "status", status);
    std::string outs;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      outs += (i ? ";" : "") + outputs[i];
    }
    c.set("run", "outputs", outs);
    return c;
  }

  void write() const {
    std::filesystem::create_directories(run_dir);
    to_config().save(path().string());
  }

  // Records an output file (relative to run_dir) and returns its full path.
  std::string output(const std::string& name) {
    if (std::find(outputs.begin(), outputs.end(), name) == outputs.end()) {
      outputs.push_back(name);
    }
    return (run_dir / name).string();
  }

  void finish(const std::string& final_status) {
    status = final_status;
    finished = utc_timestamp();
    write();
  }
};

// Configuration keys that describe one particular run rather than the
// experiment; they are dropped when a manifest is reused as --config.
inline Config strip_run_bookkeeping(Config cfg) {
  Config out;
  for (const auto& [section, entries] : cfg.sections()) {
    for (const auto& [key, value] : entries) {
      if (section == "run" && key != "seed") continue;
      out.set(section, key, value);
    }
  }
  return out;
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_MANIFEST_HPP_
