#pragma once

// Thin subprocess wrapper for driving the CLI from tests: runs a command
// line, captures exit code and both output streams through temp files.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace sara::testing {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// A fresh scratch directory under the system temp root, removed on scope
// exit. Each instance gets a unique suffix so tests can run concurrently.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sara_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& leaf = "") const {
    return leaf.empty() ? path_.string() : (path_ / leaf).string();
  }

 private:
  std::filesystem::path path_;
};

// `env` entries are "NAME=value" pairs prepended to the command.
inline RunResult run_command(const std::string& command,
                             const std::vector<std::string>& env = {}) {
  TempDir dir("capture");
  const std::string out_path = dir.str("out");
  const std::string err_path = dir.str("err");
  std::string full;
  for (const std::string& e : env) full += e + " ";
  full += command + " > '" + out_path + "' 2> '" + err_path + "'";
  const int raw = std::system(full.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

}  // namespace sara::testing
