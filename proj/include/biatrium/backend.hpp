#pragma once

// Segmenter backends. A backend maps an image volume on some stage grid to a
// label map on the same grid. External commands follow a file contract:
// float32 NIfTI at {input}, uint8 NIfTI expected at {output}, exit 0.

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <thread>
#include <vector>

#include "biatrium/error.hpp"
#include "biatrium/grid.hpp"
#include "biatrium/nifti.hpp"

extern char** environ;

namespace biatrium {

namespace fs = std::filesystem;

enum class BackendKind { external_command, threshold, copy_file };

struct BackendSpec {
  BackendKind kind = BackendKind::threshold;
  std::string command_template;  // external: must contain {input} and {output}
  double threshold = 0.5;        // threshold: label 1 where value >= threshold
  std::string source_path;       // copy-file: may contain {case_id}
  double timeout_s = 600.0;

  void validate() const {
    switch (kind) {
      case BackendKind::external_command:
        if (command_template.find("{input}") == std::string::npos ||
            command_template.find("{output}") == std::string::npos)
          throw Error(Errc::bad_config, "command template needs both {input} and {output} placeholders");
        if (!(timeout_s > 0.0)) throw Error(Errc::bad_config, "timeout_s must be > 0");
        break;
      case BackendKind::threshold:
        if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(Errc::bad_config, "threshold must lie in [0, 1]");
        break;
      case BackendKind::copy_file:
        if (source_path.empty()) throw Error(Errc::bad_config, "copy-file backend needs source_path");
        break;
    }
  }
};

// Scratch directory under $BIATRIUM_TMPDIR (or the system temp dir), removed
// on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "biatrium") {
    fs::path root = fs::temp_directory_path();
    if (const char* env = std::getenv("BIATRIUM_TMPDIR"); env && *env) root = env;
    fs::create_directories(root);
    std::string templ = (root / (prefix + "-XXXXXX")).string();
    if (!mkdtemp(templ.data())) throw Error(Errc::io, "cannot create temp dir under '" + root.string() + "'");
    path_ = templ;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct CommandResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string output;  // combined stdout + stderr
};

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
    s.replace(pos, from.size(), to);
  return s;
}

// Runs `command` under /bin/sh in its own process group; the whole group is
// killed on timeout.
inline CommandResult run_shell(const std::string& command, double timeout_s, const fs::path& log_path) {
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 2, log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(&actions, 2, 1);
  posix_spawn_file_actions_addopen(&actions, 0, "/dev/null", O_RDONLY, 0);
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  std::string sh = "/bin/sh", dash_c = "-c", cmd = command;
  char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, "/bin/sh", &actions, &attr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) throw Error(Errc::backend_failure, "posix_spawn failed with code " + std::to_string(rc));

  CommandResult result;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  auto pause = std::chrono::milliseconds(1);
  int status = 0;
  for (;;) {
    const pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0) throw Error(Errc::backend_failure, "waitpid failed");
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      waitpid(pid, &status, 0);
      result.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(pause);
    pause = std::min(pause * 2, std::chrono::milliseconds(50));
  }
  if (!result.timed_out) {
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) result.exit_code = 128 + WTERMSIG(status);
  }
  std::ifstream log(log_path);
  result.output.assign(std::istreambuf_iterator<char>(log), std::istreambuf_iterator<char>());
  return result;
}

struct BackendContext {
  std::string case_id;
  // copy-file only: maps a mask stored on the original input grid onto the
  // stage grid. Unset means the file is already on the stage grid.
  std::function<LabelMap(const LabelMap&)> project_reference;
  std::string stage = "backend";
};

struct BackendOutput {
  LabelMap labels;
  int exit_code = 0;
};

inline BackendOutput invoke_backend(const BackendSpec& spec, const Volume& input, const Shape3& expected_shape,
                                    const BackendContext& ctx = {}) {
  spec.validate();
  if (input.shape() != expected_shape)
    throw Error(Errc::shape_mismatch, ctx.stage + ": input " + to_string(input.shape()) + " but expected " +
                                          to_string(expected_shape));
  BackendOutput out;
  switch (spec.kind) {
    case BackendKind::threshold: {
      LabelMap m(input.shape(), input.spacing(), 0);
      for (std::size_t i = 0; i < input.size(); ++i) m.data()[i] = input.data()[i] >= spec.threshold ? 1 : 0;
      out.labels = std::move(m);
      return out;
    }
    case BackendKind::copy_file: {
      const fs::path src = replace_all(spec.source_path, "{case_id}", ctx.case_id);
      LabelMap m;
      try {
        m = read_label_map(src);
      } catch (const Error& e) {
        throw Error(Errc::backend_output, ctx.stage + ": cannot load '" + src.string() + "': " + e.what());
      }
      if (ctx.project_reference) m = ctx.project_reference(m);
      if (m.shape() != expected_shape)
        throw Error(Errc::backend_output, ctx.stage + ": mask shape " + to_string(m.shape()) + " but expected " +
                                              to_string(expected_shape));
      m.set_spacing(input.spacing());
      out.labels = std::move(m);
      return out;
    }
    case BackendKind::external_command: {
      TempDir tmp("biatrium-" + ctx.stage);
      const fs::path in_path = tmp.path() / "input.nii";
      const fs::path out_path = tmp.path() / "output.nii";
      write_volume(input, in_path, false);
      std::string cmd = replace_all(spec.command_template, "{input}", shell_quote(in_path.string()));
      cmd = replace_all(cmd, "{output}", shell_quote(out_path.string()));
      const auto r = run_shell(cmd, spec.timeout_s, tmp.path() / "backend.log");
      if (r.timed_out)
        throw Error(Errc::backend_timeout, ctx.stage + ": command exceeded " + std::to_string(spec.timeout_s) + " s");
      out.exit_code = r.exit_code;
      if (r.exit_code != 0)
        throw Error(Errc::backend_failure,
                    ctx.stage + ": command exited with code " + std::to_string(r.exit_code) + "; stderr: " + r.output);
      LabelMap m;
      try {
        m = read_label_map(out_path);
      } catch (const Error& e) {
        throw Error(Errc::backend_output, ctx.stage + ": unparsable output: " + e.what());
      }
      if (m.shape() != expected_shape)
        throw Error(Errc::backend_output, ctx.stage + ": output shape " + to_string(m.shape()) + " but expected " +
                                              to_string(expected_shape));
      m.set_spacing(input.spacing());
      out.labels = std::move(m);
      return out;
    }
  }
  return out;
}

}  // namespace biatrium
