#ifndef PHONPIPE_PIPELINE_HPP
#define PHONPIPE_PIPELINE_HPP

#include <iosfwd>
#include <map>
#include <string>

namespace phonpipe::pipeline {

// Flat dotted-key configuration ("dsp.pitch_floor = 75"), one canonical
// file per run; command-line flags override loaded values.
class Config {
 public:
  Config() = default;
  static Config load_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

// Each command returns a process exit code: 0 on success, 1 when strict-mode
// errors occurred. Configuration problems throw ConfigError.

int cmd_ingest(const Config& cfg, bool dry_run, std::ostream& log);
int cmd_train(const Config& cfg, bool dry_run, std::ostream& log);
int cmd_surprisal(const Config& cfg, const std::string& input_path,
                  bool input_is_ids, const std::string& out_path, bool dry_run,
                  std::ostream& log);
int cmd_extract(const Config& cfg, bool dry_run, std::ostream& log);
int cmd_merge(const Config& cfg, bool dry_run, std::ostream& log);
int cmd_pipeline(const Config& cfg, bool dry_run, std::ostream& log);

}  // namespace phonpipe::pipeline

#endif  // PHONPIPE_PIPELINE_HPP
