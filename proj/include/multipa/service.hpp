#pragma once

// HTTP assessment API.
//
//   POST /v1/assess  (alias /assess)   multipart/form-data:
//        audio        WAV file (any PCM/float format, resampled to 16 kHz)
//        mode         "closed" | "open"
//        target_text  required in closed mode, forbidden in open mode
//     (mode/target_text may instead arrive as one JSON part named "request")
//     200  AssessmentResult JSON
//     400  malformed request or mode/target_text mismatch
//     422  undecodable audio, or audio the pipeline cannot assess
//     503  models still loading (or failed to load)
//   GET /healthz (alias /v1/healthz)
//     200 {"status": "ok"} when ready; 503 {"status": "loading" | "error"}

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "multipa/pipeline.hpp"

namespace httplib {
class Server;
}

namespace multipa {

struct ServiceReply {
  int status = 200;
  nlohmann::json body;
};

// Parsed form fields of an assessment request.
struct AssessForm {
  std::optional<std::string> audio;  // raw file bytes
  std::optional<std::string> mode;
  std::optional<std::string> target_text;
  std::optional<std::string> request_json;
};

class AssessmentService {
 public:
  using Loader = std::function<std::shared_ptr<const Assessor>()>;

  explicit AssessmentService(Loader loader);
  ~AssessmentService();
  AssessmentService(const AssessmentService&) = delete;
  AssessmentService& operator=(const AssessmentService&) = delete;

  // Runs the loader on a background thread; requests get 503 until it ends.
  void start_loading();
  // Installs an already-built assessor (synchronous alternative).
  void set_assessor(std::shared_ptr<const Assessor> assessor);

  ServiceReply health() const;
  ServiceReply assess(const AssessForm& form) const;

  // Binds (port 0 picks a free port), serves on a background thread and
  // returns the bound port. Throws ConfigError when binding fails.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  void serve(const std::string& host, int port);
  void stop();

 private:
  void install_routes();

  Loader loader_;
  mutable std::mutex mutex_;
  std::shared_ptr<const Assessor> assessor_;
  std::string load_error_;
  std::thread load_thread_;
  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
};

}  // namespace multipa
