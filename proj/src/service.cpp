#include "multipa/service.hpp"

#include "httplib.h"
#include "multipa/audio.hpp"
#include "multipa/errors.hpp"

namespace multipa {

namespace {

constexpr std::size_t kMaxUploadBytes = 64u << 20;

ServiceReply error_reply(int status, const std::string& message) { return {status, {{"error", message}}}; }

AssessForm form_from_request(const httplib::Request& req) {
  AssessForm form;
  auto field = [&](const char* key) -> std::optional<std::string> {
    if (req.has_file(key)) return req.get_file_value(key).content;
    if (req.has_param(key)) return req.get_param_value(key);
    return std::nullopt;
  };
  form.audio = field("audio");
  form.mode = field("mode");
  form.target_text = field("target_text");
  form.request_json = field("request");
  return form;
}

}  // namespace

AssessmentService::AssessmentService(Loader loader) : loader_(std::move(loader)) {}

AssessmentService::~AssessmentService() {
  stop();
  if (load_thread_.joinable()) load_thread_.join();
}

void AssessmentService::start_loading() {
  if (load_thread_.joinable()) return;
  load_thread_ = std::thread([this] {
    try {
      auto a = loader_();
      std::lock_guard lock(mutex_);
      assessor_ = std::move(a);
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex_);
      load_error_ = e.what();
    }
  });
}

void AssessmentService::set_assessor(std::shared_ptr<const Assessor> assessor) {
  std::lock_guard lock(mutex_);
  assessor_ = std::move(assessor);
  load_error_.clear();
}

ServiceReply AssessmentService::health() const {
  std::lock_guard lock(mutex_);
  if (assessor_) return {200, {{"status", "ok"}}};
  if (!load_error_.empty()) return {503, {{"status", "error"}, {"error", load_error_}}};
  return {503, {{"status", "loading"}}};
}

ServiceReply AssessmentService::assess(const AssessForm& form) const {
  std::shared_ptr<const Assessor> assessor;
  {
    std::lock_guard lock(mutex_);
    if (!assessor_) {
      return error_reply(503, load_error_.empty() ? "models are loading" : "models failed to load: " + load_error_);
    }
    assessor = assessor_;
  }

  std::optional<std::string> mode_text = form.mode;
  std::optional<std::string> target_text = form.target_text;
  if (form.request_json) {
    try {
      const auto doc = nlohmann::json::parse(*form.request_json);
      if (!doc.is_object()) return error_reply(400, "request part must be a JSON object");
      for (const auto& [key, v] : doc.items()) {
        if (key == "mode" && v.is_string()) mode_text = v.get<std::string>();
        else if (key == "target_text" && v.is_string()) target_text = v.get<std::string>();
        else if (key == "target_text" && v.is_null()) continue;
        else return error_reply(400, "unexpected request field '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      return error_reply(400, std::string("request part is not valid JSON: ") + e.what());
    }
  }
  if (!mode_text) return error_reply(400, "missing field 'mode'");
  Mode mode;
  try {
    mode = mode_from_string(*mode_text);
  } catch (const ConfigError& e) {
    return error_reply(400, e.what());
  }
  if (mode == Mode::kClosed && (!target_text || target_text->empty())) {
    return error_reply(400, "closed mode requires 'target_text'");
  }
  if (mode == Mode::kOpen && target_text) return error_reply(400, "open mode does not accept 'target_text'");
  if (!form.audio || form.audio->empty()) return error_reply(400, "missing file field 'audio'");

  AudioClip audio;
  try {
    const auto* data = reinterpret_cast<const std::uint8_t*>(form.audio->data());
    audio = canonicalize(decode_wav(std::span(data, form.audio->size()), "upload"));
  } catch (const PreconditionError& e) {
    return error_reply(422, std::string("undecodable audio: ") + e.what());
  }
  try {
    return {200, to_json(assessor->assess_audio(audio, mode, target_text, "upload"))};
  } catch (const AssessmentUnavailable& e) {
    return error_reply(422, std::string("assessment unavailable: ") + e.what());
  } catch (const PreconditionError& e) {
    return error_reply(400, e.what());
  } catch (const ModelUnavailable& e) {
    return error_reply(503, e.what());
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

void AssessmentService::install_routes() {
  server_ = std::make_unique<httplib::Server>();
  server_->set_payload_max_length(kMaxUploadBytes);
  auto send = [](httplib::Response& res, const ServiceReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  };
  auto health = [this, send](const httplib::Request&, httplib::Response& res) { send(res, this->health()); };
  auto assess = [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, this->assess(form_from_request(req)));
  };
  server_->Get("/healthz", health);
  server_->Get("/v1/healthz", health);
  server_->Post("/v1/assess", assess);
  server_->Post("/assess", assess);
}

int AssessmentService::start(const std::string& host, int port) {
  install_routes();
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void AssessmentService::serve(const std::string& host, int port) {
  install_routes();
  if (!server_->listen(host, port)) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
}

void AssessmentService::stop() {
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
}

}  // namespace multipa
