// Copyright 2026 The mtal Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Eigen must come before httplib: <resolv.h>, pulled in by httplib,
// defines a `_res` macro that collides with Eigen parameter names.
#include "mtal/service.h"

#include "httplib.h"

namespace mtal::service {
namespace {

constexpr const char* kJson = "application/json";

void Reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void ReplyError(httplib::Response& res, const Error& e) {
  Reply(res, StatusFor(e.code()),
        Json{{"status", "rejected"},
             {"error", std::string(ErrorCodeName(e.code()))},
             {"message", e.what()}});
}

void ReplyBadRequest(httplib::Response& res, const std::string& message) {
  Reply(res, 400,
        Json{{"status", "rejected"},
             {"error", "bad-request"},
             {"message", message}});
}

// Runs a handler, translating library errors and malformed JSON into
// structured error responses.
template <typename F>
void Guard(httplib::Response& res, F&& handler) {
  try {
    handler();
  } catch (const Error& e) {
    ReplyError(res, e);
  } catch (const Json::exception& e) {
    ReplyBadRequest(res, e.what());
  } catch (const std::invalid_argument& e) {
    ReplyBadRequest(res, e.what());
  } catch (const std::out_of_range& e) {
    ReplyBadRequest(res, e.what());
  }
}

}  // namespace

int StatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownId:
      return 404;
    case ErrorCode::kNotInFlight:
    case ErrorCode::kTrainingInProgress:
    case ErrorCode::kNoModel:
    case ErrorCode::kEmptyPool:
      return 409;
    case ErrorCode::kIo:
    case ErrorCode::kBadCheckpoint:
      return 500;
    default:
      return 400;
  }
}

HttpServer::HttpServer(AnnotationService& service, HttpOptions options)
    : service_(service),
      options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()) {
  httplib::Server& s = *server_;

  s.Get("/api/batch", [this](const httplib::Request& req,
                             httplib::Response& res) {
    Guard(res, [&] {
      std::optional<query::Strategy> strategy;
      std::optional<int> size;
      if (req.has_param("strategy") && !req.get_param_value("strategy").empty()) {
        strategy = query::ParseStrategy(req.get_param_value("strategy"));
      }
      if (req.has_param("size") && !req.get_param_value("size").empty()) {
        size = std::stoi(req.get_param_value("size"));
      }
      Json tasks = Json::array();
      for (const AnnotationTask& task : service_.NextBatch(strategy, size)) {
        tasks.push_back(ToJson(task));
      }
      Reply(res, 200, Json{{"snapshot_version", service_.version()},
                           {"tasks", tasks}});
    });
  });

  s.Post("/api/labels", [this](const httplib::Request& req,
                               httplib::Response& res) {
    Guard(res, [&] {
      const Json body = Json::parse(req.body);
      const int labeled = service_.SubmitLabels(
          body.at("sentence_id").get<std::string>(),
          body.at("srl_tags").get<std::vector<std::string>>(),
          body.at("er_tags").get<std::vector<std::string>>(),
          body.value("annotator", std::string("anonymous")));
      Reply(res, 200, Json{{"status", "accepted"}, {"labeled", labeled}});
    });
  });

  s.Post("/api/release", [this](const httplib::Request& req,
                                httplib::Response& res) {
    Guard(res, [&] {
      const Json body = Json::parse(req.body);
      service_.Release(body.at("sentence_id").get<std::string>());
      Reply(res, 200, Json{{"status", "released"}});
    });
  });

  s.Post("/api/retrain", [this](const httplib::Request&,
                                httplib::Response& res) {
    try {
      const RetrainStatus status = service_.TriggerRetrain();
      Reply(res, 200,
            Json{{"version", status.version}, {"started", status.started}});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTrainingInProgress) {
        ReplyError(res, e);
        return;
      }
      Reply(res, 409,
            Json{{"status", "rejected"},
                 {"error", std::string(ErrorCodeName(e.code()))},
                 {"queued", true},
                 {"version", service_.version()}});
    }
  });

  s.Get("/api/metrics", [this](const httplib::Request&,
                               httplib::Response& res) {
    Guard(res, [&] { Reply(res, 200, service_.Metrics()); });
  });

  s.Get(R"(/api/sentence/([^/]+))", [this](const httplib::Request& req,
                                           httplib::Response& res) {
    Guard(res, [&] {
      Reply(res, 200, ToJson(service_.GetSentence(req.matches[1].str())));
    });
  });

  if (!options_.ui_dir.empty() &&
      !s.set_mount_point("/", options_.ui_dir)) {
    throw Error(ErrorCode::kIo, "cannot serve UI from " + options_.ui_dir);
  }
}

HttpServer::~HttpServer() { Stop(); }

int HttpServer::Start() {
  int port = options_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(options_.host);
  } else if (!server_->bind_to_port(options_.host, port)) {
    port = -1;
  }
  if (port < 0) {
    throw Error(ErrorCode::kIo, "cannot bind " + options_.host + ":" +
                                    std::to_string(options_.port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void HttpServer::Wait() {
  if (thread_.joinable()) thread_.join();
}

void HttpServer::Stop() {
  if (server_) server_->stop();
  Wait();
}

}  // namespace mtal::service
