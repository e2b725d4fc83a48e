#include "stancekit/annotation_service.hpp"

#include <httplib.h>

#include "stancekit/error.hpp"

namespace stancekit::annotation {
namespace {

using nlohmann::json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kDuplicateSubmission:
    case ErrorCode::kConflict:
    case ErrorCode::kIncomplete: return 409;
    case ErrorCode::kIo: return 500;
    default: return 400;
  }
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  res.status = http_status(code);
  json body = {{"error", {{"code", std::string(to_string(code))}, {"message", message}}}};
  res.set_content(body.dump(), "application/json");
}

void send_json(httplib::Response& res, const json& body) {
  res.status = 200;
  res.set_content(body.dump(), "application/json");
}

template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const json::exception& e) {
      send_error(res, ErrorCode::kValidation, std::string("malformed request body: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, ErrorCode::kValidation, e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kValidation, std::string("request body is not valid JSON: ") + e.what());
  }
}

bool truthy(const std::string& value) { return value == "1" || value == "true" || value == "yes"; }

json agreement_json(const AnnotationStore& store) {
  const auto tasks = store.snapshot();
  json pairs = json::array();
  for (const auto& pair : agreement_report(tasks)) {
    pairs.push_back({{"annotator_a", pair.annotator_a},
                     {"annotator_b", pair.annotator_b},
                     {"co_labeled", pair.co_labeled},
                     {"kappa", pair.kappa ? json(*pair.kappa) : json(nullptr)}});
  }
  json status = {{"open", 0}, {"claimed", 0}, {"done", 0}};
  for (const auto& task : tasks) status[std::string(to_string(task.status))] = status[std::string(to_string(task.status))].get<int>() + 1;
  json distribution = json::object();
  for (ClassLabel c : kLabelOrder) distribution[std::string(to_code(c))] = 0;
  std::size_t excluded = 0;
  for (const auto& gold : finalize_gold(tasks, true).gold) {
    if (gold.excluded) {
      ++excluded;
    } else if (gold.label) {
      const std::string code(to_code(*gold.label));
      distribution[code] = distribution[code].get<int>() + 1;
    }
  }
  return {{"pairs", pairs},
          {"status_counts", status},
          {"gold_distribution", distribution},
          {"excluded", excluded},
          {"tasks", tasks.size()}};
}

}  // namespace

struct AnnotationService::Impl {
  AnnotationStore& store;
  Options options;
  httplib::Server server;

  Impl(AnnotationStore& s, Options o) : store(s), options(std::move(o)) {}

  void routes() {
    server.Get("/tasks/next", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto annotator = req.get_param_value("annotator");
      if (annotator.empty()) fail(ErrorCode::kValidation, "query parameter 'annotator' is required");
      auto task = store.claim_next(annotator);
      send_json(res, {{"task", task ? to_json(*task) : json(nullptr)}});
    }));

    server.Post(R"(/tasks/([^/]+)/label)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string task_id = req.matches[1];
                  const json body = parse_body(req);
                  const auto annotator = body.value("annotator", std::string());
                  std::optional<ClassLabel> label;
                  if (body.contains("label") && !body["label"].is_null()) {
                    label = require_label(body["label"].get<std::string>());
                  }
                  const bool flag = body.value("multi_label_flag", false);
                  send_json(res, {{"task", to_json(store.submit(task_id, annotator, label, flag))}});
                }));

    server.Get("/agreement", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, agreement_json(store));
    }));

    server.Get("/gold/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const bool partial = truthy(req.get_param_value("partial"));
      const auto result = store.finalize(partial);
      std::string body;
      for (const auto& gold : result.gold) {
        body += to_json(gold).dump();
        body += '\n';
      }
      res.set_header("X-Adjudication-Pending", std::to_string(result.adjudication_queue.size()));
      res.set_content(body, "application/x-ndjson");
    }));

    server.Post("/gold/split", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      const bool partial = body.value("partial", false);
      const auto result = store.finalize(partial);
      const auto split = split_dataset(result.gold, body.value("ratio", 0.85),
                                       body.value("k", std::size_t{5}),
                                       body.value("seed", std::uint64_t{42}));
      send_json(res, to_json(split));
    }));

    server.Get("/audit", guarded([this](const httplib::Request&, httplib::Response& res) {
      json entries = json::array();
      for (const auto& entry : store.audit()) entries.push_back(to_json(entry));
      send_json(res, {{"entries", entries}});
    }));

    if (!options.static_dir.empty()) {
      server.set_mount_point("/", options.static_dir.string());
    }
  }
};

AnnotationService::AnnotationService(AnnotationStore& store, Options options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
  impl_->routes();
}

AnnotationService::~AnnotationService() { stop(); }

bool AnnotationService::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

int AnnotationService::bind_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool AnnotationService::listen_after_bind() { return impl_->server.listen_after_bind(); }

void AnnotationService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool AnnotationService::running() const { return impl_->server.is_running(); }

}  // namespace stancekit::annotation
