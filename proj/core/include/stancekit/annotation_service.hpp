#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "stancekit/annotation.hpp"

namespace stancekit::annotation {

// HTTP front end for an AnnotationStore.
//
//   GET  /tasks/next?annotator=ID   claim and return the next task ({"task": null} when empty)
//   POST /tasks/{id}/label          {"annotator", "label", "multi_label_flag"}
//   GET  /agreement                 pairwise kappa, status counts, gold class counts
//   GET  /gold/export               newline-delimited GoldExample records
//   POST /gold/split                {"ratio", "k", "seed"} -> DatasetSplit
//   GET  /audit                     accepted submissions in order
//
// Errors are {"error": {"code": ..., "message": ...}} with a 4xx status.
class AnnotationService {
 public:
  struct Options {
    std::filesystem::path static_dir;  // served at "/" when set
  };

  explicit AnnotationService(AnnotationStore& store, Options options = {});
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  // Blocks until stop() is called.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and returns it; call listen_after_bind() next.
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stancekit::annotation
