#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pipeline.hpp"

// Subcommand implementations. Empty string options mean "not given"; the
// pipeline settings fill them in. Each returns the process exit code and
// raises stancekit::Error on stage failures.
namespace stancekit::cli {

struct IngestArgs {
  std::string in, out, stats, lang;
};

struct WeakLabelArgs {
  std::string in, lexicon, out, abstain;
  unsigned threads = 0;
};

struct ServeArgs {
  std::string silver, corpus, journal, host, static_dir, export_gold, agreement;
  int port = -1;
  std::size_t required = 0;
  bool allow_partial = false;
};

struct ZeroShotArgs {
  std::string gold, backend, strategy, templ, aggregation, subset = "all", split, out, report, summary;
  unsigned threads = 0;
};

struct TrainArgs {
  std::string gold, arch, encoder, embedding, precision, mode = "split", split, out, history, predictions, report,
      summary;
  double learning_rate = 0, dropout = -1;
  std::size_t batch_size = 0, epochs = 0;
  bool epochs_given = false;
  bool freeze_encoder = false;
  unsigned threads = 0;
};

struct EvaluateArgs {
  std::string pred, model, gold, subset = "all", split, pred_out, out, errors, summary;
  std::size_t max_cases = 5, bootstrap = 1000;
  unsigned threads = 0;
};

struct GridArgs {
  std::string gold, manifest, out_dir, split;
  std::vector<std::string> overrides;
  unsigned jobs = 0;
  bool force = false;
};

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out, tsv;
};

int ingest(const Pipeline& p, const IngestArgs& a, std::ostream& out);
int weak_label(const Pipeline& p, const WeakLabelArgs& a, std::ostream& out);
int serve_annotation(const Pipeline& p, const ServeArgs& a, std::ostream& out);
int zeroshot(const Pipeline& p, const ZeroShotArgs& a, std::ostream& out);
int train(const Pipeline& p, const TrainArgs& a, std::ostream& out);
int evaluate(const Pipeline& p, const EvaluateArgs& a, std::ostream& out);
int grid(const Pipeline& p, const GridArgs& a, std::ostream& out);
int report(const Pipeline& p, const ReportArgs& a, std::ostream& out);

}  // namespace stancekit::cli
