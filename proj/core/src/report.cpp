#include "stancekit/report.hpp"

#include <chrono>
#include <ctime>
#include <sstream>

#include "stancekit/error.hpp"
#include "stancekit/reference.hpp"

namespace stancekit::report {
namespace {

eval::TableRow from_reference(const reference::Row& ref) {
  eval::TableRow row;
  row.model = ref.model;
  row.learning_rate = ref.learning_rate;
  row.batch_size = ref.batch_size;
  row.dropout = ref.dropout;
  row.tags = ref.tags;
  row.precision = ref.precision;
  row.recall = ref.recall;
  row.f1 = ref.f1;
  row.auc = ref.auc;
  row.status = kReferenceStatus;
  return row;
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

std::string or_dash(const std::string& s) { return s.empty() ? "-" : s; }

}  // namespace

std::vector<eval::TableRow> reference_rows(std::string_view section) {
  std::span<const reference::Row> refs;
  if (section == "zero_shot") refs = reference::kZeroShot;
  else if (section == "static_embedding") refs = reference::kStaticEmbedding;
  else if (section == "transformer") refs = reference::kTransformer;
  std::vector<eval::TableRow> rows;
  for (const auto& r : refs) rows.push_back(from_reference(r));
  return rows;
}

std::vector<Section> with_reference(std::vector<Section> sections) {
  for (auto& s : sections) {
    for (auto& r : reference_rows(s.name)) s.rows.push_back(std::move(r));
  }
  return sections;
}

std::string render_tsv(std::span<const Section> sections, std::string_view generated_at) {
  std::string out = "# generated_at\t" + std::string(generated_at) + "\n";
  for (const auto& s : sections) {
    out += "# section\t" + s.name + "\t" + s.title + "\n";
    out += eval::tsv_header() + "\n";
    for (const auto& row : s.rows) out += eval::to_tsv(row) + "\n";
  }
  return out;
}

std::string render_markdown(std::span<const Section> sections, std::string_view generated_at) {
  std::string out = "<!-- generated_at: " + std::string(generated_at) + " -->\n";
  out += "# Results\n";
  for (const auto& s : sections) {
    out += "\n## " + (s.title.empty() ? s.name : s.title) + "\n\n";
    out += "| Model | LR | BS | Dropout | Tags | PR | RC | F1 | AUC | Status |\n";
    out += "|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : s.rows) {
      out += "| " + r.model + " | " + or_dash(r.learning_rate) + " | " + or_dash(r.batch_size) + " | " +
             or_dash(r.dropout) + " | " + or_dash(r.tags) + " | " + fixed(r.precision, 2) + " | " +
             fixed(r.recall, 2) + " | " + fixed(r.f1, 2) + " | " + (r.auc ? fixed(*r.auc, 2) : "-") +
             " | " + r.status + " |\n";
    }
  }
  return out;
}

std::vector<Section> parse_tsv_report(std::string_view text) {
  std::vector<Section> sections;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line.rfind("# generated_at", 0) == 0 || line == eval::tsv_header()) continue;
    if (line.rfind("# section\t", 0) == 0) {
      Section s;
      const std::string rest = line.substr(10);
      const auto tab = rest.find('\t');
      s.name = rest.substr(0, tab);
      if (tab != std::string::npos) s.title = rest.substr(tab + 1);
      sections.push_back(std::move(s));
      continue;
    }
    auto row = eval::parse_tsv(line);
    if (!row || sections.empty()) {
      fail(ErrorCode::kParse, "report line " + std::to_string(number) + " is not a table row");
    }
    sections.back().rows.push_back(std::move(*row));
  }
  return sections;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace stancekit::report
