#pragma once

#include <span>
#include <string>
#include <vector>

#include "stancekit/eval.hpp"

namespace stancekit::report {

inline constexpr std::string_view kReferenceStatus = "reference, not reproduced";

// A results table. Sections named zero_shot, static_embedding and
// transformer pick up the matching published reference rows.
struct Section {
  std::string name;
  std::string title;
  std::vector<eval::TableRow> rows;
};

std::vector<eval::TableRow> reference_rows(std::string_view section);

// Appends the reference rows to every section that has them.
std::vector<Section> with_reference(std::vector<Section> sections);

// Both renderings keep all run-dependent text except the timestamp out of
// the first line, so two reports of the same results differ only there.
std::string render_tsv(std::span<const Section> sections, std::string_view generated_at);
std::string render_markdown(std::span<const Section> sections, std::string_view generated_at);

// Reads a report written by render_tsv.
std::vector<Section> parse_tsv_report(std::string_view text);

// Current UTC time as RFC 3339.
std::string utc_timestamp();

}  // namespace stancekit::report
