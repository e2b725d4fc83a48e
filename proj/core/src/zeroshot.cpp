#include "stancekit/zeroshot.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <thread>

#include "stancekit/error.hpp"
#include "stancekit/jsonl.hpp"
#include "stancekit/random.hpp"

namespace stancekit::zeroshot {
namespace {

using C = ClassLabel;

constexpr Tag kSingleTags[] = {{"Sympathy", C::kSympathy},
                               {"Antipathy", C::kAntipathy},
                               {"Solidarity", C::kSolidarity},
                               {"Animosity", C::kAnimosity},
                               {"Generic", C::kGeneric}};

constexpr Tag kDoubleExtra[] = {{"Humanitarian", C::kSympathy},
                                {"Xenophobic", C::kAntipathy},
                                {"Consensus", C::kSolidarity},
                                {"Bitterness", C::kAnimosity},
                                {"Experiential", C::kGeneric}};

constexpr Tag kMultiExtra[] = {{"Empathy", C::kSympathy},        {"Inequality", C::kSympathy},
                               {"Hatred", C::kAntipathy},        {"Disgust", C::kAntipathy},
                               {"Illegal", C::kAntipathy},       {"Unity", C::kSolidarity},
                               {"Support", C::kSolidarity},      {"Deport", C::kAnimosity},
                               {"Hostility", C::kAnimosity},     {"Impartial", C::kGeneric},
                               {"Nondiscriminatory", C::kGeneric}};

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::optional<TagSet> parse_tag_set(std::string_view name) {
  if (name == "single") return TagSet::kSingle;
  if (name == "double") return TagSet::kDouble;
  if (name == "multi") return TagSet::kMulti;
  return std::nullopt;
}

std::string_view to_string(TagSet set) {
  switch (set) {
    case TagSet::kSingle: return "single";
    case TagSet::kDouble: return "double";
    case TagSet::kMulti: return "multi";
  }
  return "unknown";
}

std::vector<Tag> tags(TagSet set) {
  std::vector<Tag> out;
  for (const Tag& t : kSingleTags) out.push_back(t);
  if (set == TagSet::kSingle) return out;
  for (const Tag& t : kDoubleExtra) out.push_back(t);
  if (set == TagSet::kDouble) return out;
  for (const Tag& t : kMultiExtra) out.push_back(t);
  return out;
}

std::string hypothesis(std::string_view templ, std::string_view tag) {
  static constexpr std::string_view kPlaceholder = "{tag}";
  if (templ.find(kPlaceholder) == std::string_view::npos) {
    fail(ErrorCode::kConfig, "hypothesis template must contain {tag}: " + std::string(templ));
  }
  std::string out;
  for (std::size_t pos = 0;;) {
    const auto hit = templ.find(kPlaceholder, pos);
    if (hit == std::string_view::npos) {
      out.append(templ.substr(pos));
      return out;
    }
    out.append(templ.substr(pos, hit - pos));
    out.append(tag);
    pos = hit + kPlaceholder.size();
  }
}

void TableBackend::set(std::string premise, std::string hypothesis, double entailment) {
  table_[{std::move(premise), std::move(hypothesis)}] = entailment;
}

std::vector<NliScores> TableBackend::score(std::string_view premise, std::span<const std::string> hypotheses) {
  std::vector<NliScores> out;
  out.reserve(hypotheses.size());
  for (const auto& h : hypotheses) {
    auto it = table_.find(std::make_pair(std::string(premise), h));
    double e = 0.0;
    if (it != table_.end()) {
      e = it->second;
    } else if (default_) {
      e = *default_;
    } else {
      fail(ErrorCode::kBackend, "no table entry for hypothesis '" + h + "'");
    }
    out.push_back({e, (1.0 - e) / 2.0, (1.0 - e) / 2.0});
  }
  return out;
}

std::vector<NliScores> HashBackend::score(std::string_view premise, std::span<const std::string> hypotheses) {
  std::vector<NliScores> out;
  out.reserve(hypotheses.size());
  for (const auto& h : hypotheses) {
    Rng rng(fnv1a(h, fnv1a(premise, splitmix64(seed_))));
    const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
    const double sum = a + b + c;
    out.push_back({a / sum, b / sum, c / sum});
  }
  return out;
}

HttpBackend::HttpBackend(std::string url, std::chrono::seconds timeout)
    : url_(std::move(url)), timeout_(timeout) {
  const auto scheme = url_.find("://");
  if (scheme == std::string::npos || url_.compare(0, scheme, "http") != 0) {
    fail(ErrorCode::kConfig, "NLI backend URL must start with http://: " + url_);
  }
  const auto slash = url_.find('/', scheme + 3);
  origin_ = url_.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url_.substr(slash);
}

HttpBackend::~HttpBackend() = default;

std::vector<NliScores> HttpBackend::score(std::string_view premise, std::span<const std::string> hypotheses) {
  httplib::Client client(origin_);
  client.set_read_timeout(timeout_);
  client.set_connection_timeout(std::chrono::seconds(10));
  const nlohmann::json body = {{"premise", premise},
                               {"hypotheses", std::vector<std::string>(hypotheses.begin(), hypotheses.end())}};
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) fail(ErrorCode::kBackend, "NLI backend " + url_ + " unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    fail(ErrorCode::kBackend, "NLI backend " + url_ + " returned HTTP " + std::to_string(res->status));
  }
  std::vector<NliScores> out;
  try {
    const auto reply = nlohmann::json::parse(res->body);
    for (const auto& s : reply.at("scores")) {
      out.push_back({s.at("entailment").get<double>(), s.value("neutral", 0.0), s.value("contradiction", 0.0)});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kBackend, "malformed NLI backend reply: " + std::string(e.what()));
  }
  if (out.size() != hypotheses.size()) {
    fail(ErrorCode::kBackend, "NLI backend returned " + std::to_string(out.size()) + " scores for " +
                                  std::to_string(hypotheses.size()) + " hypotheses");
  }
  return out;
}

std::unique_ptr<NliBackend> make_backend(std::string_view spec, std::uint64_t seed) {
  if (spec == "mock" || spec == "hash") return std::make_unique<HashBackend>(seed);
  if (spec.starts_with("http://") || spec.starts_with("https://")) {
    return std::make_unique<HttpBackend>(std::string(spec));
  }
  auto table = std::make_unique<TableBackend>();
  const std::filesystem::path path(spec);
  if (!std::filesystem::exists(path)) fail(ErrorCode::kConfig, "unknown NLI backend: " + std::string(spec));
  jsonl::for_each(path, [&](const nlohmann::json& row, std::size_t) {
    table->set(row.at("premise").get<std::string>(), row.at("hypothesis").get<std::string>(),
               row.at("entailment").get<double>());
  });
  return table;
}

std::optional<Aggregation> parse_aggregation(std::string_view name) {
  if (name == "mean") return Aggregation::kMean;
  if (name == "max") return Aggregation::kMax;
  return std::nullopt;
}

Result classify(std::string_view text, const Config& config, NliBackend& backend) {
  const auto tag_list = tags(config.tag_set);
  std::vector<std::string> hypotheses;
  hypotheses.reserve(tag_list.size());
  for (const auto& tag : tag_list) hypotheses.push_back(hypothesis(config.hypothesis_template, tag.text));
  const auto scores = backend.score(text, hypotheses);
  if (scores.size() != hypotheses.size()) fail(ErrorCode::kBackend, "backend returned wrong number of scores");

  Result out;
  PerClass<std::vector<double>> per_class;
  for (std::size_t i = 0; i < tag_list.size(); ++i) {
    const double e = scores[i].entailment;
    if (!(e >= 0.0 && e <= 1.0)) fail(ErrorCode::kBackend, "entailment score outside [0, 1]");
    per_class[tag_list[i].label].push_back(e);
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& values = per_class[label_at(c)];
    if (values.empty()) continue;
    // Summing in sorted order makes the mean exactly independent of tag order.
    std::sort(values.begin(), values.end());
    if (config.aggregation == Aggregation::kMax) {
      out.raw[c] = values.back();
    } else {
      double sum = 0.0;
      for (double v : values) sum += v;
      out.raw[c] = sum / static_cast<double>(values.size());
    }
  }
  double total = 0.0;
  for (double v : out.raw) total += v;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out.probs[c] = total > 0.0 ? out.raw[c] / total : 1.0 / kNumClasses;
  }
  out.label = label_at(static_cast<std::size_t>(std::max_element(out.probs.begin(), out.probs.end()) - out.probs.begin()));
  return out;
}

std::vector<eval::Prediction> predict(std::span<const annotation::GoldExample> examples,
                                      const Config& config, NliBackend& backend) {
  std::vector<eval::Prediction> out(examples.size());
  auto run = [&](std::size_t i) {
    const auto r = classify(examples[i].text, config, backend);
    out[i].tweet_id = examples[i].tweet_id;
    out[i].label = r.label;
    out[i].probs = r.probs;
  };
  const unsigned threads = backend.thread_safe() ? std::max(1u, config.threads) : 1u;
  if (threads == 1) {
    for (std::size_t i = 0; i < examples.size(); ++i) run(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < examples.size(); i = next++) {
          try {
            run(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = examples.size();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace stancekit::zeroshot
