#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "helios/config.hpp"
#include "helios/encoder.hpp"
#include "helios/error.hpp"
#include "helios/overlap.hpp"

namespace helios {

struct EvalConfig {
  double correctness_overlap = 0.5;  // 0.8 for homogeneous evaluation
  double exclusion_window = 30.0;    // seconds
  std::size_t k_max = 10;
  /// Drop every database entry from the query's own session.
  bool cross_session_only = false;

  void validate() const {
    if (!(correctness_overlap > 0.0 && correctness_overlap <= 1.0)) {
      throw InvalidParameter("correctness_overlap must be in (0, 1]");
    }
    if (!(exclusion_window >= 0.0)) throw InvalidParameter("exclusion_window must be >= 0");
    if (k_max < 1) throw InvalidParameter("k_max must be >= 1");
  }

  [[nodiscard]] KeyValues to_key_values() const {
    KeyValues kv;
    kv.set("eval.correctness_overlap", correctness_overlap);
    kv.set("eval.exclusion_window", exclusion_window);
    kv.set("eval.k_max", k_max);
    kv.set("eval.cross_session_only", cross_session_only);
    return kv;
  }

  static EvalConfig from_key_values(const KeyValues& kv) { return from_key_values(kv, EvalConfig{}); }

  static EvalConfig from_key_values(const KeyValues& kv, EvalConfig c) {
    c.correctness_overlap = kv.get("eval.correctness_overlap", c.correctness_overlap);
    c.exclusion_window = kv.get("eval.exclusion_window", c.exclusion_window);
    c.k_max = kv.get("eval.k_max", c.k_max);
    c.cross_session_only = kv.get("eval.cross_session_only", c.cross_session_only);
    c.validate();
    return c;
  }
};

struct Neighbor {
  std::string scan_id;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

inline double descriptor_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("descriptor dimension mismatch: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Exact k nearest neighbours by Euclidean distance, ascending; equal
/// distances are ordered by scan_id.
inline std::vector<Neighbor> knn_search(const Descriptor& query,
                                        const std::vector<const Descriptor*>& database,
                                        std::size_t k) {
  if (database.empty()) throw ContractError("knn_search: empty database");
  std::vector<Neighbor> all;
  all.reserve(database.size());
  for (const Descriptor* d : database) {
    all.push_back({d->scan_id, descriptor_distance(query.values, d->values)});
  }
  const auto less = [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.scan_id < b.scan_id;
  };
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), less);
  all.resize(keep);
  return all;
}

inline std::vector<Neighbor> knn_search(const Descriptor& query,
                                        const std::vector<Descriptor>& database, std::size_t k) {
  std::vector<const Descriptor*> ptrs;
  ptrs.reserve(database.size());
  for (const auto& d : database) ptrs.push_back(&d);
  return knn_search(query, ptrs, k);
}

struct QueryRecord {
  std::string query_id;
  std::vector<Neighbor> ranked;   // top k_max after exclusion
  std::vector<bool> correct;      // per ranked entry
  bool has_correct = false;       // any correct candidate in the filtered database
  std::size_t candidates = 0;     // filtered database size

  [[nodiscard]] std::optional<std::size_t> first_correct_rank() const {
    for (std::size_t i = 0; i < correct.size(); ++i) {
      if (correct[i]) return i + 1;
    }
    return std::nullopt;
  }

  friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;

  friend bool operator==(const PrPoint&, const PrPoint&) = default;
};

struct EvalReport {
  EvalConfig config;
  std::vector<double> recall_at_k;  // index k-1
  std::vector<PrPoint> pr_curve;
  std::vector<QueryRecord> queries;
  std::size_t evaluated_queries = 0;  // queries kept in the denominator

  [[nodiscard]] double recall_at(std::size_t k) const { return recall_at_k.at(k - 1); }

  friend bool operator==(const EvalReport& a, const EvalReport& b) {
    return a.recall_at_k == b.recall_at_k && a.pr_curve == b.pr_curve && a.queries == b.queries &&
           a.evaluated_queries == b.evaluated_queries;
  }
};

namespace detail {

inline double pair_overlap(const OverlapMatrix& m, const std::string& a, const std::string& b) {
  if (!m.contains(a) || !m.contains(b)) {
    throw ContractError("overlap matrix lacks pair (" + a + ", " + b + ")");
  }
  return m.value(a, b);
}

inline bool excluded(const Descriptor& q, const Descriptor& d, const EvalConfig& cfg) {
  if (q.sensor_tag != d.sensor_tag) return false;
  return cfg.cross_session_only || std::abs(q.timestamp - d.timestamp) < cfg.exclusion_window;
}

}  // namespace detail

/// Ranks each query against the database. Candidates from the query's own
/// session (same sensor tag) closer than exclusion_window seconds are removed
/// first. A retrieval is correct when its overlap with the query strictly
/// exceeds correctness_overlap.
inline EvalReport evaluate(const std::vector<Descriptor>& queries,
                           const std::vector<Descriptor>& database, const OverlapMatrix& overlaps,
                           const EvalConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  if (queries.empty()) throw ContractError("evaluate: empty query set");
  if (database.empty()) throw ContractError("evaluate: empty database");

  EvalReport report;
  report.config = cfg;
  report.queries.resize(queries.size());

  const auto run = [&](std::size_t qi) {
    const Descriptor& q = queries[qi];
    QueryRecord& rec = report.queries[qi];
    rec.query_id = q.scan_id;
    std::vector<const Descriptor*> filtered;
    for (const auto& d : database) {
      if (!detail::excluded(q, d, cfg)) filtered.push_back(&d);
    }
    rec.candidates = filtered.size();
    for (const Descriptor* d : filtered) {
      if (detail::pair_overlap(overlaps, q.scan_id, d->scan_id) > cfg.correctness_overlap) {
        rec.has_correct = true;
      }
    }
    if (filtered.empty()) return;
    rec.ranked = knn_search(q, filtered, cfg.k_max);
    for (const auto& n : rec.ranked) {
      rec.correct.push_back(detail::pair_overlap(overlaps, q.scan_id, n.scan_id) >
                            cfg.correctness_overlap);
    }
  };

  threads = std::max(1u, threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < queries.size(); ++i) run(i);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          try {
            for (std::size_t i = t; i < queries.size(); i += threads) run(i);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  report.recall_at_k.assign(cfg.k_max, 0.0);
  std::vector<std::pair<double, bool>> top1;
  for (const auto& rec : report.queries) {
    if (!rec.has_correct) continue;
    ++report.evaluated_queries;
    if (const auto r = rec.first_correct_rank()) {
      for (std::size_t k = *r; k <= cfg.k_max; ++k) report.recall_at_k[k - 1] += 1.0;
    }
    top1.emplace_back(rec.ranked.front().distance, rec.correct.front());
  }
  if (report.evaluated_queries > 0) {
    for (double& r : report.recall_at_k) r /= static_cast<double>(report.evaluated_queries);
  }

  // Accept the top-1 candidate when its distance is <= threshold.
  std::sort(top1.begin(), top1.end());
  const double total = static_cast<double>(top1.size());
  std::size_t accepted = 0;
  std::size_t true_pos = 0;
  for (std::size_t i = 0; i < top1.size(); ++i) {
    ++accepted;
    if (top1[i].second) ++true_pos;
    if (i + 1 < top1.size() && top1[i + 1].first == top1[i].first) continue;
    report.pr_curve.push_back({top1[i].first,
                               static_cast<double>(true_pos) / static_cast<double>(accepted),
                               static_cast<double>(true_pos) / total});
  }
  return report;
}

/// Element-wise mean of recall_at_k over several reports (e.g. one per
/// sequence and sensor).
inline std::vector<double> average_recall(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ContractError("average_recall: no reports");
  std::vector<double> mean(reports.front().recall_at_k.size(), 0.0);
  for (const auto& r : reports) {
    if (r.recall_at_k.size() != mean.size()) {
      throw ShapeError("average_recall: reports have different k_max");
    }
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += r.recall_at_k[k];
  }
  for (double& v : mean) v /= static_cast<double>(reports.size());
  return mean;
}

/// Evaluates each group of queries separately (keyed by `group_of`) against
/// the full database and averages the per-group recalls.
template <typename GroupFn>
std::vector<double> grouped_recall(const std::vector<Descriptor>& queries,
                                   const std::vector<Descriptor>& database,
                                   const OverlapMatrix& overlaps, const EvalConfig& cfg,
                                   GroupFn group_of) {
  std::map<std::string, std::vector<Descriptor>> groups;
  for (const auto& q : queries) groups[group_of(q)].push_back(q);
  std::vector<EvalReport> reports;
  for (const auto& [key, members] : groups) {
    reports.push_back(evaluate(members, database, overlaps, cfg));
  }
  return average_recall(reports);
}

inline std::string format_eval_report(const EvalReport& r, const std::string& header = "") {
  std::ostringstream out;
  out << header;
  out << "# correctness_overlap=" << io::format_double(r.config.correctness_overlap) << '\n';
  out << "# exclusion_window=" << io::format_double(r.config.exclusion_window) << '\n';
  out << "# cross_session_only=" << (r.config.cross_session_only ? "true" : "false") << '\n';
  out << "# queries=" << r.queries.size() << " evaluated=" << r.evaluated_queries << '\n';
  char buf[128];
  out << "k AR@k\n";
  for (std::size_t k = 0; k < r.recall_at_k.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu %.6f\n", k + 1, r.recall_at_k[k]);
    out << buf;
  }
  out << "threshold precision recall\n";
  for (const auto& p : r.pr_curve) {
    std::snprintf(buf, sizeof buf, "%.9g %.6f %.6f\n", p.threshold, p.precision, p.recall);
    out << buf;
  }
  out << "query top1 distance correct\n";
  for (const auto& q : r.queries) {
    if (q.ranked.empty()) {
      out << q.query_id << " - - -\n";
      continue;
    }
    std::snprintf(buf, sizeof buf, "%.9g", q.ranked.front().distance);
    out << q.query_id << ' ' << q.ranked.front().scan_id << ' ' << buf << ' '
        << (q.correct.front() ? 1 : 0) << '\n';
  }
  return out.str();
}

/// Reads back the (k, AR@k) table and PR pairs of a formatted report.
struct ParsedEvalReport {
  std::vector<double> recall_at_k;
  std::vector<PrPoint> pr_curve;
};

inline ParsedEvalReport parse_eval_report(const std::string& text) {
  ParsedEvalReport p;
  std::istringstream in(text);
  std::string line;
  enum { None, Recall, Pr, Queries } section = None;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line == "k AR@k") { section = Recall; continue; }
    if (line == "threshold precision recall") { section = Pr; continue; }
    if (line == "query top1 distance correct") { section = Queries; continue; }
    std::istringstream ls(line);
    if (section == Recall) {
      std::size_t k = 0;
      double v = 0;
      if (!(ls >> k >> v)) throw IoError("eval report: bad recall line '" + line + "'");
      p.recall_at_k.push_back(v);
    } else if (section == Pr) {
      PrPoint pt;
      if (!(ls >> pt.threshold >> pt.precision >> pt.recall)) {
        throw IoError("eval report: bad PR line '" + line + "'");
      }
      p.pr_curve.push_back(pt);
    }
  }
  return p;
}

}  // namespace helios
