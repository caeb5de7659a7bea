#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "helios/error.hpp"
#include "helios/overlap.hpp"
#include "helios/random.hpp"

namespace helios {

enum class PairClass { Positive, SemiPositive, Negative };

inline std::string_view to_string(PairClass c) {
  switch (c) {
    case PairClass::Positive:
      return "positive";
    case PairClass::SemiPositive:
      return "semi-positive";
    case PairClass::Negative:
      return "negative";
  }
  return "unknown";
}

/// Positive above 0.5, semi-positive in (0, 0.5], negative at exactly 0.
inline PairClass classify_pair(double overlap) {
  if (!(overlap >= 0.0 && overlap <= 1.0)) {
    throw InvalidParameter("overlap " + std::to_string(overlap) + " outside [0, 1]");
  }
  if (overlap > 0.5) return PairClass::Positive;
  if (overlap > 0.0) return PairClass::SemiPositive;
  return PairClass::Negative;
}

struct TrainingTuple {
  std::string query_id;
  std::vector<std::string> positive_ids;
  std::vector<std::string> semi_positive_ids;
  std::vector<std::string> negative_ids;
  /// Overlap between the query and every listed id.
  std::map<std::string, double> overlaps;

  friend bool operator==(const TrainingTuple&, const TrainingTuple&) = default;
};

struct TupleCounts {
  std::size_t positives = 2;
  std::size_t semi_positives = 2;
  std::size_t negatives = 8;
};

struct MiningOptions {
  TupleCounts counts;
  /// When false, candidates are restricted to the query's sensor tag.
  bool mix_sensors = true;
  std::map<std::string, SensorTag> sensor_tags;
};

/// One tuple per query that has at least one positive and one negative.
/// Each class list is a seeded sample without replacement, kept in matrix order.
inline std::vector<TrainingTuple> mine_tuples(const OverlapMatrix& matrix,
                                              const MiningOptions& options, std::uint64_t seed) {
  const auto& c = options.counts;
  if (c.positives < 1 || c.semi_positives < 1 || c.negatives < 1) {
    throw InvalidParameter("per-class tuple counts must be >= 1");
  }
  const auto tag_of = [&](const std::string& id) {
    auto it = options.sensor_tags.find(id);
    if (it == options.sensor_tags.end()) {
      throw ContractError("no sensor tag for scan '" + id + "' (needed when mix_sensors=false)");
    }
    return it->second;
  };

  Rng rng(seed);
  std::vector<TrainingTuple> tuples;
  const auto& ids = matrix.scan_ids();
  for (std::size_t q = 0; q < matrix.size(); ++q) {
    std::vector<std::size_t> pools[3];
    for (std::size_t j = 0; j < matrix.size(); ++j) {
      if (j == q) continue;
      if (!options.mix_sensors && tag_of(ids[j]) != tag_of(ids[q])) continue;
      pools[static_cast<int>(classify_pair(matrix.value(q, j)))].push_back(j);
    }
    auto& pos = pools[static_cast<int>(PairClass::Positive)];
    auto& semi = pools[static_cast<int>(PairClass::SemiPositive)];
    auto& neg = pools[static_cast<int>(PairClass::Negative)];
    if (pos.empty() || neg.empty()) continue;

    TrainingTuple t;
    t.query_id = ids[q];
    const auto take = [&](const std::vector<std::size_t>& pool, std::size_t k,
                          std::vector<std::string>& out) {
      auto picked = rng.sample_without_replacement(pool.size(), k);
      std::sort(picked.begin(), picked.end());
      for (std::size_t p : picked) {
        out.push_back(ids[pool[p]]);
        t.overlaps[ids[pool[p]]] = matrix.value(q, pool[p]);
      }
    };
    take(pos, c.positives, t.positive_ids);
    take(semi, c.semi_positives, t.semi_positive_ids);
    take(neg, c.negatives, t.negative_ids);
    tuples.push_back(std::move(t));
  }
  if (tuples.empty()) {
    throw EmptyMining("no query has both a positive and a negative candidate");
  }
  return tuples;
}

// query | p:a,b | s:c | n:d,e | a=0.9 b=0.7 c=0.2 d=0 e=0
inline std::string format_tuples(const std::vector<TrainingTuple>& tuples,
                                 const std::vector<std::string>& header = {}) {
  std::ostringstream out;
  out << "# helios training tuples\n";
  for (const auto& h : header) out << "# " << h << '\n';
  const auto list = [&](char tag, const std::vector<std::string>& v) {
    out << " | " << tag << ':';
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  };
  char buf[32];
  for (const auto& t : tuples) {
    out << t.query_id;
    list('p', t.positive_ids);
    list('s', t.semi_positive_ids);
    list('n', t.negative_ids);
    out << " |";
    for (const auto& [id, v] : t.overlaps) {
      std::snprintf(buf, sizeof buf, "%.6f", v);
      out << ' ' << id << '=' << buf;
    }
    out << '\n';
  }
  return out.str();
}

inline std::vector<TrainingTuple> parse_tuples(const std::string& text) {
  std::vector<TrainingTuple> tuples;
  std::istringstream in(text);
  std::string line;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(' ');
    const auto e = s.find_last_not_of(' ');
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, '|')) fields.push_back(trim(f));
    if (fields.size() != 5) throw IoError("tuple file: malformed line '" + line + "'");
    TrainingTuple t;
    t.query_id = fields[0];
    std::vector<std::string>* lists[3] = {&t.positive_ids, &t.semi_positive_ids, &t.negative_ids};
    const char tags[3] = {'p', 's', 'n'};
    for (int k = 0; k < 3; ++k) {
      const auto& field = fields[1 + k];
      if (field.size() < 2 || field[0] != tags[k] || field[1] != ':') {
        throw IoError("tuple file: expected '" + std::string(1, tags[k]) + ":' in '" + line + "'");
      }
      std::istringstream ids(field.substr(2));
      std::string id;
      while (std::getline(ids, id, ',')) {
        if (!id.empty()) lists[k]->push_back(id);
      }
    }
    std::istringstream ov(fields[4]);
    std::string kv;
    while (ov >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw IoError("tuple file: bad overlap entry '" + kv + "'");
      t.overlaps[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    }
    tuples.push_back(std::move(t));
  }
  return tuples;
}

}  // namespace helios
