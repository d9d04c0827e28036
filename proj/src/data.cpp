#include "disco/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "disco/rng.hpp"

namespace disco {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::vector<std::string> make_unit_names(Index n) {
  int width = 1;
  for (Index v = n - 1; v >= 10; v /= 10) ++width;
  std::vector<std::string> units;
  units.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    std::ostringstream name;
    name << "u";
    name.width(width);
    name.fill('0');
    name << i;
    units.push_back(name.str());
  }
  return units;
}

struct ParsedRows {
  std::vector<std::string> units;
  std::vector<std::vector<double>> values;
};

/// Shared TSV ingestion: `path` must start with `unit<TAB>...` and every row
/// must have the header's column count. Value problems drop the row; shape
/// problems are errors.
ParsedRows load_rows(const std::string& path, std::size_t expected_cols,
                     const char* expected_header_tail, LoadStats* stats) {
  std::ifstream file(path);
  if (!file) throw DataError("cannot open " + path);

  std::string line;
  if (!std::getline(file, line)) throw DataError(path + ": empty file");
  line = strip_cr(line);
  const std::vector<std::string> header = split_tabs(line);
  if (header.empty() || header[0] != "unit" || header.size() < 2) {
    throw DataError(path + ":1: malformed header, expected 'unit<TAB>" +
                    expected_header_tail + "...'");
  }
  if (expected_cols != 0 && header.size() != expected_cols + 1) {
    throw DataError(path + ":1: expected " + std::to_string(expected_cols) +
                    " value columns");
  }
  const std::size_t n_cols = header.size() - 1;

  LoadStats local;
  ParsedRows rows;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(file, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != n_cols + 1) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected " + std::to_string(n_cols + 1) +
                      " columns, found " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": empty unit identifier");
    }

    std::vector<double> values(n_cols);
    bool usable = true;
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (!parse_double(fields[c + 1], values[c]) ||
          !std::isfinite(values[c])) {
        usable = false;
        break;
      }
    }
    if (!usable) {
      ++local.dropped_rows;
      continue;
    }
    if (!seen.insert(fields[0]).second) {
      ++local.duplicate_units;
      continue;
    }
    rows.units.push_back(fields[0]);
    rows.values.push_back(std::move(values));
  }

  if (rows.units.empty()) {
    throw DataError(path + ": zero usable data rows");
  }
  if (stats) *stats = local;
  return rows;
}

}  // namespace

DescriptorTable load_descriptor_table(const std::string& path,
                                      LoadStats* stats) {
  const ParsedRows rows = load_rows(path, 0, "f0<TAB>f1", stats);
  DescriptorTable table;
  table.units = rows.units;
  const Index n = static_cast<Index>(rows.values.size());
  const Index q = static_cast<Index>(rows.values.front().size());
  table.features.resize(n, q);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < q; ++j) {
      table.features(i, j) = rows.values[static_cast<std::size_t>(i)]
                                        [static_cast<std::size_t>(j)];
    }
  }
  return table;
}

OutcomeTable load_outcome_table(const std::string& path, LoadStats* stats) {
  const ParsedRows rows = load_rows(path, 1, "score", stats);
  OutcomeTable table;
  table.units = rows.units;
  table.outcomes.resize(static_cast<Index>(rows.values.size()));
  for (std::size_t i = 0; i < rows.values.size(); ++i) {
    table.outcomes[static_cast<Index>(i)] = rows.values[i][0];
  }
  return table;
}

AlignedDataset align(const DescriptorTable& descriptors,
                     const OutcomeTable& outcomes, AlignStats* stats) {
  std::map<std::string, Index> outcome_of;
  for (Index i = 0; i < outcomes.size(); ++i) {
    outcome_of.emplace(outcomes.units[static_cast<std::size_t>(i)], i);
  }

  // std::map iteration gives the ascending unit order directly.
  std::map<std::string, std::pair<Index, Index>> joined;
  for (Index i = 0; i < descriptors.size(); ++i) {
    const auto& unit = descriptors.units[static_cast<std::size_t>(i)];
    const auto it = outcome_of.find(unit);
    if (it != outcome_of.end()) {
      joined.emplace(unit, std::make_pair(i, it->second));
    }
  }
  if (joined.empty()) {
    throw DataError("align: descriptor and outcome tables share no units");
  }

  AlignedDataset out;
  out.units.reserve(joined.size());
  out.features.resize(static_cast<Index>(joined.size()), descriptors.dim());
  out.outcomes.resize(static_cast<Index>(joined.size()));
  Index row = 0;
  for (const auto& [unit, idx] : joined) {
    out.units.push_back(unit);
    out.features.row(row) = descriptors.features.row(idx.first);
    out.outcomes[row] = outcomes.outcomes[idx.second];
    ++row;
  }
  if (stats) {
    stats->dropped_descriptors =
        static_cast<std::size_t>(descriptors.size()) - joined.size();
    stats->dropped_outcomes =
        static_cast<std::size_t>(outcomes.size()) - joined.size();
  }
  return out;
}

SyntheticSpec::Kind parse_synthetic_kind(const std::string& name) {
  if (name == "linear") return SyntheticSpec::Kind::linear;
  if (name == "cluster_hits") return SyntheticSpec::Kind::cluster_hits;
  throw ConfigError("unknown synthetic kind: " + name);
}

std::string to_string(SyntheticSpec::Kind kind) {
  return kind == SyntheticSpec::Kind::linear ? "linear" : "cluster_hits";
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 10) throw ConfigError("generate_synthetic: n must be >= 10");
  if (spec.q < 1) throw ConfigError("generate_synthetic: q must be >= 1");
  if (spec.noise_sd < 0.0) {
    throw ConfigError("generate_synthetic: noise_sd must be >= 0");
  }

  SyntheticDataset out;
  out.data.units = make_unit_names(spec.n);
  out.data.descriptor_source = "synthetic:" + to_string(spec.kind);
  out.data.outcome_source = out.data.descriptor_source;
  out.data.features.resize(spec.n, spec.q);
  out.data.outcomes.resize(spec.n);
  out.y_clean.resize(spec.n);
  out.is_hit.assign(static_cast<std::size_t>(spec.n), false);

  Rng noise_rng(derive_seed(spec.seed, "observation_noise"));

  if (spec.kind == SyntheticSpec::Kind::linear) {
    Rng weight_rng(derive_seed(spec.seed, "weights"));
    Rng feature_rng(derive_seed(spec.seed, "features"));
    Vector w(spec.q);
    for (Index j = 0; j < spec.q; ++j) w[j] = weight_rng.normal();
    w /= w.norm();  // unit-scale signal keeps MSE comparable across q
    out.weights = w;

    for (Index i = 0; i < spec.n; ++i) {
      for (Index j = 0; j < spec.q; ++j) {
        out.data.features(i, j) = feature_rng.normal();
      }
      out.y_clean[i] = out.data.features.row(i) * w;
      out.data.outcomes[i] = out.y_clean[i] + noise_rng.normal(0.0, spec.noise_sd);
    }
    return out;
  }

  // cluster_hits
  if (spec.n_clusters < 2) {
    throw ConfigError("generate_synthetic: cluster_hits needs >= 2 clusters");
  }
  if (!(spec.hit_cluster_fraction > 0.0 && spec.hit_cluster_fraction <= 0.5)) {
    throw ConfigError(
        "generate_synthetic: hit_cluster_fraction must be in (0, 0.5]");
  }
  Rng layout_rng(derive_seed(spec.seed, "cluster_layout"));
  Rng feature_rng(derive_seed(spec.seed, "features"));

  const Index n_hit = std::max<Index>(
      1, static_cast<Index>(std::llround(spec.hit_cluster_fraction *
                                         static_cast<double>(spec.n))));

  // Ordinary clusters sit near the origin; the hit cluster sits well outside
  // their span so its outcomes stay poorly constrained until sampled.
  const double spread = 2.0;
  Matrix centers(spec.n_clusters, spec.q);
  for (Index c = 1; c < spec.n_clusters; ++c) {
    for (Index j = 0; j < spec.q; ++j) {
      centers(c, j) = layout_rng.normal(0.0, spread);
    }
  }
  Vector direction(spec.q);
  for (Index j = 0; j < spec.q; ++j) direction[j] = layout_rng.normal();
  direction /= direction.norm();
  centers.row(0) =
      (direction * 6.0 * spread * std::sqrt(static_cast<double>(spec.q)))
          .transpose();

  Vector cluster_mean(spec.n_clusters);
  cluster_mean[0] = 10.0 + 20.0 * spec.noise_sd;  // the inflated hit outcome
  for (Index c = 1; c < spec.n_clusters; ++c) {
    cluster_mean[c] = layout_rng.normal(0.0, 0.5);
  }

  std::vector<Index> assignment(static_cast<std::size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) {
    assignment[static_cast<std::size_t>(i)] =
        i < n_hit ? 0 : 1 + (i - n_hit) % (spec.n_clusters - 1);
  }
  layout_rng.shuffle(assignment);

  for (Index i = 0; i < spec.n; ++i) {
    const Index c = assignment[static_cast<std::size_t>(i)];
    for (Index j = 0; j < spec.q; ++j) {
      out.data.features(i, j) = centers(c, j) + feature_rng.normal(0.0, 0.5);
    }
    out.y_clean[i] = cluster_mean[c];
    out.data.outcomes[i] = out.y_clean[i] + noise_rng.normal(0.0, spec.noise_sd);
    out.is_hit[static_cast<std::size_t>(i)] = (c == 0);
  }
  return out;
}

void write_descriptor_file(const DescriptorTable& table,
                           const std::string& path) {
  std::ofstream file(path);
  if (!file) throw DataError("cannot write " + path);
  file << "unit";
  for (Index j = 0; j < table.dim(); ++j) file << "\tf" << j;
  file << "\n";
  for (Index i = 0; i < table.size(); ++i) {
    file << table.units[static_cast<std::size_t>(i)];
    for (Index j = 0; j < table.dim(); ++j) {
      file << '\t' << format_real(table.features(i, j));
    }
    file << "\n";
  }
}

void write_outcome_file(const OutcomeTable& table, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw DataError("cannot write " + path);
  file << "unit\tscore\n";
  for (Index i = 0; i < table.size(); ++i) {
    file << table.units[static_cast<std::size_t>(i)] << '\t'
         << format_real(table.outcomes[i]) << "\n";
  }
}

void write_dataset_files(const SyntheticDataset& dataset,
                         const std::string& prefix) {
  DescriptorTable desc{dataset.data.units, dataset.data.features};
  write_descriptor_file(desc, prefix + ".descriptors.tsv");
  OutcomeTable out{dataset.data.units, dataset.data.outcomes};
  write_outcome_file(out, prefix + ".outcomes.tsv");

  const std::string truth_path = prefix + ".truth.tsv";
  std::ofstream truth(truth_path);
  if (!truth) throw DataError("cannot write " + truth_path);
  truth << "unit\tis_hit\ty_clean\n";
  for (Index i = 0; i < dataset.data.size(); ++i) {
    truth << dataset.data.units[static_cast<std::size_t>(i)] << '\t'
          << (dataset.is_hit[static_cast<std::size_t>(i)] ? 1 : 0) << '\t'
          << format_real(dataset.y_clean[i]) << "\n";
  }
}

}  // namespace disco
