#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "disco/core.hpp"

namespace disco {

/// What a loader dropped while ingesting a file.
struct LoadStats {
  std::size_t duplicate_units = 0;
  std::size_t dropped_rows = 0;  // non-finite or unparseable values
};

/// Reads a tab-separated descriptor file (header `unit<TAB>f0<TAB>f1...`).
/// Duplicate unit ids keep the first occurrence; rows with non-finite or
/// unparseable values are dropped. Both policies are counted in `stats`.
DescriptorTable load_descriptor_table(const std::string& path,
                                      LoadStats* stats = nullptr);

/// Reads a tab-separated outcome file (header `unit<TAB>score`), same
/// policies as load_descriptor_table.
OutcomeTable load_outcome_table(const std::string& path,
                                LoadStats* stats = nullptr);

struct AlignStats {
  std::size_t dropped_descriptors = 0;
  std::size_t dropped_outcomes = 0;
};

/// Inner join on unit id (exact, case-sensitive), output ordered by unit id
/// ascending. Errors when the intersection is empty.
AlignedDataset align(const DescriptorTable& descriptors,
                     const OutcomeTable& outcomes,
                     AlignStats* stats = nullptr);

struct SyntheticSpec {
  enum class Kind { linear, cluster_hits };
  Kind kind = Kind::linear;
  Index n = 1000;
  Index q = 10;
  double noise_sd = 0.1;
  std::uint64_t seed = 0;
  // cluster_hits only:
  Index n_clusters = 8;
  double hit_cluster_fraction = 0.05;
};

SyntheticSpec::Kind parse_synthetic_kind(const std::string& name);
std::string to_string(SyntheticSpec::Kind kind);

/// A generated dataset together with its ground truth.
struct SyntheticDataset {
  AlignedDataset data;
  std::vector<bool> is_hit;  // cluster_hits: hit-cluster membership
  Vector y_clean;            // outcome before noise
  Vector weights;            // linear: the generating weight vector
};

/// linear: standard-normal features, y = w.t + noise with w drawn once per
/// seed on the unit sphere. cluster_hits: Gaussian blobs with one small,
/// far-away cluster whose outcomes are inflated so its members dominate the
/// top fraction of |y|.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Writes `<prefix>.descriptors.tsv`, `<prefix>.outcomes.tsv` and
/// `<prefix>.truth.tsv` (unit, is_hit, y_clean). Reals are written with 17
/// significant digits so a reload is bit-exact.
void write_dataset_files(const SyntheticDataset& dataset,
                         const std::string& prefix);

void write_descriptor_file(const DescriptorTable& table,
                           const std::string& path);
void write_outcome_file(const OutcomeTable& table, const std::string& path);

}  // namespace disco
