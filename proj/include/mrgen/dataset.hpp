#pragma once

#include "mrgen/distances.hpp"
#include "mrgen/graph.hpp"
#include "mrgen/seriation.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mrgen {

/// One node ordering plus how it was produced.
struct ReorderingRecord {
    Permutation order;
    /// Method token: a registered method name, or "external:<name>" for
    /// orderings imported from other tools.
    std::string method;
    DistanceSpec distance;
    std::uint64_t seed = 0;
    bool reversed = false;
};

bool is_known_method_token(std::string_view token);

struct Dataset {
    inline static constexpr int kSchemaVersion = 1;

    std::uint64_t graph_digest = 0;
    std::size_t n = 0;
    std::string graph_name;
    std::vector<ReorderingRecord> records;
    bool unique = false;

    std::size_t size() const noexcept { return records.size(); }
};

struct FoldSplit {
    std::size_t k = 0;
    std::vector<std::size_t> assignment; // record index -> fold id
    std::uint64_t trial_seed = 0;

    std::vector<std::size_t> fold(std::size_t f) const;
    std::vector<std::size_t> complement(std::size_t f) const;
};

/// Spearman rank correlation between the position vectors of two orderings.
double spearman(const Permutation& a, const Permutation& b);

/// Spectral ordering of the shortest-path distances; the reference for
/// reversal canonicalization.
Permutation reference_ordering(const Graph& g);

/// Returns p or its reverse, whichever correlates better with `ref`; ties keep p.
std::pair<Permutation, bool> canonicalize_reversal(const Permutation& p, const Permutation& ref);

/// 64-bit hash of the row-major bit-packed matrix.
std::uint64_t matrix_hash(const AdjacencyMatrix& a);

/// Keeps the first record for each distinct reordered matrix.
Dataset dedup(const Graph& g, std::vector<ReorderingRecord> records);

struct BuildReport {
    std::size_t jobs = 0;
    std::size_t raw_records = 0;
    std::vector<std::string> failures;
};

/// Random initial ordering applied to D before a method runs. Depends on
/// `seed` only.
Permutation initial_ordering(std::size_t n, std::uint64_t seed);

/// Runs every (distance, method, seed) job, canonicalizes reversals and
/// deduplicates. Failed jobs are skipped and listed in `report`; throws
/// only if every job fails.
Dataset build_dataset(const Graph& g, const std::vector<Method>& methods,
                      const std::vector<DistanceSpec>& distances, const std::vector<std::uint64_t>& seeds,
                      BuildReport* report = nullptr, std::size_t workers = 0);

/// Seeded uniform partition into k folds whose sizes differ by at most one.
FoldSplit split_folds(const Dataset& dataset, std::size_t k, std::uint64_t trial_seed);

/// Seeded subset of `count` records (original relative order kept).
Dataset subsample(const Dataset& dataset, std::size_t count, std::uint64_t seed);

std::string to_jsonl(const Dataset& dataset);
Dataset parse_jsonl(std::string_view text);
void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

/// Throws ValidationError unless the dataset belongs to `g`.
void check_dataset_matches(const Dataset& dataset, const Graph& g);

/// A_P for every record, in record order.
std::vector<AdjacencyMatrix> reordered_matrices(const Graph& g, const Dataset& dataset);

} // namespace mrgen
