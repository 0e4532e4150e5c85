/** Copyright 2026 The dicgrl Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * 	http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DICGRL_EVALUATOR_HPP_
#define DICGRL_EVALUATOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dicgrl/graph_store.hpp"
#include "dicgrl/model.hpp"

namespace dicgrl {

struct RankResult {
    Triple query;
    std::size_t head_rank = 0;
    std::size_t tail_rank = 0;
};

// Entities [0, nodes) are ranking candidates; relations [0, relations) are known.
struct CandidatePool {
    std::size_t nodes = 0;
    std::size_t relations = 0;
};

// Higher is more plausible.
using ValidityFn = std::function<double(const Triple&)>;

// Filtered head and tail ranks of query: 1 + the number of non-filtered
// corruptions scoring strictly better. Returns nullopt when the query mentions
// an entity or relation outside the pool.
std::optional<RankResult> filtered_rank(const Triple& query, const ValidityFn& validity, const TripleSet& filter,
                                        const CandidatePool& pool);

struct RankOutcome {
    std::vector<RankResult> results;  // in query order
    std::size_t skipped = 0;          // unknown-entity queries
};

// Ranks every query against model. threads == 0 reads DICGRL_THREADS (default 1).
RankOutcome rank_queries(const Model& model, std::span<const Triple> queries, const TripleSet& filter,
                         const CandidatePool& pool, std::size_t threads = 0);

struct LinkMetrics {
    double mrr = 0.0;
    double hits10 = 0.0;
    std::size_t ranks = 0;
};

// Head and tail ranks pooled. Throws std::invalid_argument on empty input.
LinkMetrics link_metrics(std::span<const RankResult> results);

// Fraction of nodes whose predicted class equals labels[u]. Throws
// std::invalid_argument on an empty node set.
double node_accuracy(const Model& model, std::span<const NodeId> nodes, std::span<const std::uint32_t> labels,
                     const AdjacencyIndex& graph);

struct Aggregate {
    double whole = 0.0;
    double average = 0.0;
};

Aggregate aggregate(std::span<const double> per_part, double union_value);

struct PartMetrics {
    std::size_t part = 0;
    double mrr = 0.0;
    double hits10 = 0.0;
    double accuracy = 0.0;
    std::size_t n_queries = 0;
};

// Metrics after training on part `part`, evaluated on the query sets of parts 0..part.
struct MetricsReport {
    std::size_t part = 0;
    std::vector<PartMetrics> per_part;
    Aggregate mrr;
    Aggregate hits10;
    Aggregate accuracy;
    std::size_t n_queries = 0;
    std::size_t skipped = 0;
    double runtime_s = 0.0;
};

MetricsReport evaluate_stream(const Model& model, const StreamDataset& data, std::size_t part,
                              std::size_t threads = 0);

// Order-sensitive hash of every parameter value bit pattern.
std::uint64_t parameter_checksum(const Model& model);

}  // namespace dicgrl

#endif  // DICGRL_EVALUATOR_HPP_
