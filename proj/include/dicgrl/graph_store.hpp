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

#ifndef DICGRL_GRAPH_STORE_HPP_
#define DICGRL_GRAPH_STORE_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dicgrl/common.hpp"

namespace dicgrl {

struct Triple {
    NodeId head = 0;
    RelationId relation = 0;
    NodeId tail = 0;

    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept {
        std::uint64_t x = (static_cast<std::uint64_t>(t.head) << 32) ^ t.tail;
        x ^= static_cast<std::uint64_t>(t.relation) * 0x9E3779B97F4A7C15ULL;
        x ^= x >> 29;
        x *= 0xBF58476D1CE4E5B9ULL;
        return static_cast<std::size_t>(x ^ (x >> 32));
    }
};

using TripleSet = std::unordered_set<Triple, TripleHash>;

enum class TaskMode { link_prediction, node_classification };

struct GraphPart {
    std::size_t index = 0;
    std::vector<Triple> train;
    std::vector<Triple> validation;
    std::vector<Triple> query;
    // Node-classification streams only; labels live in StreamDataset::labels.
    std::vector<NodeId> train_nodes;
    std::vector<NodeId> validation_nodes;
    std::vector<NodeId> query_nodes;
};

// Ids are numbered in stream order: the nodes (relations) first seen in
// parts 0..i occupy the prefix [0, cumulative_nodes[i]).
struct StreamDataset {
    TaskMode mode = TaskMode::link_prediction;
    std::vector<GraphPart> parts;
    std::size_t node_count = 0;
    std::size_t relation_count = 0;
    std::vector<std::size_t> cumulative_nodes;
    std::vector<std::size_t> cumulative_relations;
    std::vector<std::string> node_names;
    std::vector<std::string> relation_names;
    // Node-classification streams only.
    std::vector<std::vector<double>> features;
    std::vector<std::uint32_t> labels;
    std::size_t class_count = 0;

    // Checks the dataset invariants, throwing DataError on the first violation.
    void validate() const;
    // Every triple of every split of parts 0..upto.
    TripleSet known_triples(std::size_t upto) const;
};

// Node incidence lists (CSR layout) over a fixed triple list.
class AdjacencyIndex {
  public:
    AdjacencyIndex() = default;
    explicit AdjacencyIndex(std::vector<Triple> triples);

    std::span<const Triple> triples() const { return triples_; }
    std::size_t node_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    // Positions into triples() of the triples incident to u; empty for unknown ids.
    std::span<const std::uint32_t> incident(NodeId u) const;
    std::vector<Triple> incident_triples(NodeId u) const;

  private:
    std::vector<Triple> triples_;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> entries_;
};

// Index over the train sets of parts 0..upto.
AdjacencyIndex build_adjacency(std::span<const GraphPart> parts, std::size_t upto);

// Sorted, duplicate-free; never contains t. order must be 1 or 2.
std::vector<Triple> triple_neighbors(const Triple& t, const AdjacencyIndex& index, int order);

// Sorted; always contains u itself.
std::vector<NodeId> node_neighbors(NodeId u, const AdjacencyIndex& index);

// Name <-> dense id dictionary, ids assigned in first-appearance order.
class Vocabulary {
  public:
    std::uint32_t intern(std::string_view name);
    // Throws DataError for unknown names.
    std::uint32_t at(std::string_view name) const;
    bool contains(std::string_view name) const;
    const std::string& name(std::uint32_t id) const { return names_.at(id); }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

  private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

// Tab-separated head/relation/tail names, one triple per line.
std::vector<Triple> read_triple_file(const std::string& path, Vocabulary& nodes, Vocabulary& relations);
void write_triple_file(const std::string& path, std::span<const Triple> triples,
                       const std::vector<std::string>& node_names,
                       const std::vector<std::string>& relation_names);
// Sidecar dictionary: `name<TAB>id` per line.
void write_dictionary(const std::string& path, const std::vector<std::string>& names);
std::vector<std::string> read_dictionary(const std::string& path);

}  // namespace dicgrl

#endif  // DICGRL_GRAPH_STORE_HPP_
