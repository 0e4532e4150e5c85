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

// Selective replay: old triples are activated only when they share a top-n
// component with a new triple, and replay updates touch only those shared
// components.

#ifndef DICGRL_CONTINUAL_HPP_
#define DICGRL_CONTINUAL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dicgrl/disentangle.hpp"
#include "dicgrl/graph_store.hpp"
#include "dicgrl/model.hpp"

namespace dicgrl {

struct ActivationRecord {
    Triple old_triple;
    Triple activated_by;
    int order = 1;
    ComponentSet common;
    std::vector<double> frozen_alpha;  // old triple's attention at the checkpoint

    double common_mass() const;
};

struct ActivationOptions {
    int order = 1;
    std::size_t memory_budget = 0;
};

// For every new train triple, its order-<=options.order neighbors in index
// whose checkpoint top-n set intersects the new triple's. One record per old
// triple (largest common set wins, first seen on ties), capped to the memory
// budget by summed common-set attention mass. Records come back in discovery
// order.
std::vector<ActivationRecord> activate_neighbors(const GraphPart& new_part, const AdjacencyIndex& index,
                                                 const Model& checkpoint, const ActivationOptions& options);

// Per-node updatable components for replay steps. Nodes without an entry have
// nothing updatable.
class ComponentMasks {
  public:
    ComponentMasks() = default;
    explicit ComponentMasks(std::size_t components) : components_(components) {}

    void mark(NodeId u, std::size_t k);
    bool allows(NodeId u, std::size_t k) const;
    // Every component of every node updatable.
    static ComponentMasks full(std::size_t components);
    bool is_full() const { return full_; }
    std::size_t components() const { return components_; }
    std::size_t node_count() const { return marks_.size(); }
    const std::unordered_map<NodeId, std::vector<std::uint8_t>>& marks() const { return marks_; }

  private:
    std::size_t components_ = 0;
    bool full_ = false;
    std::unordered_map<NodeId, std::vector<std::uint8_t>> marks_;
};

ComponentMasks build_masks(std::span<const ActivationRecord> records, std::size_t components);

// Zeroes (and un-touches) gradients of every node component the masks do not
// allow, and all attention-logit gradients. Relation embeddings pass through.
void masked_gradient_filter(const ComponentMasks& masks, DisentangledTable& table);

// CSV `new_triple,old_triple,order,common_components` using names.
void write_activation_csv(const std::string& path, std::span<const ActivationRecord> records,
                          const std::vector<std::string>& node_names, const std::vector<std::string>& relation_names);

}  // namespace dicgrl

#endif  // DICGRL_CONTINUAL_HPP_
