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

#include "dicgrl/continual.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace dicgrl {

double ActivationRecord::common_mass() const {
    double mass = 0.0;
    for (std::size_t k : common) mass += frozen_alpha.at(k);
    return mass;
}

std::vector<ActivationRecord> activate_neighbors(const GraphPart& new_part, const AdjacencyIndex& index,
                                                 const Model& checkpoint, const ActivationOptions& options) {
    std::vector<ActivationRecord> records;
    if (options.memory_budget == 0 || index.triples().empty()) return records;

    // Old-triple attention under the checkpoint, computed once per part.
    std::unordered_map<Triple, AttentionWeights, TripleHash> old_attention;
    auto attention_of_old = [&](const Triple& t) -> const AttentionWeights& {
        auto it = old_attention.find(t);
        if (it == old_attention.end()) it = old_attention.emplace(t, checkpoint.attention(t)).first;
        return it->second;
    };

    std::unordered_map<Triple, std::size_t, TripleHash> position;
    for (const Triple& t : new_part.train) {
        const AttentionWeights fresh = checkpoint.attention(t);
        const auto first = triple_neighbors(t, index, 1);
        std::vector<Triple> candidates = first;
        if (options.order == 2) candidates = triple_neighbors(t, index, 2);
        for (const Triple& old : candidates) {
            const AttentionWeights& prior = attention_of_old(old);
            ComponentSet common;
            std::set_intersection(fresh.selected.begin(), fresh.selected.end(), prior.selected.begin(),
                                  prior.selected.end(), std::back_inserter(common));
            if (common.empty()) continue;
            const int order = std::binary_search(first.begin(), first.end(), old) ? 1 : 2;
            auto it = position.find(old);
            if (it == position.end()) {
                position.emplace(old, records.size());
                records.push_back(ActivationRecord{old, t, order, std::move(common), prior.alpha});
            } else if (common.size() > records[it->second].common.size()) {
                ActivationRecord& rec = records[it->second];
                rec.activated_by = t;
                rec.order = order;
                rec.common = std::move(common);
            }
        }
    }

    if (records.size() > options.memory_budget) {
        std::vector<std::size_t> order(records.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return records[a].common_mass() > records[b].common_mass();
        });
        order.resize(options.memory_budget);
        std::sort(order.begin(), order.end());
        std::vector<ActivationRecord> kept;
        kept.reserve(order.size());
        for (std::size_t i : order) kept.push_back(std::move(records[i]));
        records = std::move(kept);
    }
    return records;
}

void ComponentMasks::mark(NodeId u, std::size_t k) {
    auto& row = marks_[u];
    if (row.empty()) row.assign(components_, 0);
    row.at(k) = 1;
}

bool ComponentMasks::allows(NodeId u, std::size_t k) const {
    if (full_) return true;
    auto it = marks_.find(u);
    return it != marks_.end() && it->second.at(k) != 0;
}

ComponentMasks ComponentMasks::full(std::size_t components) {
    ComponentMasks masks(components);
    masks.full_ = true;
    return masks;
}

ComponentMasks build_masks(std::span<const ActivationRecord> records, std::size_t components) {
    ComponentMasks masks(components);
    for (const ActivationRecord& rec : records) {
        for (std::size_t k : rec.common) {
            masks.mark(rec.old_triple.head, k);
            masks.mark(rec.old_triple.tail, k);
        }
    }
    return masks;
}

void masked_gradient_filter(const ComponentMasks& masks, DisentangledTable& table) {
    if (!masks.is_full()) {
        const std::size_t K = table.components();
        const std::size_t dc = table.component_dim();
        const std::size_t nodes = table.node_components.rows();
        auto touched = table.node_components.touched();
        for (std::size_t u = 0; u < nodes; ++u) {
            for (std::size_t k = 0; k < K; ++k) {
                if (masks.allows(static_cast<NodeId>(u), k)) continue;
                const std::size_t base = table.component_offset(static_cast<NodeId>(u), k);
                for (std::size_t i = 0; i < dc; ++i)
                    if (touched[base + i]) table.node_components.drop_grad(base + i);
            }
        }
    }
    table.attention_logits.zero_grad();
}

void write_activation_csv(const std::string& path, std::span<const ActivationRecord> records,
                          const std::vector<std::string>& node_names, const std::vector<std::string>& relation_names) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    auto name_of = [](const std::vector<std::string>& names, std::uint32_t id) {
        return id < names.size() ? names[id] : std::to_string(id);
    };
    auto triple_text = [&](const Triple& t) {
        return "\"(" + name_of(node_names, t.head) + " " + name_of(relation_names, t.relation) + " " +
               name_of(node_names, t.tail) + ")\"";
    };
    out << "new_triple,old_triple,order,common_components\n";
    for (const ActivationRecord& rec : records) {
        out << triple_text(rec.activated_by) << ',' << triple_text(rec.old_triple) << ',' << rec.order << ",\"";
        for (std::size_t i = 0; i < rec.common.size(); ++i) out << (i ? " " : "") << rec.common[i];
        out << "\"\n";
    }
}

}  // namespace dicgrl
