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

#ifndef DICGRL_DISENTANGLE_HPP_
#define DICGRL_DISENTANGLE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dicgrl/common.hpp"
#include "dicgrl/grad.hpp"
#include "dicgrl/graph_store.hpp"

namespace dicgrl {

// Component indices, ascending.
using ComponentSet = std::vector<std::size_t>;

struct TableShape {
    std::size_t nodes = 0;
    std::size_t relations = 0;
    std::size_t components = 1;      // K
    std::size_t component_dim = 1;   // d_c; node dimension d = K * d_c
    std::size_t top_n = 1;           // n
    bool relation_embeddings = true; // link prediction only
    bool attention_logits = true;    // per-relation logits (kg attention)
};

// Node embeddings split into K components of d_c values each, relation
// embeddings of n * d_c values and per-relation attention logits.
class DisentangledTable {
  public:
    DisentangledTable() = default;
    explicit DisentangledTable(const TableShape& shape);

    const TableShape& shape() const { return shape_; }
    std::size_t components() const { return shape_.components; }
    std::size_t component_dim() const { return shape_.component_dim; }
    std::size_t top_n() const { return shape_.top_n; }
    std::size_t node_dim() const { return shape_.components * shape_.component_dim; }
    std::size_t relation_dim() const { return shape_.top_n * shape_.component_dim; }
    bool has_relation_embeddings() const { return shape_.relation_embeddings; }
    bool has_attention_logits() const { return shape_.attention_logits; }

    std::span<const double> component(NodeId u, std::size_t k) const {
        return node_components.row(u).subspan(k * shape_.component_dim, shape_.component_dim);
    }
    std::span<const double> node(NodeId u) const { return node_components.row(u); }
    std::span<const double> relation(RelationId r) const { return relation_embeddings.row(r); }
    std::span<const double> logits(RelationId r) const { return attention_logits.row(r); }
    std::size_t component_offset(NodeId u, std::size_t k) const {
        return static_cast<std::size_t>(u) * node_dim() + k * shape_.component_dim;
    }

    Parameter node_components;      // nodes x (K * d_c)
    Parameter relation_embeddings;  // relations x (n * d_c)
    Parameter attention_logits;     // relations x K

  private:
    TableShape shape_;
};

// Node components and relation embeddings uniform in [-6/sqrt(d_c), 6/sqrt(d_c)].
// Attention logits are zero unless logit_range > 0, in which case they are
// uniform in [-logit_range, logit_range].
DisentangledTable init_table(const TableShape& shape, std::uint64_t seed, double logit_range = 0.0);

struct AttentionWeights {
    std::vector<double> alpha;
    ComponentSet selected;
};

// The n largest entries, ties going to the smaller index; returned ascending.
ComponentSet select_top(std::span<const double> alpha, std::size_t n);

enum class AttentionVariant { kg_logits, alpha1, alpha2, ne_pair };

AttentionVariant parse_attention_variant(const std::string& name);
std::string to_string(AttentionVariant variant);

// Weight row for pair attention: 1 x 2*d_c ([u^k ; v^k]) for alpha1/ne_pair,
// 1 x (2*d_c + n*d_c) laid out [u^k ; r ; v^k] for alpha2.
struct PairAttentionParams {
    Parameter weight;
};

PairAttentionParams init_pair_attention(const TableShape& shape, AttentionVariant variant, std::uint64_t seed);

AttentionWeights relation_attention_kg(RelationId r, const DisentangledTable& table);
AttentionWeights pair_attention_ne(NodeId u, NodeId v, const DisentangledTable& table,
                                   const PairAttentionParams& params);
// alpha1 ignores r; alpha2 includes the relation embedding. Throws
// std::invalid_argument when the table has no relation embeddings.
AttentionWeights triple_attention_variant(const Triple& t, const DisentangledTable& table,
                                          const PairAttentionParams& params, AttentionVariant variant);

// Dispatches on variant (ne_pair uses the head/tail pair of t).
AttentionWeights attention_for(const Triple& t, const DisentangledTable& table, const PairAttentionParams& params,
                               AttentionVariant variant);

// The same attention distribution recorded on a tape, for gradient flow into
// logits / pair weights / node components.
Var attention_on_tape(Tape& tape, const Triple& t, DisentangledTable& table, PairAttentionParams& params,
                      AttentionVariant variant);

// Selected components of u concatenated in ascending index order (length n * d_c).
std::vector<double> gather_top(const DisentangledTable& table, NodeId u, const ComponentSet& selected);
Var gather_top(Tape& tape, DisentangledTable& table, NodeId u, const ComponentSet& selected);

// CSV rows `relation_name,alpha_1,...,alpha_K` from the per-relation logits.
void write_attention_csv(const std::string& path, const DisentangledTable& table,
                         const std::vector<std::string>& relation_names);

}  // namespace dicgrl

#endif  // DICGRL_DISENTANGLE_HPP_
