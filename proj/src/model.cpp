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

#include "dicgrl/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace dicgrl {

ScorerKind parse_scorer(const std::string& name) {
    if (name == "transe") return ScorerKind::transe;
    if (name == "convkb") return ScorerKind::convkb;
    if (name == "gat") return ScorerKind::gat;
    throw ConfigError("unknown scorer '" + name + "'");
}

std::string to_string(ScorerKind kind) {
    switch (kind) {
        case ScorerKind::transe: return "transe";
        case ScorerKind::convkb: return "convkb";
        case ScorerKind::gat: return "gat";
    }
    return "?";
}

void ModelConfig::validate(TaskMode mode) const {
    if (components < 1) throw ConfigError("components (K) must be >= 1");
    if (top_n < 1 || top_n > components) throw ConfigError("top_n (n) must be in [1, K]");
    if (mode == TaskMode::link_prediction && (dim == 0 || dim % components != 0))
        throw ConfigError("dim (d) must be a positive multiple of K");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (beta < 0.0) throw ConfigError("beta must be >= 0");
    if (negatives < 1) throw ConfigError("negatives must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (order != 1 && order != 2) throw ConfigError("order must be 1 or 2");
    if (norm_p != 1 && norm_p != 2) throw ConfigError("norm_p must be 1 or 2");
    if (logit_init < 0.0) throw ConfigError("logit_init must be >= 0");
    if (ewc_lambda < 0.0) throw ConfigError("ewc_lambda must be >= 0");
    if (mode == TaskMode::link_prediction) {
        if (scorer == ScorerKind::gat) throw ConfigError("the gat scorer needs a node-classification stream");
        if (attention == AttentionVariant::ne_pair) throw ConfigError("ne-pair attention needs node classification");
        if (scorer == ScorerKind::convkb && filters < 1) throw ConfigError("convkb needs >= 1 filter");
    } else {
        if (scorer != ScorerKind::gat) throw ConfigError("node classification requires the gat scorer");
        if (attention != AttentionVariant::ne_pair) throw ConfigError("node classification requires ne-pair attention");
    }
}

Model::Model(const ModelConfig& config, std::size_t nodes, std::size_t relations)
    : config_(config), mode_(TaskMode::link_prediction) {
    config_.validate(mode_);
    TableShape shape;
    shape.nodes = nodes;
    shape.relations = relations;
    shape.components = config.components;
    shape.component_dim = config.component_dim();
    shape.top_n = config.top_n;
    shape.relation_embeddings = true;
    shape.attention_logits = config.attention == AttentionVariant::kg_logits;
    table = init_table(shape, derive_seed(config.seed, 1), config.logit_init);
    pair_attention = init_pair_attention(shape, config.attention, derive_seed(config.seed, 2));
    if (config.scorer == ScorerKind::convkb)
        convkb = init_convkb(config.filters, table.relation_dim(), derive_seed(config.seed, 3));
}

Model::Model(const ModelConfig& config, std::size_t nodes, std::size_t classes,
             const std::vector<std::vector<double>>& features)
    : config_(config), mode_(TaskMode::node_classification) {
    config_.validate(mode_);
    if (features.size() != nodes) throw DataError("node features missing for node classification");
    std::size_t width = 0;
    for (const auto& f : features) width = std::max(width, f.size());
    if (width == 0) throw DataError("node features are empty");
    const std::size_t K = config.components;
    const std::size_t padded = (width + K - 1) / K * K;
    config_.dim = padded;
    TableShape shape;
    shape.nodes = nodes;
    shape.relations = 0;
    shape.components = K;
    shape.component_dim = padded / K;
    shape.top_n = config.top_n;
    shape.relation_embeddings = false;
    shape.attention_logits = false;
    table = DisentangledTable(shape);
    for (std::size_t u = 0; u < nodes; ++u) {
        auto row = table.node_components.row(u);
        std::copy(features[u].begin(), features[u].end(), row.begin());
    }
    pair_attention = init_pair_attention(shape, AttentionVariant::ne_pair, derive_seed(config.seed, 2));
    gat = init_gat(K, shape.component_dim, shape.component_dim, derive_seed(config.seed, 4));
    classifier = init_classifier(classes, padded, derive_seed(config.seed, 5));
}

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out;
    for (Parameter* p : {&table.node_components, &table.relation_embeddings, &table.attention_logits,
                         &pair_attention.weight, &convkb.filters, &convkb.output, &gat.attention, &gat.transform,
                         &classifier.weight})
        if (p->size() > 0) out.push_back(p);
    return out;
}

std::vector<const Parameter*> Model::parameters() const {
    std::vector<const Parameter*> out;
    for (const Parameter* p : {&table.node_components, &table.relation_embeddings, &table.attention_logits,
                               &pair_attention.weight, &convkb.filters, &convkb.output, &gat.attention,
                               &gat.transform, &classifier.weight})
        if (p->size() > 0) out.push_back(p);
    return out;
}

std::vector<Parameter*> Model::attention_parameters() {
    std::vector<Parameter*> out;
    for (Parameter* p : {&table.attention_logits, &pair_attention.weight})
        if (p->size() > 0) out.push_back(p);
    return out;
}

AttentionWeights Model::attention(const Triple& t) const {
    return attention_for(t, table, pair_attention, config_.attention);
}

double Model::validity(const Triple& t, const ComponentSet& selected) const {
    const auto u = gather_top(table, t.head, selected);
    const auto v = gather_top(table, t.tail, selected);
    const auto r = table.relation(t.relation);
    if (config_.scorer == ScorerKind::convkb) return convkb_score(u, r, v, convkb);
    return -transe_score(u, r, v, config_.norm_p);
}

Var Model::validity(Tape& tape, const Triple& t, const ComponentSet& selected) {
    Var u = gather_top(tape, table, t.head, selected);
    Var v = gather_top(tape, table, t.tail, selected);
    Var r = tape.read(table.relation_embeddings, static_cast<std::size_t>(t.relation) * table.relation_dim(),
                      table.relation_dim());
    if (config_.scorer == ScorerKind::convkb) return convkb_score(tape, u, r, v, convkb);
    return tape.scale(transe_score(tape, u, r, v, config_.norm_p), -1.0);
}

std::vector<std::vector<NodeId>> Model::component_neighbors(NodeId u, const AdjacencyIndex& graph,
                                                            const Model& selection_source) const {
    std::vector<std::vector<NodeId>> by_component(table.components());
    for (NodeId v : node_neighbors(u, graph)) {
        const auto w = pair_attention_ne(u, v, selection_source.table, selection_source.pair_attention);
        for (std::size_t k : w.selected) by_component[k].push_back(v);
    }
    return by_component;
}

std::vector<double> Model::node_embedding(NodeId u, const AdjacencyIndex& graph, const Model& selection_source) const {
    const std::size_t dc = table.component_dim();
    std::vector<double> out(table.node_dim(), 0.0);
    const auto by_component = component_neighbors(u, graph, selection_source);
    for (std::size_t k = 0; k < table.components(); ++k) {
        // A component no neighbor (not even u itself) selects stays zero.
        if (by_component[k].empty()) continue;
        const auto updated = gat_update_component(k, by_component[k], gat, table);
        std::copy(updated.begin(), updated.end(), out.begin() + static_cast<std::ptrdiff_t>(k * dc));
    }
    return out;
}

Var Model::node_embedding(Tape& tape, NodeId u, const AdjacencyIndex& graph, const Model& selection_source) {
    const std::size_t dc = table.component_dim();
    const auto by_component = component_neighbors(u, graph, selection_source);
    std::vector<Var> parts;
    parts.reserve(table.components());
    const std::vector<double> zeros(dc, 0.0);
    for (std::size_t k = 0; k < table.components(); ++k) {
        if (by_component[k].empty())
            parts.push_back(tape.constant(zeros));
        else
            parts.push_back(gat_update_component(tape, k, by_component[k], gat, table));
    }
    return tape.concat(parts);
}

std::vector<double> Model::class_logits(NodeId u, const AdjacencyIndex& graph) const {
    return classify_logits(node_embedding(u, graph, *this), classifier);
}

std::uint32_t Model::predict(NodeId u, const AdjacencyIndex& graph) const {
    const auto logits = class_logits(u, graph);
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < logits.size(); ++c)
        if (logits[c] > logits[best]) best = c;
    return best;
}

}  // namespace dicgrl
