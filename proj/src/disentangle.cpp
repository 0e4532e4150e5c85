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

#include "dicgrl/disentangle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace dicgrl {

DisentangledTable::DisentangledTable(const TableShape& shape) : shape_(shape) {
    if (shape.components < 1 || shape.component_dim < 1 || shape.top_n < 1 || shape.top_n > shape.components)
        throw std::invalid_argument("DisentangledTable: need K >= 1, d_c >= 1 and 1 <= n <= K");
    node_components = Parameter("node_components", shape.nodes, node_dim());
    relation_embeddings =
        Parameter("relation_embeddings", shape.relation_embeddings ? shape.relations : 0, relation_dim());
    attention_logits = Parameter("attention_logits", shape.attention_logits ? shape.relations : 0, shape.components);
}

DisentangledTable init_table(const TableShape& shape, std::uint64_t seed, double logit_range) {
    DisentangledTable table(shape);
    Rng rng(seed);
    const double bound = 6.0 / std::sqrt(static_cast<double>(shape.component_dim));
    for (double& x : table.node_components.values()) x = rng.uniform(-bound, bound);
    for (double& x : table.relation_embeddings.values()) x = rng.uniform(-bound, bound);
    if (logit_range > 0.0)
        for (double& x : table.attention_logits.values()) x = rng.uniform(-logit_range, logit_range);
    return table;
}

ComponentSet select_top(std::span<const double> alpha, std::size_t n) {
    if (n > alpha.size()) throw std::invalid_argument("select_top: n exceeds K");
    std::vector<std::size_t> order(alpha.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return alpha[a] > alpha[b]; });
    ComponentSet selected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(selected.begin(), selected.end());
    return selected;
}

AttentionVariant parse_attention_variant(const std::string& name) {
    if (name == "kg-logits") return AttentionVariant::kg_logits;
    if (name == "alpha1" || name == "α1") return AttentionVariant::alpha1;
    if (name == "alpha2" || name == "α2") return AttentionVariant::alpha2;
    if (name == "ne-pair") return AttentionVariant::ne_pair;
    throw ConfigError("unknown attention variant '" + name + "'");
}

std::string to_string(AttentionVariant variant) {
    switch (variant) {
        case AttentionVariant::kg_logits: return "kg-logits";
        case AttentionVariant::alpha1: return "alpha1";
        case AttentionVariant::alpha2: return "alpha2";
        case AttentionVariant::ne_pair: return "ne-pair";
    }
    return "?";
}

PairAttentionParams init_pair_attention(const TableShape& shape, AttentionVariant variant, std::uint64_t seed) {
    std::size_t cols = 0;
    if (variant == AttentionVariant::alpha1 || variant == AttentionVariant::ne_pair)
        cols = 2 * shape.component_dim;
    else if (variant == AttentionVariant::alpha2)
        cols = 2 * shape.component_dim + shape.top_n * shape.component_dim;
    PairAttentionParams params{Parameter("pair_attention", cols == 0 ? 0 : 1, cols)};
    Rng rng(seed);
    const double bound = cols == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(cols));
    for (double& x : params.weight.values()) x = rng.uniform(-bound, bound);
    return params;
}

namespace {

std::vector<double> softmax(std::span<const double> x) {
    std::vector<double> out(x.size());
    const double m = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - m);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

AttentionWeights finish(std::vector<double> alpha, std::size_t n) {
    AttentionWeights w;
    w.selected = select_top(alpha, n);
    w.alpha = std::move(alpha);
    return w;
}

// ReLU(W [u^k ; r ; v^k]) per component; r is empty unless the weight is widened.
std::vector<double> pair_scores(NodeId u, NodeId v, std::span<const double> relation, const DisentangledTable& table,
                                const PairAttentionParams& params) {
    const std::size_t dc = table.component_dim();
    const auto w = params.weight.values();
    if (w.size() != 2 * dc + relation.size())
        throw std::invalid_argument("pair attention: weight width does not match the input layout");
    std::vector<double> scores(table.components());
    double rel_part = 0.0;
    for (std::size_t i = 0; i < relation.size(); ++i) rel_part += w[dc + i] * relation[i];
    const std::size_t v_off = dc + relation.size();
    for (std::size_t k = 0; k < table.components(); ++k) {
        auto uk = table.component(u, k);
        auto vk = table.component(v, k);
        double s = rel_part;
        for (std::size_t i = 0; i < dc; ++i) s += w[i] * uk[i] + w[v_off + i] * vk[i];
        scores[k] = s > 0.0 ? s : 0.0;
    }
    return scores;
}

}  // namespace

AttentionWeights relation_attention_kg(RelationId r, const DisentangledTable& table) {
    if (!table.has_attention_logits() || r >= table.attention_logits.rows())
        throw std::invalid_argument("relation_attention_kg: no logits for relation");
    return finish(softmax(table.logits(r)), table.top_n());
}

AttentionWeights pair_attention_ne(NodeId u, NodeId v, const DisentangledTable& table,
                                   const PairAttentionParams& params) {
    return finish(softmax(pair_scores(u, v, {}, table, params)), table.top_n());
}

AttentionWeights triple_attention_variant(const Triple& t, const DisentangledTable& table,
                                          const PairAttentionParams& params, AttentionVariant variant) {
    if (!table.has_relation_embeddings())
        throw std::invalid_argument("triple_attention_variant: table has no relation embeddings");
    if (variant == AttentionVariant::alpha1) return pair_attention_ne(t.head, t.tail, table, params);
    if (variant != AttentionVariant::alpha2) throw std::invalid_argument("triple_attention_variant: expects alpha1/alpha2");
    return finish(softmax(pair_scores(t.head, t.tail, table.relation(t.relation), table, params)), table.top_n());
}

AttentionWeights attention_for(const Triple& t, const DisentangledTable& table, const PairAttentionParams& params,
                               AttentionVariant variant) {
    switch (variant) {
        case AttentionVariant::kg_logits: return relation_attention_kg(t.relation, table);
        case AttentionVariant::ne_pair: return pair_attention_ne(t.head, t.tail, table, params);
        default: return triple_attention_variant(t, table, params, variant);
    }
}

Var attention_on_tape(Tape& tape, const Triple& t, DisentangledTable& table, PairAttentionParams& params,
                      AttentionVariant variant) {
    if (variant == AttentionVariant::kg_logits) {
        const std::size_t K = table.components();
        return tape.softmax(tape.read(table.attention_logits, static_cast<std::size_t>(t.relation) * K, K));
    }
    const std::size_t dc = table.component_dim();
    const bool widened = variant == AttentionVariant::alpha2;
    if (widened && !table.has_relation_embeddings())
        throw std::invalid_argument("attention_on_tape: alpha2 needs relation embeddings");
    std::vector<Var> scores;
    scores.reserve(table.components());
    Var rel{};
    if (widened) rel = tape.read(table.relation_embeddings, t.relation * table.relation_dim(), table.relation_dim());
    for (std::size_t k = 0; k < table.components(); ++k) {
        Var uk = tape.read(table.node_components, table.component_offset(t.head, k), dc);
        Var vk = tape.read(table.node_components, table.component_offset(t.tail, k), dc);
        std::vector<Var> pieces{uk};
        if (widened) pieces.push_back(rel);
        pieces.push_back(vk);
        Var input = tape.concat(pieces);
        scores.push_back(tape.relu(tape.matvec(params.weight, 0, 1, tape.length(input), input)));
    }
    return tape.softmax(tape.concat(scores));
}

std::vector<double> gather_top(const DisentangledTable& table, NodeId u, const ComponentSet& selected) {
    std::vector<double> out;
    out.reserve(selected.size() * table.component_dim());
    for (std::size_t k : selected) {
        auto c = table.component(u, k);
        out.insert(out.end(), c.begin(), c.end());
    }
    return out;
}

Var gather_top(Tape& tape, DisentangledTable& table, NodeId u, const ComponentSet& selected) {
    const std::size_t dc = table.component_dim();
    // Consecutive selected components are read as one slice.
    std::vector<Var> pieces;
    std::size_t i = 0;
    while (i < selected.size()) {
        std::size_t j = i + 1;
        while (j < selected.size() && selected[j] == selected[j - 1] + 1) ++j;
        pieces.push_back(tape.read(table.node_components, table.component_offset(u, selected[i]), (j - i) * dc));
        i = j;
    }
    return pieces.size() == 1 ? pieces[0] : tape.concat(pieces);
}

void write_attention_csv(const std::string& path, const DisentangledTable& table,
                         const std::vector<std::string>& relation_names) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "relation";
    for (std::size_t k = 0; k < table.components(); ++k) out << ",alpha_" << (k + 1);
    out << '\n';
    if (!table.has_attention_logits()) return;
    for (std::size_t r = 0; r < table.attention_logits.rows(); ++r) {
        std::string name = r < relation_names.size() ? relation_names[r] : std::to_string(r);
        if (name.find_first_of(",\"") != std::string::npos) {
            std::string quoted = "\"";
            for (char c : name) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
            name = quoted + "\"";
        }
        out << name;
        for (double a : softmax(table.logits(static_cast<RelationId>(r)))) out << ',' << format_double(a);
        out << '\n';
    }
}

}  // namespace dicgrl
