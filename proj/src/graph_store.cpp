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

#include "dicgrl/graph_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <stdexcept>

namespace dicgrl {

void StreamDataset::validate() const {
    if (parts.empty()) throw DataError("stream has no parts");
    if (cumulative_nodes.size() != parts.size() || cumulative_relations.size() != parts.size())
        throw DataError("cumulative counts do not match part count");
    TripleSet seen;
    std::vector<std::uint8_t> node_used(node_count, 0);
    std::vector<std::uint8_t> rel_used(relation_count, 0);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const GraphPart& part = parts[i];
        if (i > 0 && (cumulative_nodes[i] < cumulative_nodes[i - 1] ||
                      cumulative_relations[i] < cumulative_relations[i - 1]))
            throw DataError("cumulative counts decrease at part " + std::to_string(i));
        for (const auto* split : {&part.train, &part.validation, &part.query}) {
            for (const Triple& t : *split) {
                if (t.head >= cumulative_nodes[i] || t.tail >= cumulative_nodes[i] ||
                    t.relation >= cumulative_relations[i])
                    throw DataError("triple id beyond cumulative range in part " + std::to_string(i));
                if (!seen.insert(t).second)
                    throw DataError("triple appears twice in the stream (part " + std::to_string(i) + ")");
                node_used[t.head] = node_used[t.tail] = 1;
                rel_used[t.relation] = 1;
            }
        }
        for (const auto* nodes : {&part.train_nodes, &part.validation_nodes, &part.query_nodes}) {
            for (NodeId u : *nodes) {
                if (u >= cumulative_nodes[i]) throw DataError("labeled node beyond cumulative range");
                node_used[u] = 1;
            }
        }
    }
    if (mode == TaskMode::link_prediction) {
        if (std::find(node_used.begin(), node_used.end(), 0) != node_used.end())
            throw DataError("node ids are not dense");
        if (std::find(rel_used.begin(), rel_used.end(), 0) != rel_used.end())
            throw DataError("relation ids are not dense");
    } else {
        if (labels.size() != node_count) throw DataError("label count does not match node count");
        for (auto c : labels)
            if (c >= class_count) throw DataError("label out of range");
        if (!features.empty() && features.size() != node_count)
            throw DataError("feature count does not match node count");
    }
}

TripleSet StreamDataset::known_triples(std::size_t upto) const {
    TripleSet known;
    for (std::size_t i = 0; i <= upto && i < parts.size(); ++i) {
        known.insert(parts[i].train.begin(), parts[i].train.end());
        known.insert(parts[i].validation.begin(), parts[i].validation.end());
        known.insert(parts[i].query.begin(), parts[i].query.end());
    }
    return known;
}

AdjacencyIndex::AdjacencyIndex(std::vector<Triple> triples) : triples_(std::move(triples)) {
    NodeId max_node = 0;
    for (const Triple& t : triples_) max_node = std::max({max_node, t.head, t.tail});
    const std::size_t nodes = triples_.empty() ? 0 : static_cast<std::size_t>(max_node) + 1;
    offsets_.assign(nodes + 1, 0);
    for (const Triple& t : triples_) {
        ++offsets_[t.head + 1];
        ++offsets_[t.tail + 1];
    }
    for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
    entries_.resize(offsets_.empty() ? 0 : offsets_.back());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - (offsets_.empty() ? 0 : 1));
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        entries_[cursor[triples_[i].head]++] = static_cast<std::uint32_t>(i);
        entries_[cursor[triples_[i].tail]++] = static_cast<std::uint32_t>(i);
    }
}

std::span<const std::uint32_t> AdjacencyIndex::incident(NodeId u) const {
    if (u >= node_count()) return {};
    return std::span<const std::uint32_t>(entries_).subspan(offsets_[u], offsets_[u + 1] - offsets_[u]);
}

std::vector<Triple> AdjacencyIndex::incident_triples(NodeId u) const {
    std::vector<Triple> out;
    for (auto pos : incident(u)) out.push_back(triples_[pos]);
    return out;
}

AdjacencyIndex build_adjacency(std::span<const GraphPart> parts, std::size_t upto) {
    if (upto >= parts.size())
        throw std::out_of_range("build_adjacency: part index " + std::to_string(upto) + " out of range");
    std::vector<Triple> triples;
    for (std::size_t i = 0; i <= upto; ++i) triples.insert(triples.end(), parts[i].train.begin(), parts[i].train.end());
    return AdjacencyIndex(std::move(triples));
}

std::vector<Triple> triple_neighbors(const Triple& t, const AdjacencyIndex& index, int order) {
    if (order != 1 && order != 2) throw std::invalid_argument("triple_neighbors: order must be 1 or 2");
    std::vector<std::uint32_t> first;
    for (NodeId u : {t.head, t.tail})
        for (auto pos : index.incident(u))
            if (index.triples()[pos] != t) first.push_back(pos);
    std::sort(first.begin(), first.end());
    first.erase(std::unique(first.begin(), first.end()), first.end());

    std::vector<std::uint32_t> result = first;
    if (order == 2) {
        std::vector<NodeId> frontier;
        for (auto pos : first) {
            frontier.push_back(index.triples()[pos].head);
            frontier.push_back(index.triples()[pos].tail);
        }
        std::sort(frontier.begin(), frontier.end());
        frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
        for (NodeId u : frontier)
            for (auto pos : index.incident(u))
                if (index.triples()[pos] != t) result.push_back(pos);
        std::sort(result.begin(), result.end());
        result.erase(std::unique(result.begin(), result.end()), result.end());
    }
    std::vector<Triple> out;
    out.reserve(result.size());
    for (auto pos : result) out.push_back(index.triples()[pos]);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<NodeId> node_neighbors(NodeId u, const AdjacencyIndex& index) {
    std::vector<NodeId> out{u};
    for (auto pos : index.incident(u)) {
        const Triple& t = index.triples()[pos];
        out.push_back(t.head == u ? t.tail : t.head);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::uint32_t Vocabulary::intern(std::string_view name) {
    auto it = ids_.find(std::string(name));
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(name);
    ids_.emplace(names_.back(), id);
    return id;
}

std::uint32_t Vocabulary::at(std::string_view name) const {
    auto it = ids_.find(std::string(name));
    if (it == ids_.end()) throw DataError("unknown name '" + std::string(name) + "'");
    return it->second;
}

bool Vocabulary::contains(std::string_view name) const { return ids_.count(std::string(name)) != 0; }

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return fields;
}

std::string_view strip_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

}  // namespace

std::vector<Triple> read_triple_file(const std::string& path, Vocabulary& nodes, Vocabulary& relations) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open triple file " + path);
    std::vector<Triple> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = strip_cr(line);
        if (view.empty()) continue;
        auto fields = split_tabs(view);
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
            throw DataError(path + ":" + std::to_string(lineno) + ": expected head<TAB>relation<TAB>tail");
        Triple t;
        t.head = nodes.intern(fields[0]);
        t.relation = relations.intern(fields[1]);
        t.tail = nodes.intern(fields[2]);
        out.push_back(t);
    }
    return out;
}

void write_triple_file(const std::string& path, std::span<const Triple> triples,
                       const std::vector<std::string>& node_names,
                       const std::vector<std::string>& relation_names) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    for (const Triple& t : triples)
        out << node_names.at(t.head) << '\t' << relation_names.at(t.relation) << '\t' << node_names.at(t.tail)
            << '\n';
}

void write_dictionary(const std::string& path, const std::vector<std::string>& names) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << '\t' << i << '\n';
}

std::vector<std::string> read_dictionary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dictionary " + path);
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view view = strip_cr(line);
        if (view.empty()) continue;
        auto fields = split_tabs(view);
        if (fields.size() != 2) throw DataError(path + ": expected name<TAB>id");
        std::size_t id = 0;
        auto res = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), id);
        if (res.ec != std::errc() || id != names.size()) throw DataError(path + ": ids must be dense and ordered");
        names.emplace_back(fields[0]);
    }
    return names;
}

}  // namespace dicgrl
