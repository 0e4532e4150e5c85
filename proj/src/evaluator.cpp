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

#include "dicgrl/evaluator.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>
#include <thread>

namespace dicgrl {

namespace {

std::size_t thread_count(std::size_t requested) {
    if (requested > 0) return requested;
    const char* env = std::getenv("DICGRL_THREADS");
    if (env == nullptr || *env == '\0') return 1;
    char* end = nullptr;
    const unsigned long n = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || n == 0) throw ConfigError(std::string("DICGRL_THREADS must be a positive integer, got ") + env);
    return static_cast<std::size_t>(n);
}

std::size_t side_rank(const Triple& query, bool corrupt_head, double target, const ValidityFn& validity,
                      const TripleSet& filter, std::size_t nodes) {
    std::size_t better = 0;
    Triple c = query;
    for (std::size_t e = 0; e < nodes; ++e) {
        const NodeId id = static_cast<NodeId>(e);
        if (corrupt_head ? id == query.head : id == query.tail) continue;
        (corrupt_head ? c.head : c.tail) = id;
        if (filter.contains(c)) continue;
        if (validity(c) > target) ++better;
    }
    return better + 1;
}

}  // namespace

std::optional<RankResult> filtered_rank(const Triple& query, const ValidityFn& validity, const TripleSet& filter,
                                        const CandidatePool& pool) {
    if (query.head >= pool.nodes || query.tail >= pool.nodes || query.relation >= pool.relations) return std::nullopt;
    const double target = validity(query);
    RankResult r{query, 0, 0};
    r.head_rank = side_rank(query, true, target, validity, filter, pool.nodes);
    r.tail_rank = side_rank(query, false, target, validity, filter, pool.nodes);
    return r;
}

RankOutcome rank_queries(const Model& model, std::span<const Triple> queries, const TripleSet& filter,
                         const CandidatePool& pool, std::size_t threads) {
    const ValidityFn validity = [&model](const Triple& t) { return model.validity(t); };
    std::vector<std::optional<RankResult>> slots(queries.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) slots[i] = filtered_rank(queries[i], validity, filter, pool);
    };
    const std::size_t workers = std::min(thread_count(threads), std::max<std::size_t>(queries.size(), 1));
    if (workers <= 1) {
        work(0, queries.size());
    } else {
        std::vector<std::jthread> pool_threads;
        const std::size_t chunk = (queries.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(queries.size(), begin + chunk);
            if (begin < end) pool_threads.emplace_back(work, begin, end);
        }
    }
    RankOutcome out;
    for (auto& s : slots) {
        if (s)
            out.results.push_back(*s);
        else
            ++out.skipped;
    }
    return out;
}

LinkMetrics link_metrics(std::span<const RankResult> results) {
    if (results.empty()) throw std::invalid_argument("link_metrics: no rank results");
    LinkMetrics m;
    double reciprocal = 0.0;
    std::size_t top10 = 0;
    for (const RankResult& r : results) {
        for (std::size_t rank : {r.head_rank, r.tail_rank}) {
            reciprocal += 1.0 / static_cast<double>(rank);
            if (rank <= 10) ++top10;
        }
    }
    m.ranks = 2 * results.size();
    m.mrr = reciprocal / static_cast<double>(m.ranks);
    m.hits10 = static_cast<double>(top10) / static_cast<double>(m.ranks);
    return m;
}

double node_accuracy(const Model& model, std::span<const NodeId> nodes, std::span<const std::uint32_t> labels,
                     const AdjacencyIndex& graph) {
    if (nodes.empty()) throw std::invalid_argument("node_accuracy: empty node set");
    std::size_t correct = 0;
    for (NodeId u : nodes)
        if (model.predict(u, graph) == labels[u]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

Aggregate aggregate(std::span<const double> per_part, double union_value) {
    Aggregate a;
    a.whole = union_value;
    if (per_part.empty()) return a;
    double sum = 0.0;
    for (double v : per_part) sum += v;
    a.average = sum / static_cast<double>(per_part.size());
    return a;
}

MetricsReport evaluate_stream(const Model& model, const StreamDataset& data, std::size_t part, std::size_t threads) {
    if (part >= data.parts.size()) throw std::out_of_range("evaluate_stream: part " + std::to_string(part));
    MetricsReport report;
    report.part = part;
    std::vector<double> mrr, hits, acc;
    if (data.mode == TaskMode::link_prediction) {
        const TripleSet filter = data.known_triples(part);
        const CandidatePool pool{data.cumulative_nodes[part], data.cumulative_relations[part]};
        std::vector<RankResult> all;
        for (std::size_t j = 0; j <= part; ++j) {
            const GraphPart& gp = data.parts[j];
            RankOutcome outcome = rank_queries(model, gp.query, filter, pool, threads);
            report.skipped += outcome.skipped;
            PartMetrics pm;
            pm.part = j;
            pm.n_queries = outcome.results.size();
            if (!outcome.results.empty()) {
                const LinkMetrics lm = link_metrics(outcome.results);
                pm.mrr = lm.mrr;
                pm.hits10 = lm.hits10;
            }
            mrr.push_back(pm.mrr);
            hits.push_back(pm.hits10);
            acc.push_back(0.0);
            report.per_part.push_back(pm);
            all.insert(all.end(), outcome.results.begin(), outcome.results.end());
        }
        report.n_queries = all.size();
        LinkMetrics whole;
        if (!all.empty()) whole = link_metrics(all);
        report.mrr = aggregate(mrr, whole.mrr);
        report.hits10 = aggregate(hits, whole.hits10);
        report.accuracy = aggregate(acc, 0.0);
    } else {
        const AdjacencyIndex graph = build_adjacency(data.parts, part);
        std::vector<NodeId> all;
        for (std::size_t j = 0; j <= part; ++j) {
            const GraphPart& gp = data.parts[j];
            PartMetrics pm;
            pm.part = j;
            pm.n_queries = gp.query_nodes.size();
            if (!gp.query_nodes.empty()) pm.accuracy = node_accuracy(model, gp.query_nodes, data.labels, graph);
            mrr.push_back(0.0);
            hits.push_back(0.0);
            acc.push_back(pm.accuracy);
            report.per_part.push_back(pm);
            all.insert(all.end(), gp.query_nodes.begin(), gp.query_nodes.end());
        }
        report.n_queries = all.size();
        const double whole = all.empty() ? 0.0 : node_accuracy(model, all, data.labels, graph);
        report.mrr = aggregate(mrr, 0.0);
        report.hits10 = aggregate(hits, 0.0);
        report.accuracy = aggregate(acc, whole);
    }
    return report;
}

std::uint64_t parameter_checksum(const Model& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t x) {
        for (int i = 0; i < 8; ++i) {
            h ^= (x >> (8 * i)) & 0xFF;
            h *= 0x100000001b3ULL;
        }
    };
    for (const Parameter* p : model.parameters()) {
        mix(p->size());
        for (double v : p->values()) mix(std::bit_cast<std::uint64_t>(v));
    }
    return h;
}

}  // namespace dicgrl
