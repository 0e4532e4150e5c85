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

#include "dicgrl/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dicgrl/baselines.hpp"
#include "dicgrl/continual.hpp"
#include "dicgrl/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace dicgrl {

namespace {

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.uniform_index(i)]);
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_real(std::string_view text, const std::string& what) {
    text = trim(text);
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v))
        throw ConfigError(what + ": expected a number, got '" + std::string(text) + "'");
    return v;
}

std::uint64_t parse_count(std::string_view text, const std::string& what) {
    text = trim(text);
    std::uint64_t v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ConfigError(what + ": expected a non-negative integer, got '" + std::string(text) + "'");
    return v;
}

bool parse_flag(std::string_view text, const std::string& what) {
    text = trim(text);
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError(what + ": expected true or false, got '" + std::string(text) + "'");
}

std::vector<double> parse_ratios(std::string_view text, const std::string& what) {
    std::vector<double> out;
    for (auto field : split_on(text, ',')) out.push_back(parse_real(field, what));
    return out;
}

std::string join_ratios(const std::vector<double>& ratios) {
    std::string out;
    for (std::size_t i = 0; i < ratios.size(); ++i) out += (i ? "," : "") + format_double(ratios[i]);
    return out;
}

TaskMode parse_mode(std::string_view text) {
    text = trim(text);
    if (text == "link-prediction" || text == "kg") return TaskMode::link_prediction;
    if (text == "node-classification" || text == "ne") return TaskMode::node_classification;
    throw ConfigError("mode must be link-prediction or node-classification, got '" + std::string(text) + "'");
}

std::string mode_name(TaskMode mode) {
    return mode == TaskMode::link_prediction ? "link-prediction" : "node-classification";
}

void check_ratio_list(const std::vector<double>& ratios, const char* what) {
    if (ratios.empty()) throw ConfigError(std::string(what) + " must not be empty");
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0 && r <= 1.0)) throw ConfigError(std::string(what) + " entries must lie in (0, 1]");
        sum += r;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError(std::string(what) + " must sum to 1");
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

}  // namespace

void SplitSpec::validate() const {
    check_ratio_list(part_ratios, "part ratios");
    check_ratio_list(within_ratios, "within-part ratios");
    if (within_ratios.size() != 3) throw ConfigError("within-part ratios need train, validation and query entries");
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> ratios) {
    std::vector<std::size_t> out(ratios.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        const double exact = ratios[i] * static_cast<double>(total);
        // The epsilon keeps 0.05 * 100 from flooring to 4 through representation error.
        const double fl = std::floor(exact + 1e-9);
        out[i] = static_cast<std::size_t>(std::max(0.0, fl));
        assigned += out[i];
        remainders.emplace_back(exact - fl, i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t j = 0; assigned < total; j = (j + 1) % remainders.size()) {
        ++out[remainders[j].second];
        ++assigned;
    }
    for (std::size_t j = remainders.size(); assigned > total; j = j == 0 ? remainders.size() : j - 1) {
        if (j == remainders.size()) continue;
        std::size_t& slot = out[remainders[j].second];
        if (slot > 0) {
            --slot;
            --assigned;
        }
    }
    return out;
}

StreamDataset split_stream(std::span<const Triple> triples, const std::vector<std::string>& node_names,
                           const std::vector<std::string>& relation_names, const SplitSpec& spec) {
    spec.validate();
    if (spec.mode != TaskMode::link_prediction) throw ConfigError("triple input needs link-prediction mode");
    TripleSet seen;
    std::vector<Triple> unique;
    for (const Triple& t : triples)
        if (seen.insert(t).second) unique.push_back(t);
    if (unique.empty()) throw DataError("no triples to split");
    if (unique.size() != triples.size())
        std::cerr << "split: dropped " << triples.size() - unique.size() << " duplicate triple(s)\n";

    Rng rng(derive_seed(spec.seed, 0));
    shuffle(unique, rng);
    const auto sizes = apportion(unique.size(), spec.part_ratios);

    NodeId max_node = 0;
    RelationId max_rel = 0;
    for (const Triple& t : unique) {
        max_node = std::max({max_node, t.head, t.tail});
        max_rel = std::max(max_rel, t.relation);
    }
    constexpr std::uint32_t unset = UINT32_MAX;
    std::vector<std::uint32_t> node_map(static_cast<std::size_t>(max_node) + 1, unset);
    std::vector<std::uint32_t> rel_map(static_cast<std::size_t>(max_rel) + 1, unset);
    StreamDataset data;
    data.mode = TaskMode::link_prediction;
    auto remap = [&](const Triple& t) {
        auto id = [](std::vector<std::uint32_t>& map, std::vector<std::string>& names, std::uint32_t old,
                     const std::vector<std::string>& source) {
            if (map[old] == unset) {
                map[old] = static_cast<std::uint32_t>(names.size());
                names.push_back(old < source.size() ? source[old] : std::to_string(old));
            }
            return map[old];
        };
        Triple r;
        r.head = id(node_map, data.node_names, t.head, node_names);
        r.relation = id(rel_map, data.relation_names, t.relation, relation_names);
        r.tail = id(node_map, data.node_names, t.tail, node_names);
        return r;
    };

    std::size_t offset = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        GraphPart part;
        part.index = i;
        const auto within = apportion(sizes[i], spec.within_ratios);
        std::vector<Triple>* targets[3] = {&part.train, &part.validation, &part.query};
        for (std::size_t s = 0; s < 3; ++s)
            for (std::size_t j = 0; j < within[s]; ++j) targets[s]->push_back(remap(unique[offset++]));
        data.parts.push_back(std::move(part));
        data.cumulative_nodes.push_back(data.node_names.size());
        data.cumulative_relations.push_back(data.relation_names.size());
    }
    data.node_count = data.node_names.size();
    data.relation_count = data.relation_names.size();
    data.validate();
    return data;
}

CitationGraph read_citation_graph(const std::string& node_path, const std::string& edge_path) {
    CitationGraph graph;
    Vocabulary nodes, classes;
    std::ifstream in(node_path);
    if (!in) throw DataError("cannot open node file " + node_path);
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = trim(line);
        if (view.empty()) continue;
        auto fields = split_on(view, '\t');
        const std::string where = node_path + ":" + std::to_string(lineno);
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty())
            throw DataError(where + ": expected id<TAB>label<TAB>f1,f2,...");
        if (nodes.contains(fields[0])) throw DataError(where + ": duplicate node id");
        nodes.intern(fields[0]);
        graph.labels.push_back(classes.intern(fields[1]));
        std::vector<double> features;
        if (!trim(fields[2]).empty()) {
            for (auto f : split_on(fields[2], ',')) {
                f = trim(f);
                double v = 0.0;
                auto res = std::from_chars(f.data(), f.data() + f.size(), v);
                if (res.ec != std::errc() || res.ptr != f.data() + f.size()) throw DataError(where + ": bad feature");
                features.push_back(v);
            }
        }
        if (graph.features.empty()) width = features.size();
        if (features.size() != width) throw DataError(where + ": feature length differs from the first node");
        graph.features.push_back(std::move(features));
    }
    graph.node_names = nodes.names();
    graph.class_names = classes.names();

    std::ifstream edges(edge_path);
    if (!edges) throw DataError("cannot open edge file " + edge_path);
    lineno = 0;
    while (std::getline(edges, line)) {
        ++lineno;
        std::string_view view = trim(line);
        if (view.empty()) continue;
        auto fields = split_on(view, '\t');
        const std::string where = edge_path + ":" + std::to_string(lineno);
        if (fields.size() != 2) throw DataError(where + ": expected id<TAB>id");
        if (!nodes.contains(fields[0]) || !nodes.contains(fields[1]))
            throw DataError(where + ": edge references an unknown node");
        graph.edges.emplace_back(nodes.at(fields[0]), nodes.at(fields[1]));
    }
    return graph;
}

StreamDataset split_stream(const CitationGraph& graph, const SplitSpec& spec) {
    spec.validate();
    if (spec.mode != TaskMode::node_classification) throw ConfigError("citation input needs node-classification mode");
    const std::size_t n = graph.node_names.size();
    if (n == 0) throw DataError("citation graph has no nodes");
    if (graph.labels.size() != n || graph.features.size() != n) throw DataError("citation graph is inconsistent");

    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), NodeId{0});
    Rng rng(derive_seed(spec.seed, 0));
    shuffle(order, rng);
    const auto sizes = apportion(n, spec.part_ratios);

    StreamDataset data;
    data.mode = TaskMode::node_classification;
    data.class_count = graph.class_names.size();
    data.relation_names = {"cites"};
    data.relation_count = 1;
    std::vector<NodeId> new_id(n);
    std::vector<std::size_t> part_of(n);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        GraphPart part;
        part.index = i;
        const auto within = apportion(sizes[i], spec.within_ratios);
        std::vector<NodeId>* targets[3] = {&part.train_nodes, &part.validation_nodes, &part.query_nodes};
        for (std::size_t s = 0; s < 3; ++s) {
            for (std::size_t j = 0; j < within[s]; ++j) {
                const NodeId old = order[offset++];
                new_id[old] = static_cast<NodeId>(data.node_names.size());
                part_of[old] = i;
                data.node_names.push_back(graph.node_names[old]);
                data.labels.push_back(graph.labels[old]);
                data.features.push_back(graph.features[old]);
                targets[s]->push_back(new_id[old]);
            }
        }
        data.parts.push_back(std::move(part));
        data.cumulative_nodes.push_back(data.node_names.size());
        data.cumulative_relations.push_back(1);
    }
    data.node_count = n;

    std::set<std::pair<NodeId, NodeId>> seen;
    std::size_t self_loops = 0, duplicates = 0;
    for (auto [u, v] : graph.edges) {
        if (u == v) {
            ++self_loops;
            continue;
        }
        const NodeId a = new_id[u], b = new_id[v];
        if (!seen.insert({std::min(a, b), std::max(a, b)}).second) {
            ++duplicates;
            continue;
        }
        data.parts[std::max(part_of[u], part_of[v])].train.push_back(Triple{a, 0, b});
    }
    if (self_loops + duplicates > 0)
        std::cerr << "split: dropped " << self_loops << " self-loop(s) and " << duplicates << " duplicate edge(s)\n";

    std::set<std::uint32_t> trained_labels;
    for (const GraphPart& part : data.parts) {
        for (NodeId u : part.train_nodes) trained_labels.insert(data.labels[u]);
        if (part.train.empty()) std::cerr << "split: part " << part.index << " has no edges\n";
        for (NodeId u : part.query_nodes) {
            if (!trained_labels.contains(data.labels[u])) {
                std::cerr << "split: part " << part.index << " queries a label with no training node yet\n";
                break;
            }
        }
    }
    data.validate();
    return data;
}

std::vector<PartStatistics> split_statistics(const StreamDataset& data) {
    std::vector<PartStatistics> stats;
    std::size_t edges = 0;
    for (std::size_t i = 0; i < data.parts.size(); ++i) {
        const GraphPart& p = data.parts[i];
        PartStatistics s;
        s.part = i;
        if (data.mode == TaskMode::link_prediction) {
            s.train = p.train.size();
            s.validation = p.validation.size();
            s.query = p.query.size();
        } else {
            s.train = p.train_nodes.size();
            s.validation = p.validation_nodes.size();
            s.query = p.query_nodes.size();
        }
        edges += p.train.size() + p.validation.size() + p.query.size();
        s.accumulated_entities = data.cumulative_nodes[i];
        s.new_entities = data.cumulative_nodes[i] - (i ? data.cumulative_nodes[i - 1] : 0);
        s.accumulated_relations = data.cumulative_relations[i];
        s.accumulated_edges = edges;
        stats.push_back(s);
    }
    return stats;
}

void write_statistics(std::ostream& out, std::span<const PartStatistics> stats) {
    out << "part\ttrain\tvalid\tquery\tnew_entities\taccumulated_entities\taccumulated_relations\taccumulated_edges\n";
    for (const PartStatistics& s : stats)
        out << s.part << '\t' << s.train << '\t' << s.validation << '\t' << s.query << '\t' << s.new_entities << '\t'
            << s.accumulated_entities << '\t' << s.accumulated_relations << '\t' << s.accumulated_edges << '\n';
}

void save_stream(const std::string& dir, const StreamDataset& data) {
    const fs::path root(dir);
    fs::create_directories(root);
    {
        auto out = open_out(root / "stream.txt");
        out << "mode = " << mode_name(data.mode) << "\nparts = " << data.parts.size() << '\n';
        if (data.mode == TaskMode::node_classification) out << "classes = " << data.class_count << '\n';
    }
    write_dictionary((root / "entities.dict").string(), data.node_names);
    write_dictionary((root / "relations.dict").string(), data.relation_names);
    for (std::size_t i = 0; i < data.parts.size(); ++i) {
        const GraphPart& p = data.parts[i];
        const fs::path pd = root / ("part_" + std::to_string(i));
        fs::create_directories(pd);
        write_triple_file((pd / "train.tsv").string(), p.train, data.node_names, data.relation_names);
        write_triple_file((pd / "valid.tsv").string(), p.validation, data.node_names, data.relation_names);
        write_triple_file((pd / "query.tsv").string(), p.query, data.node_names, data.relation_names);
        if (data.mode == TaskMode::node_classification) {
            const std::pair<const char*, const std::vector<NodeId>*> lists[] = {
                {"train_nodes.txt", &p.train_nodes}, {"valid_nodes.txt", &p.validation_nodes},
                {"query_nodes.txt", &p.query_nodes}};
            for (const auto& [name, nodes] : lists) {
                auto out = open_out(pd / name);
                for (NodeId u : *nodes) out << data.node_names[u] << '\n';
            }
        }
    }
    if (data.mode == TaskMode::node_classification) {
        auto out = open_out(root / "nodes.tsv");
        for (std::size_t u = 0; u < data.node_count; ++u) {
            out << data.node_names[u] << '\t' << data.labels[u] << '\t';
            const auto& f = data.features[u];
            for (std::size_t j = 0; j < f.size(); ++j) out << (j ? "," : "") << format_double(f[j]);
            out << '\n';
        }
    }
    {
        auto out = open_out(root / "statistics.tsv");
        write_statistics(out, split_statistics(data));
    }
}

StreamDataset load_stream(const std::string& dir) {
    const fs::path root(dir);
    if (!fs::exists(root / "stream.txt")) throw DataError("not a stream directory: " + dir);
    std::map<std::string, std::string> meta;
    try {
        meta = read_config((root / "stream.txt").string());
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    }
    StreamDataset data;
    std::size_t parts = 0;
    try {
        data.mode = parse_mode(meta.at("mode"));
        parts = parse_count(meta.at("parts"), "parts");
        if (data.mode == TaskMode::node_classification) data.class_count = parse_count(meta.at("classes"), "classes");
    } catch (const std::out_of_range&) {
        throw DataError("stream.txt is missing a key");
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    }
    Vocabulary nodes, relations;
    for (const auto& name : read_dictionary((root / "entities.dict").string())) nodes.intern(name);
    for (const auto& name : read_dictionary((root / "relations.dict").string())) relations.intern(name);
    const std::size_t node_total = nodes.size(), relation_total = relations.size();

    std::size_t cum_nodes = 0, cum_rel = 0;
    for (std::size_t i = 0; i < parts; ++i) {
        GraphPart p;
        p.index = i;
        const fs::path pd = root / ("part_" + std::to_string(i));
        p.train = read_triple_file((pd / "train.tsv").string(), nodes, relations);
        p.validation = read_triple_file((pd / "valid.tsv").string(), nodes, relations);
        p.query = read_triple_file((pd / "query.tsv").string(), nodes, relations);
        if (nodes.size() != node_total || relations.size() != relation_total)
            throw DataError("part " + std::to_string(i) + " uses a name missing from the dictionaries");
        auto grow = [&](const std::vector<Triple>& ts) {
            for (const Triple& t : ts) {
                cum_nodes = std::max<std::size_t>({cum_nodes, t.head + 1u, t.tail + 1u});
                cum_rel = std::max<std::size_t>(cum_rel, t.relation + 1u);
            }
        };
        grow(p.train);
        grow(p.validation);
        grow(p.query);
        if (data.mode == TaskMode::node_classification) {
            const std::pair<const char*, std::vector<NodeId>*> lists[] = {
                {"train_nodes.txt", &p.train_nodes}, {"valid_nodes.txt", &p.validation_nodes},
                {"query_nodes.txt", &p.query_nodes}};
            for (const auto& [name, target] : lists) {
                std::ifstream in(pd / name);
                if (!in) throw DataError("cannot open " + (pd / name).string());
                std::string line;
                while (std::getline(in, line)) {
                    auto view = trim(line);
                    if (view.empty()) continue;
                    const NodeId u = nodes.at(view);
                    target->push_back(u);
                    cum_nodes = std::max<std::size_t>(cum_nodes, u + 1u);
                }
            }
        }
        data.parts.push_back(std::move(p));
        data.cumulative_nodes.push_back(cum_nodes);
        data.cumulative_relations.push_back(cum_rel);
    }
    data.node_names = nodes.names();
    data.relation_names = relations.names();
    data.node_count = node_total;
    data.relation_count = relation_total;
    if (data.mode == TaskMode::node_classification) {
        data.cumulative_relations.assign(parts, relation_total);
        data.labels.assign(node_total, 0);
        data.features.assign(node_total, {});
        std::ifstream in(root / "nodes.tsv");
        if (!in) throw DataError("cannot open nodes.tsv in " + dir);
        std::string line;
        std::vector<std::uint8_t> seen(node_total, 0);
        while (std::getline(in, line)) {
            auto view = trim(line);
            if (view.empty()) continue;
            auto fields = split_on(view, '\t');
            if (fields.size() != 3) throw DataError("nodes.tsv: expected name<TAB>label<TAB>features");
            const NodeId u = nodes.at(fields[0]);
            try {
                data.labels[u] = static_cast<std::uint32_t>(parse_count(fields[1], "label"));
                if (!trim(fields[2]).empty()) data.features[u] = parse_ratios(fields[2], "feature");
            } catch (const ConfigError& e) {
                throw DataError(std::string("nodes.tsv: ") + e.what());
            }
            seen[u] = 1;
        }
        if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw DataError("nodes.tsv misses a node");
    }
    data.validate();
    return data;
}

Strategy parse_strategy(const std::string& name) {
    if (name == "dicgrl") return Strategy::dicgrl;
    if (name == "lower") return Strategy::lower;
    if (name == "upper") return Strategy::upper;
    if (name == "ewc") return Strategy::ewc;
    if (name == "emr") return Strategy::emr;
    if (name == "agem") return Strategy::agem;
    throw ConfigError("unknown strategy '" + name + "' (dicgrl, lower, upper, ewc, emr, agem)");
}

std::string to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::dicgrl: return "dicgrl";
        case Strategy::lower: return "lower";
        case Strategy::upper: return "upper";
        case Strategy::ewc: return "ewc";
        case Strategy::emr: return "emr";
        case Strategy::agem: return "agem";
    }
    return "unknown";
}

void ExperimentSpec::validate(TaskMode mode) const {
    model.validate(mode);
    if (strategy == Strategy::ewc && model.fisher_samples == 0) throw ConfigError("ewc needs fisher_samples >= 1");
}

Model build_model(const ModelConfig& config, const StreamDataset& data) {
    if (data.mode == TaskMode::link_prediction) return Model(config, data.node_count, data.relation_count);
    return Model(config, data.node_count, data.class_count, data.features);
}

namespace {

json part_json(const MetricsReport& r, bool with_runtime) {
    json j;
    j["part"] = r.part;
    j["mrr_whole"] = r.mrr.whole;
    j["mrr_avg"] = r.mrr.average;
    j["hits10_whole"] = r.hits10.whole;
    j["hits10_avg"] = r.hits10.average;
    j["accuracy_whole"] = r.accuracy.whole;
    j["accuracy_avg"] = r.accuracy.average;
    j["n_queries"] = r.n_queries;
    j["skipped"] = r.skipped;
    if (with_runtime) j["runtime_s"] = r.runtime_s;
    json per = json::array();
    for (const PartMetrics& pm : r.per_part)
        per.push_back({{"part", pm.part}, {"mrr", pm.mrr}, {"hits10", pm.hits10}, {"accuracy", pm.accuracy},
                       {"n_queries", pm.n_queries}});
    j["per_part"] = std::move(per);
    return j;
}

const char* kReportCsvHeader =
    "strategy,part,mrr_whole,mrr_avg,hits10_whole,hits10_avg,accuracy_whole,accuracy_avg,n_queries,runtime_s\n";
const char* kRuntimeCsvHeader = "strategy,part,seconds,replayed_instances,full_history\n";

void write_run_files(const fs::path& out, Strategy strategy, TaskMode mode, const ExperimentResult& result) {
    json report;
    report["strategy"] = to_string(strategy);
    report["mode"] = mode_name(mode);
    json parts = json::array();
    for (const MetricsReport& r : result.reports) parts.push_back(part_json(r, true));
    report["parts"] = std::move(parts);
    json runtime = json::array();
    for (const RuntimeRow& row : result.runtime)
        runtime.push_back({{"part", row.part},
                           {"seconds", row.seconds},
                           {"replayed_instances", row.replayed_instances},
                           {"full_history", row.full_history}});
    report["runtime"] = std::move(runtime);
    open_out(out / "report.json") << report.dump(2) << '\n';
    open_out(out / "metrics.json") << metrics_json(strategy, result.reports);

    auto csv = open_out(out / "report.csv");
    csv << kReportCsvHeader;
    for (const MetricsReport& r : result.reports)
        csv << to_string(strategy) << ',' << r.part << ',' << format_double(r.mrr.whole) << ','
            << format_double(r.mrr.average) << ',' << format_double(r.hits10.whole) << ','
            << format_double(r.hits10.average) << ',' << format_double(r.accuracy.whole) << ','
            << format_double(r.accuracy.average) << ',' << r.n_queries << ',' << format_double(r.runtime_s) << '\n';
    auto rt = open_out(out / "runtime.csv");
    rt << kRuntimeCsvHeader;
    for (const RuntimeRow& row : result.runtime)
        rt << to_string(strategy) << ',' << row.part << ',' << format_double(row.seconds) << ','
           << row.replayed_instances << ',' << row.full_history << '\n';
}

template <typename T>
std::vector<T> sample_without_replacement(const std::vector<T>& items, std::size_t count, Rng& rng) {
    std::vector<T> copy = items;
    shuffle(copy, rng);
    if (copy.size() > count) copy.resize(count);
    return copy;
}

}  // namespace

std::string metrics_json(Strategy strategy, std::span<const MetricsReport> reports) {
    json j;
    j["strategy"] = to_string(strategy);
    json parts = json::array();
    for (const MetricsReport& r : reports) parts.push_back(part_json(r, false));
    j["parts"] = std::move(parts);
    return j.dump(2) + "\n";
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const StreamDataset& data) {
    spec.validate(data.mode);
    const fs::path out(spec.output);
    const bool writing = !spec.output.empty();
    std::ofstream train_log;
    if (writing) {
        fs::create_directories(out);
        fs::remove(out / "PARTIAL");
        write_config((out / "config.txt").string(), spec);
        train_log = open_out(out / "train_log.jsonl");
    }

    ExperimentResult result;
    try {
        const ModelConfig& cfg = spec.model;
        const bool link = data.mode == TaskMode::link_prediction;
        Model model = build_model(cfg, data);
        const Model initial = spec.strategy == Strategy::upper ? model : Model();
        AdamOptions adam_options;
        adam_options.lr = cfg.lr;
        Adam adam(adam_options);
        Rng aux(derive_seed(cfg.seed, 2000));
        std::vector<FisherDiagonal> fishers;
        EpisodicMemory<Triple> triple_memory(cfg.memory);
        EpisodicMemory<NodeId> node_memory(cfg.memory);
        std::set<NodeId> old_train_nodes;
        std::vector<Triple> train_union;
        std::vector<NodeId> train_nodes_union;
        std::size_t history = 0;

        for (std::size_t i = 0; i < data.parts.size(); ++i) {
            const auto started = std::chrono::steady_clock::now();
            const GraphPart& part = data.parts[i];
            const TripleSet known = data.known_triples(i);
            AdjacencyIndex graph;
            if (!link) graph = build_adjacency(data.parts, i);

            TrainContext ctx;
            ctx.known = &known;
            ctx.node_pool = data.cumulative_nodes[i];
            ctx.graph = &graph;
            ctx.labels = &data.labels;
            ctx.part_index = i;
            if (cfg.eval_every > 0) {
                if (link) {
                    ctx.validate = [&, i]() {
                        const CandidatePool pool{data.cumulative_nodes[i], data.cumulative_relations[i]};
                        auto outcome = rank_queries(model, part.validation, known, pool, spec.threads);
                        return outcome.results.empty() ? 0.0 : link_metrics(outcome.results).mrr;
                    };
                } else {
                    ctx.validate = [&]() {
                        return part.validation_nodes.empty()
                                   ? 0.0
                                   : node_accuracy(model, part.validation_nodes, data.labels, graph);
                    };
                }
            }

            if (cfg.reset_optimizer) adam.reset();
            GraphPart training = part;
            ReplaySet replay;
            TrainHooks hooks;
            Model frozen;
            ComponentMasks masks(cfg.components);
            std::vector<ActivationRecord> records;
            std::size_t replayed = 0;

            switch (spec.strategy) {
                case Strategy::lower:
                    break;
                case Strategy::upper:
                    model = initial;
                    adam = Adam(adam_options);
                    train_union.insert(train_union.end(), part.train.begin(), part.train.end());
                    train_nodes_union.insert(train_nodes_union.end(), part.train_nodes.begin(),
                                             part.train_nodes.end());
                    training.train = train_union;
                    training.train_nodes = train_nodes_union;
                    replayed = history;
                    break;
                case Strategy::dicgrl:
                    if (i > 0) {
                        frozen = model;
                        const AdjacencyIndex index = build_adjacency(data.parts, i - 1);
                        records = activate_neighbors(part, index, frozen,
                                                     ActivationOptions{cfg.order, cfg.memory});
                        masks = build_masks(records, cfg.components);
                        if (link) {
                            for (const ActivationRecord& rec : records) replay.triples.push_back(rec.old_triple);
                        } else {
                            std::set<NodeId> chosen;
                            for (const ActivationRecord& rec : records)
                                for (NodeId u : {rec.old_triple.head, rec.old_triple.tail})
                                    if (old_train_nodes.contains(u)) chosen.insert(u);
                            replay.nodes.assign(chosen.begin(), chosen.end());
                        }
                        replay.frozen = &frozen;
                        replay.masks = &masks;
                        replayed = replay.size();
                    }
                    break;
                case Strategy::ewc:
                    if (!fishers.empty()) {
                        hooks.penalty = [&](Model& m) {
                            const auto params = m.parameters();
                            return ewc_penalty(params, fishers, cfg.ewc_lambda, true);
                        };
                    }
                    break;
                case Strategy::emr:
                    replay.triples = triple_memory.items();
                    replay.nodes = node_memory.items();
                    replay.freeze_attention = false;
                    replayed = replay.size();
                    break;
                case Strategy::agem: {
                    const bool have_memory = link ? !triple_memory.empty() : !node_memory.empty();
                    if (have_memory) {
                        hooks.project = [&](Model& m) {
                            const auto params = m.parameters();
                            const FlatGradient g_new = flatten_gradients(params);
                            for (Parameter* p : params) p->zero_grad();
                            if (link) {
                                const auto ref = sample_without_replacement(triple_memory.items(), cfg.batch_size, aux);
                                backprop_link_batch(m, ref, ctx, aux, nullptr, 0.0);
                            } else {
                                const auto ref = sample_without_replacement(node_memory.items(), cfg.batch_size, aux);
                                backprop_node_batch(m, ref, {}, ctx, nullptr, 0.0);
                            }
                            const FlatGradient g_ref = flatten_gradients(params);
                            FlatGradient merged;
                            merged.values = agem_project(g_new.values, g_ref.values);
                            merged.touched.resize(g_new.touched.size());
                            for (std::size_t k = 0; k < merged.touched.size(); ++k)
                                merged.touched[k] = g_new.touched[k] | g_ref.touched[k];
                            assign_gradients(params, merged);
                        };
                        replayed = link ? triple_memory.size() : node_memory.size();
                    }
                    break;
                }
            }

            const std::vector<EpochLog> logs = train_part(model, adam, training, replay, ctx, hooks);

            if (spec.strategy == Strategy::ewc) {
                const auto params = model.parameters();
                if (link) {
                    const auto sample = sample_without_replacement(part.train, cfg.fisher_samples, aux);
                    if (!sample.empty()) fishers.push_back(estimate_fisher(model, sample, ctx, aux));
                } else {
                    const auto sample = sample_without_replacement(part.train_nodes, cfg.fisher_samples, aux);
                    if (!sample.empty())
                        fishers.push_back(estimate_fisher(params, sample.size(), [&](std::size_t k) {
                            backprop_node_batch(model, std::span<const NodeId>(&sample[k], 1), {}, ctx, nullptr, 0.0);
                        }));
                }
            }
            if (spec.strategy == Strategy::emr || spec.strategy == Strategy::agem) {
                triple_memory.offer_all(part.train, aux);
                node_memory.offer_all(part.train_nodes, aux);
            }
            old_train_nodes.insert(part.train_nodes.begin(), part.train_nodes.end());
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

            MetricsReport report = evaluate_stream(model, data, i, spec.threads);
            report.runtime_s = seconds;
            result.reports.push_back(report);
            result.runtime.push_back(RuntimeRow{i, seconds, replayed, history});
            history += link ? part.train.size() : part.train_nodes.size();

            if (!spec.quiet)
                std::cerr << to_string(spec.strategy) << " part " << i << ": "
                          << (link ? "H@10 avg " + format_double(report.hits10.average)
                                   : "acc avg " + format_double(report.accuracy.average))
                          << ", replayed " << replayed << ", " << format_double(seconds) << " s\n";

            if (writing) {
                for (const EpochLog& log : logs) write_epoch_log(train_log, log);
                train_log.flush();
                const auto params = std::as_const(model).parameters();
                save_checkpoint((out / ("checkpoint_part" + std::to_string(i) + ".txt")).string(), params);
                write_attention_csv((out / "attention.csv").string(), model.table, data.relation_names);
                if (spec.strategy == Strategy::dicgrl && i > 0)
                    write_activation_csv((out / ("activation_part" + std::to_string(i) + ".csv")).string(), records,
                                         data.node_names, data.relation_names);
                write_run_files(out, spec.strategy, data.mode, result);
            }
        }
    } catch (const std::exception& e) {
        if (writing) {
            std::ofstream marker(out / "PARTIAL");
            marker << "error = " << e.what() << "\ncompleted_parts = " << result.reports.size() << '\n';
        }
        throw;
    }
    return result;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    if (spec.dataset.empty()) throw ConfigError("no dataset given");
    return run_experiment(spec, load_stream(spec.dataset));
}

ReportSummary emit_report(const std::string& root) {
    const fs::path base(root);
    std::vector<fs::path> runs;
    if (fs::exists(base / "report.json")) {
        runs.push_back(base);
    } else if (fs::is_directory(base)) {
        for (const auto& entry : fs::directory_iterator(base))
            if (entry.is_directory() && fs::exists(entry.path() / "report.json")) runs.push_back(entry.path());
    }
    if (runs.empty()) throw DataError("no report.json found under " + root);

    struct Run {
        std::string strategy;
        fs::path dir;
        json report;
    };
    std::vector<Run> loaded;
    for (const fs::path& dir : runs) {
        std::ifstream in(dir / "report.json");
        json j;
        try {
            j = json::parse(in);
            Run run{j.at("strategy").get<std::string>(), dir, j};
            if (run.report.at("parts").empty()) throw DataError("run has no completed part: " + dir.string());
            loaded.push_back(std::move(run));
        } catch (const json::exception& e) {
            throw DataError("malformed report in " + dir.string() + ": " + e.what());
        }
    }
    std::sort(loaded.begin(), loaded.end(), [](const Run& a, const Run& b) {
        return a.strategy != b.strategy ? a.strategy < b.strategy : a.dir < b.dir;
    });

    ReportSummary summary;
    auto csv = open_out(base / "summary.csv");
    auto rt = open_out(base / "runtime_summary.csv");
    csv << kReportCsvHeader;
    rt << kRuntimeCsvHeader;
    json all = json::array();
    std::set<std::string> attention_names;
    try {
        for (const Run& run : loaded) {
            summary.strategies.push_back(run.strategy);
            for (const json& p : run.report.at("parts")) {
                csv << run.strategy << ',' << p.at("part").get<std::size_t>() << ','
                    << format_double(p.at("mrr_whole").get<double>()) << ','
                    << format_double(p.at("mrr_avg").get<double>()) << ','
                    << format_double(p.at("hits10_whole").get<double>()) << ','
                    << format_double(p.at("hits10_avg").get<double>()) << ','
                    << format_double(p.at("accuracy_whole").get<double>()) << ','
                    << format_double(p.at("accuracy_avg").get<double>()) << ','
                    << p.at("n_queries").get<std::size_t>() << ',' << format_double(p.at("runtime_s").get<double>())
                    << '\n';
                ++summary.rows;
            }
            for (const json& r : run.report.at("runtime"))
                rt << run.strategy << ',' << r.at("part").get<std::size_t>() << ','
                   << format_double(r.at("seconds").get<double>()) << ','
                   << r.at("replayed_instances").get<std::size_t>() << ',' << r.at("full_history").get<std::size_t>()
                   << '\n';
            all.push_back(run.report);
            if (fs::exists(run.dir / "attention.csv")) {
                std::string name = "attention_" + run.strategy;
                if (!attention_names.insert(name).second) name += "_" + run.dir.filename().string();
                attention_names.insert(name);
                const fs::path target = base / (name + ".csv");
                if (target != run.dir / "attention.csv")
                    fs::copy_file(run.dir / "attention.csv", target, fs::copy_options::overwrite_existing);
            }
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed report: ") + e.what());
    }
    open_out(base / "summary.json") << json{{"runs", all}}.dump(2) << '\n';
    return summary;
}

std::map<std::string, std::string> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::map<std::string, std::string> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = line;
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key(trim(view.substr(0, eq)));
        if (key.empty()) throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        values[key] = std::string(trim(view.substr(eq + 1)));
    }
    return values;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "components", "top_n",      "dim",         "lr",          "beta",          "scorer",
        "attention",  "negatives",  "epochs",      "batch_size",  "order",         "memory",
        "seed",       "norm_p",     "filters",     "logit_init",  "reset_optimizer", "patience",
        "eval_every", "ewc_lambda", "fisher_samples", "strategy", "dataset",       "output",
        "threads",    "part_ratios", "within_ratios", "split_seed", "mode"};
    return keys;
}

void apply_config(const std::map<std::string, std::string>& values, ExperimentSpec& spec) {
    ModelConfig& m = spec.model;
    for (const auto& [key, value] : values) {
        if (key == "components") m.components = parse_count(value, key);
        else if (key == "top_n") m.top_n = parse_count(value, key);
        else if (key == "dim") m.dim = parse_count(value, key);
        else if (key == "lr") m.lr = parse_real(value, key);
        else if (key == "beta") m.beta = parse_real(value, key);
        else if (key == "scorer") m.scorer = parse_scorer(std::string(trim(value)));
        else if (key == "attention") m.attention = parse_attention_variant(std::string(trim(value)));
        else if (key == "negatives") m.negatives = parse_count(value, key);
        else if (key == "epochs") m.epochs = parse_count(value, key);
        else if (key == "batch_size") m.batch_size = parse_count(value, key);
        else if (key == "order") m.order = static_cast<int>(parse_count(value, key));
        else if (key == "memory") m.memory = parse_count(value, key);
        else if (key == "seed") m.seed = parse_count(value, key);
        else if (key == "norm_p") m.norm_p = static_cast<int>(parse_count(value, key));
        else if (key == "filters") m.filters = parse_count(value, key);
        else if (key == "logit_init") m.logit_init = parse_real(value, key);
        else if (key == "reset_optimizer") m.reset_optimizer = parse_flag(value, key);
        else if (key == "patience") m.patience = parse_count(value, key);
        else if (key == "eval_every") m.eval_every = parse_count(value, key);
        else if (key == "ewc_lambda") m.ewc_lambda = parse_real(value, key);
        else if (key == "fisher_samples") m.fisher_samples = parse_count(value, key);
        else if (key == "strategy") spec.strategy = parse_strategy(std::string(trim(value)));
        else if (key == "dataset") spec.dataset = value;
        else if (key == "output") spec.output = value;
        else if (key == "threads") spec.threads = parse_count(value, key);
        else if (key == "part_ratios") spec.split.part_ratios = parse_ratios(value, key);
        else if (key == "within_ratios") spec.split.within_ratios = parse_ratios(value, key);
        else if (key == "split_seed") spec.split.seed = parse_count(value, key);
        else if (key == "mode") spec.split.mode = parse_mode(value);
        else throw ConfigError("unknown config key '" + key + "'");
    }
}

std::map<std::string, std::string> config_values(const ExperimentSpec& spec) {
    const ModelConfig& m = spec.model;
    return {
        {"components", std::to_string(m.components)},
        {"top_n", std::to_string(m.top_n)},
        {"dim", std::to_string(m.dim)},
        {"lr", format_double(m.lr)},
        {"beta", format_double(m.beta)},
        {"scorer", to_string(m.scorer)},
        {"attention", to_string(m.attention)},
        {"negatives", std::to_string(m.negatives)},
        {"epochs", std::to_string(m.epochs)},
        {"batch_size", std::to_string(m.batch_size)},
        {"order", std::to_string(m.order)},
        {"memory", std::to_string(m.memory)},
        {"seed", std::to_string(m.seed)},
        {"norm_p", std::to_string(m.norm_p)},
        {"filters", std::to_string(m.filters)},
        {"logit_init", format_double(m.logit_init)},
        {"reset_optimizer", m.reset_optimizer ? "true" : "false"},
        {"patience", std::to_string(m.patience)},
        {"eval_every", std::to_string(m.eval_every)},
        {"ewc_lambda", format_double(m.ewc_lambda)},
        {"fisher_samples", std::to_string(m.fisher_samples)},
        {"strategy", to_string(spec.strategy)},
        {"dataset", spec.dataset},
        {"output", spec.output},
        {"threads", std::to_string(spec.threads)},
        {"part_ratios", join_ratios(spec.split.part_ratios)},
        {"within_ratios", join_ratios(spec.split.within_ratios)},
        {"split_seed", std::to_string(spec.split.seed)},
        {"mode", mode_name(spec.split.mode)},
    };
}

void write_config(const std::string& path, const ExperimentSpec& spec) {
    auto out = open_out(path);
    for (const auto& [key, value] : config_values(spec)) out << key << " = " << value << '\n';
}

}  // namespace dicgrl
