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

#ifndef DICGRL_PIPELINE_HPP_
#define DICGRL_PIPELINE_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dicgrl/evaluator.hpp"
#include "dicgrl/graph_store.hpp"
#include "dicgrl/model.hpp"

namespace dicgrl {

struct SplitSpec {
    std::vector<double> part_ratios{0.8, 0.05, 0.05, 0.05, 0.05};
    std::vector<double> within_ratios{0.8, 0.1, 0.1};  // train, validation, query
    std::uint64_t seed = 1;
    TaskMode mode = TaskMode::link_prediction;

    // Throws ConfigError unless every ratio is in (0, 1] and each list sums to 1.
    void validate() const;
};

// Largest-remainder apportionment of total over ratios; ties in the
// remainder go to the earlier slot.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> ratios);

// Raw triples over a name vocabulary (ids from Vocabulary::intern).
StreamDataset split_stream(std::span<const Triple> triples, const std::vector<std::string>& node_names,
                           const std::vector<std::string>& relation_names, const SplitSpec& spec);

struct CitationGraph {
    std::vector<std::string> node_names;
    std::vector<std::uint32_t> labels;
    std::vector<std::string> class_names;
    std::vector<std::vector<double>> features;
    std::vector<std::pair<NodeId, NodeId>> edges;
};

// Node file `id<TAB>label<TAB>f1,f2,...`, edge file `id<TAB>id`.
CitationGraph read_citation_graph(const std::string& node_path, const std::string& edge_path);

// A part holds the nodes first assigned to it; an edge joins the part of its
// later-arriving endpoint. Edges are stored as train triples with relation 0.
StreamDataset split_stream(const CitationGraph& graph, const SplitSpec& spec);

struct PartStatistics {
    std::size_t part = 0;
    std::size_t train = 0, validation = 0, query = 0;  // triples, or labeled nodes
    std::size_t new_entities = 0;
    std::size_t accumulated_entities = 0;
    std::size_t accumulated_relations = 0;
    std::size_t accumulated_edges = 0;
};

std::vector<PartStatistics> split_statistics(const StreamDataset& data);
void write_statistics(std::ostream& out, std::span<const PartStatistics> stats);

// Stream directory: entities.dict, relations.dict, stream.txt, part_<i>/{train,valid,query}.tsv
// plus nodes.tsv and part_<i>/{train,valid,query}_nodes.txt for node classification.
void save_stream(const std::string& dir, const StreamDataset& data);
StreamDataset load_stream(const std::string& dir);

enum class Strategy { dicgrl, lower, upper, ewc, emr, agem };

Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy strategy);

struct ExperimentSpec {
    std::string dataset;  // stream directory (see save_stream)
    SplitSpec split;
    ModelConfig model;
    Strategy strategy = Strategy::dicgrl;
    std::string output;
    std::size_t threads = 0;  // evaluation threads; 0 reads DICGRL_THREADS
    bool quiet = false;

    // Throws ConfigError for strategy/config combinations that cannot run.
    void validate(TaskMode mode) const;
};

struct RuntimeRow {
    std::size_t part = 0;
    double seconds = 0.0;
    std::size_t replayed_instances = 0;  // distinct old instances trained on during the part
    std::size_t full_history = 0;        // old train instances an upper-bound learner revisits
};

struct ExperimentResult {
    std::vector<MetricsReport> reports;
    std::vector<RuntimeRow> runtime;
};

// Trains part by part, evaluating on every earlier query set after each part.
// Writes into spec.output (when non-empty): train_log.jsonl, checkpoint_part<i>.txt,
// report.json, metrics.json, report.csv, runtime.csv, attention.csv and
// activation_part<i>.csv. A failure leaves PARTIAL carrying the error and rethrows.
ExperimentResult run_experiment(const ExperimentSpec& spec, const StreamDataset& data);
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Metric JSON without wall-clock fields; byte-identical across identical runs.
std::string metrics_json(Strategy strategy, std::span<const MetricsReport> reports);

struct ReportSummary {
    std::vector<std::string> strategies;  // sorted
    std::size_t rows = 0;
};

// Consolidates every run below root (root itself or its direct subdirectories
// holding report.json) into summary.csv, summary.json, runtime_summary.csv and
// attention_<strategy>.csv. Throws DataError when no run is found.
ReportSummary emit_report(const std::string& root);

// Fresh model shaped for data (entities and relations of the whole stream).
Model build_model(const ModelConfig& config, const StreamDataset& data);

// Flat `key = value` file; `#` starts a comment.
std::map<std::string, std::string> read_config(const std::string& path);
// Applies recognised keys, throwing ConfigError for unknown keys or bad values.
void apply_config(const std::map<std::string, std::string>& values, ExperimentSpec& spec);
// Keys accepted by apply_config.
const std::vector<std::string>& config_keys();
// Inverse of apply_config over every key.
std::map<std::string, std::string> config_values(const ExperimentSpec& spec);
void write_config(const std::string& path, const ExperimentSpec& spec);

}  // namespace dicgrl

#endif  // DICGRL_PIPELINE_HPP_
