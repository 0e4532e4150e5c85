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

// dicgrl split | train | eval | report
//
// Every config key is also a flag (`--top-n 2` or `--top_n 2`); flags win over
// the file given with --config.

#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "dicgrl/common.hpp"
#include "dicgrl/evaluator.hpp"
#include "dicgrl/grad.hpp"
#include "dicgrl/graph_store.hpp"
#include "dicgrl/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dicgrl;

namespace {

struct Options {
    std::string config;
    std::map<std::string, std::string> flags;
};

void add_config_flags(CLI::App* cmd, Options& opts) {
    cmd->add_option("--config", opts.config, "flat key = value config file");
    for (const std::string& key : config_keys()) {
        std::string dashed = key;
        for (char& c : dashed)
            if (c == '_') c = '-';
        std::string names = "--" + dashed;
        if (dashed != key) names += ",--" + key;
        cmd->add_option_function<std::string>(
            names, [&opts, key](const std::string& v) { opts.flags[key] = v; }, "config key " + key);
    }
}

ExperimentSpec resolve(const Options& opts, const std::map<std::string, std::string>& base = {}) {
    ExperimentSpec spec;
    apply_config(base, spec);
    if (!opts.config.empty()) apply_config(read_config(opts.config), spec);
    apply_config(opts.flags, spec);
    return spec;
}

int run_split(const Options& opts, const std::string& input, const std::string& nodes, const std::string& edges) {
    ExperimentSpec spec = resolve(opts);
    if (spec.output.empty()) throw ConfigError("split needs --output");
    StreamDataset data;
    if (!nodes.empty() || !edges.empty()) {
        if (nodes.empty() || edges.empty()) throw ConfigError("citation input needs both --nodes and --edges");
        spec.split.mode = TaskMode::node_classification;
        data = split_stream(read_citation_graph(nodes, edges), spec.split);
    } else {
        if (input.empty()) throw ConfigError("split needs --input (triples) or --nodes/--edges");
        Vocabulary entity_names, relation_names;
        const auto triples = read_triple_file(input, entity_names, relation_names);
        spec.split.mode = TaskMode::link_prediction;
        data = split_stream(triples, entity_names.names(), relation_names.names(), spec.split);
    }
    save_stream(spec.output, data);
    write_statistics(std::cout, split_statistics(data));
    return 0;
}

int run_train(const Options& opts) {
    ExperimentSpec spec = resolve(opts);
    if (spec.output.empty()) throw ConfigError("train needs --output");
    run_experiment(spec);
    std::cout << (fs::path(spec.output) / "report.json").string() << '\n';
    return 0;
}

int run_eval(const Options& opts, const std::string& run_dir, std::size_t part) {
    const fs::path run(run_dir);
    ExperimentSpec spec = resolve(opts, read_config((run / "config.txt").string()));
    const StreamDataset data = load_stream(spec.dataset);
    if (part >= data.parts.size()) throw ConfigError("part " + std::to_string(part) + " is beyond the stream");
    Model model = build_model(spec.model, data);
    const auto params = model.parameters();
    restore_checkpoint(load_checkpoint((run / ("checkpoint_part" + std::to_string(part) + ".txt")).string()), params);
    const MetricsReport report = evaluate_stream(model, data, part, spec.threads);
    std::cout << metrics_json(spec.strategy, std::span<const MetricsReport>(&report, 1));
    return 0;
}

int run_report(const std::string& root) {
    const ReportSummary s = emit_report(root);
    std::cout << s.rows << " row(s) from " << s.strategies.size() << " run(s)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continual disentangled graph embedding"};
    app.require_subcommand(1);

    Options split_opts, train_opts, eval_opts;
    std::string input, nodes, edges, run_dir, report_root;
    std::size_t part = 0;

    auto* split = app.add_subcommand("split", "split a triple file or citation graph into a stream");
    split->add_option("--input", input, "triples: head<TAB>relation<TAB>tail");
    split->add_option("--nodes", nodes, "citation nodes: id<TAB>label<TAB>f1,f2,...");
    split->add_option("--edges", edges, "citation edges: id<TAB>id");
    add_config_flags(split, split_opts);

    auto* train = app.add_subcommand("train", "run one strategy over a stream");
    add_config_flags(train, train_opts);

    auto* eval = app.add_subcommand("eval", "re-evaluate a saved checkpoint");
    eval->add_option("--run", run_dir, "run directory written by train")->required();
    eval->add_option("--part", part, "checkpoint part index")->required();
    add_config_flags(eval, eval_opts);

    auto* report = app.add_subcommand("report", "consolidate run directories");
    report->add_option("--run", report_root, "run directory or a directory of runs")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*split) return run_split(split_opts, input, nodes, edges);
        if (*train) return run_train(train_opts);
        if (*eval) return run_eval(eval_opts, run_dir, part);
        if (*report) return run_report(report_root);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << '\n';
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
