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

#ifndef DICGRL_TRAINER_HPP_
#define DICGRL_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "dicgrl/continual.hpp"
#include "dicgrl/grad.hpp"
#include "dicgrl/graph_store.hpp"
#include "dicgrl/model.hpp"

namespace dicgrl {

struct NegativeSet {
    std::vector<std::vector<Triple>> corrupted;  // one list per positive
    std::size_t fallbacks = 0;                   // slots where rejection gave up
};

inline constexpr std::size_t kMaxNegativeRejections = 100;

// Corrupts head or tail (fair coin) with a node drawn uniformly from
// [0, node_pool), rejecting members of known.
NegativeSet sample_negatives(std::span<const Triple> batch, const TripleSet& known, std::size_t count,
                             std::size_t node_pool, Rng& rng);

// A triple with its label (+1 valid, -1 corrupted) and its component selection.
struct LabeledTriple {
    Triple triple;
    double label = 1.0;
    ComponentSet selected;
};

// sum softplus(-y * s) where s is the validity score (higher = valid).
double link_loss(const Model& model, std::span<const LabeledTriple> items);
Var link_loss(Tape& tape, Model& model, std::span<const LabeledTriple> items);

// -sum_u (1/|C|) log softmax_{label(u)}(W_5 u'), u' the aggregated embedding.
double node_loss(const Model& model, std::span<const NodeId> nodes, std::span<const std::uint32_t> labels,
                 const AdjacencyIndex& graph);
Var node_loss(Tape& tape, Model& model, std::span<const NodeId> nodes, std::span<const std::uint32_t> labels,
              const AdjacencyIndex& graph, const Model& selection_source);

// sum over triples of (1 - top-n attention mass).
double norm_loss(const Model& model, std::span<const Triple> triples);
Var norm_loss(Tape& tape, Model& model, std::span<const Triple> triples);

// Shared inputs of one part's training run.
struct TrainContext {
    const TripleSet* known = nullptr;               // negative-sampling filter
    std::size_t node_pool = 0;                      // corruption candidates [0, node_pool)
    const AdjacencyIndex* graph = nullptr;          // node classification message passing
    const std::vector<std::uint32_t>* labels = nullptr;
    std::size_t part_index = 0;
    std::function<double()> validate;               // optional, higher is better
};

// Old data replayed alongside a part.
struct ReplaySet {
    std::vector<Triple> triples;         // link prediction
    std::vector<NodeId> nodes;           // node classification
    const Model* frozen = nullptr;       // selection source; nullptr uses the live model
    const ComponentMasks* masks = nullptr;
    bool freeze_attention = true;

    bool empty() const { return triples.empty() && nodes.empty(); }
    std::size_t size() const { return triples.size() + nodes.size(); }
};

struct TrainHooks {
    // Adds its gradient into the parameters and returns its value (new-data steps only).
    std::function<double(Model&)> penalty;
    // Rewrites the accumulated gradient before a new-data step.
    std::function<void(Model&)> project;
};

struct EpochLog {
    std::size_t part = 0;
    std::size_t epoch = 0;
    double loss_new = 0.0;
    double loss_old = 0.0;
    double loss_norm = 0.0;
    double seconds = 0.0;
};

// JSON-lines record: part, epoch, L_new, L_old, L_norm, seconds.
void write_epoch_log(std::ostream& out, const EpochLog& log);

enum class BatchKind { fresh, replay };

struct ScheduledBatch {
    BatchKind kind = BatchKind::fresh;
    std::size_t index = 0;
};

// One new batch then one replay batch, cycling the shorter stream.
std::vector<ScheduledBatch> interleave_batches(std::size_t new_batches, std::size_t replay_batches);

// Builds the loss of one link-prediction batch (positives plus sampled
// negatives, plus norm_weight * L_norm when norm_weight > 0) and backpropagates
// it. Selections come from selection_source (the live model when nullptr).
// Returns the link loss; *norm_out receives the unweighted L_norm.
double backprop_link_batch(Model& model, std::span<const Triple> positives, const TrainContext& ctx, Rng& rng,
                           const Model* selection_source, double norm_weight, double* norm_out = nullptr);

double backprop_node_batch(Model& model, std::span<const NodeId> nodes, std::span<const Triple> norm_edges,
                           const TrainContext& ctx, const Model* selection_source, double norm_weight,
                           double* norm_out = nullptr);

// Trains one part: config.epochs epochs of interleaved new/replay batches with
// an Adam step after every batch. Throws DivergenceError on a non-finite loss.
std::vector<EpochLog> train_part(Model& model, Adam& optimizer, const GraphPart& part, const ReplaySet& replay,
                                 const TrainContext& ctx, const TrainHooks& hooks = {});

}  // namespace dicgrl

#endif  // DICGRL_TRAINER_HPP_
