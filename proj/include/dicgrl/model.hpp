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

#ifndef DICGRL_MODEL_HPP_
#define DICGRL_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dicgrl/disentangle.hpp"
#include "dicgrl/grad.hpp"
#include "dicgrl/graph_store.hpp"
#include "dicgrl/scorers.hpp"

namespace dicgrl {

enum class ScorerKind { transe, convkb, gat };

ScorerKind parse_scorer(const std::string& name);
std::string to_string(ScorerKind kind);

struct ModelConfig {
    std::size_t components = 4;  // K
    std::size_t top_n = 2;       // n
    std::size_t dim = 40;        // d (node-classification: taken from the features)
    double lr = 1e-3;
    double beta = 0.1;
    ScorerKind scorer = ScorerKind::transe;
    AttentionVariant attention = AttentionVariant::kg_logits;
    std::size_t negatives = 1;
    std::size_t epochs = 50;
    std::size_t batch_size = 128;
    int order = 1;
    std::size_t memory = 1000;
    std::uint64_t seed = 1;
    int norm_p = 1;
    std::size_t filters = 50;  // ConvKB M
    // Half-width of the uniform attention-logit initialization; 0 gives all-zero logits.
    double logit_init = 1.0;
    bool reset_optimizer = false;
    std::size_t patience = 5;
    std::size_t eval_every = 0;  // epochs between validation checks; 0 disables early stopping
    double ewc_lambda = 100.0;
    std::size_t fisher_samples = 1024;

    std::size_t component_dim() const { return dim / components; }
    // Throws ConfigError when the configuration is inconsistent for the mode.
    void validate(TaskMode mode) const;
};

// All trainable state of one continual learner. Copyable; copies are
// independent snapshots (used as the frozen pre-part checkpoint).
class Model {
  public:
    Model() = default;
    // Link prediction.
    Model(const ModelConfig& config, std::size_t nodes, std::size_t relations);
    // Node classification. Features are zero-padded to a multiple of K and
    // initialize the node components.
    Model(const ModelConfig& config, std::size_t nodes, std::size_t classes,
          const std::vector<std::vector<double>>& features);

    const ModelConfig& config() const { return config_; }
    TaskMode mode() const { return mode_; }

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    // Parameters that define the attention distribution.
    std::vector<Parameter*> attention_parameters();

    AttentionWeights attention(const Triple& t) const;
    // Higher means more plausible: -TransE distance or the ConvKB score.
    double validity(const Triple& t, const ComponentSet& selected) const;
    double validity(const Triple& t) const { return validity(t, attention(t).selected); }
    Var validity(Tape& tape, const Triple& t, const ComponentSet& selected);

    // Node classification: components of u after one round of component-wise
    // neighbor aggregation over graph; pair selections come from selection_source.
    std::vector<double> node_embedding(NodeId u, const AdjacencyIndex& graph, const Model& selection_source) const;
    Var node_embedding(Tape& tape, NodeId u, const AdjacencyIndex& graph, const Model& selection_source);
    std::vector<double> class_logits(NodeId u, const AdjacencyIndex& graph) const;
    // Arg-max class, ties to the smaller class id.
    std::uint32_t predict(NodeId u, const AdjacencyIndex& graph) const;

    DisentangledTable table;
    PairAttentionParams pair_attention;
    ConvKBParams convkb;
    GATParams gat;
    ClassifierParams classifier;

  private:
    // For each component k, the neighbors of u whose pair selection with u includes k.
    std::vector<std::vector<NodeId>> component_neighbors(NodeId u, const AdjacencyIndex& graph,
                                                         const Model& selection_source) const;

    ModelConfig config_;
    TaskMode mode_ = TaskMode::link_prediction;
};

}  // namespace dicgrl

#endif  // DICGRL_MODEL_HPP_
