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

// Reference continual-learning strategies: EWC, episodic memory replay and an
// averaged-gradient projection (single constraint against the memory gradient).

#ifndef DICGRL_BASELINES_HPP_
#define DICGRL_BASELINES_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dicgrl/grad.hpp"
#include "dicgrl/graph_store.hpp"
#include "dicgrl/model.hpp"
#include "dicgrl/trainer.hpp"

namespace dicgrl {

// Diagonal Fisher estimate plus the parameter snapshot it anchors to, keyed by
// parameter name.
struct FisherDiagonal {
    std::map<std::string, std::vector<double>> importance;
    std::map<std::string, std::vector<double>> anchor;
};

// Mean over samples of the squared per-parameter gradient. sample_gradient(i)
// must zero the gradients of params and backpropagate the loss of sample i.
// Throws std::invalid_argument for an empty sample.
FisherDiagonal estimate_fisher(std::span<Parameter* const> params, std::size_t samples,
                               const std::function<void(std::size_t)>& sample_gradient);

// Link-prediction convenience: one sample is a positive triple with its
// sampled negatives.
FisherDiagonal estimate_fisher(Model& model, std::span<const Triple> sample, const TrainContext& ctx, Rng& rng);

// (lambda / 2) * sum_i F_i (theta_i - anchor_i)^2 over every anchor. With
// accumulate_grad the gradient lambda * F_i (theta_i - anchor_i) is added to
// the parameters.
double ewc_penalty(std::span<Parameter* const> params, std::span<const FisherDiagonal> fishers, double lambda,
                   bool accumulate_grad);

// Fixed-capacity store of old instances filled by reservoir sampling across
// finished parts.
template <typename Item>
class EpisodicMemory {
  public:
    explicit EpisodicMemory(std::size_t capacity) : capacity_(capacity) {}

    void offer(const Item& item, Rng& rng) {
        ++seen_;
        if (capacity_ == 0) return;
        if (items_.size() < capacity_) {
            items_.push_back(item);
            return;
        }
        const std::size_t slot = rng.uniform_index(seen_);
        if (slot < capacity_) items_[slot] = item;
    }
    void offer_all(std::span<const Item> items, Rng& rng) {
        for (const Item& item : items) offer(item, rng);
    }

    const std::vector<Item>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }

  private:
    std::size_t capacity_ = 0;
    std::size_t seen_ = 0;
    std::vector<Item> items_;
};

// New batches interleaved with batches drawn from the (shuffled) memory.
struct MixedBatch {
    BatchKind kind = BatchKind::fresh;
    std::vector<Triple> triples;
};

std::vector<MixedBatch> emr_replay(const EpisodicMemory<Triple>& memory, std::span<const Triple> new_triples,
                                   std::size_t batch_size, Rng& rng);

// Returns g_new if <g_new, g_ref> >= 0, else g_new projected onto the
// half-space orthogonal to g_ref. A zero g_ref leaves g_new unchanged.
std::vector<double> agem_project(std::span<const double> g_new, std::span<const double> g_ref);

// Gradient of params flattened in order, with the touched flags.
struct FlatGradient {
    std::vector<double> values;
    std::vector<std::uint8_t> touched;
};

FlatGradient flatten_gradients(std::span<Parameter* const> params);
// Overwrites the gradients of params with g (same layout as flatten_gradients).
void assign_gradients(std::span<Parameter* const> params, const FlatGradient& g);

}  // namespace dicgrl

#endif  // DICGRL_BASELINES_HPP_
