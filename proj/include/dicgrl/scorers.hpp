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

// Feature extractors over the selected components of a triple. Each scorer
// has a plain-value form (evaluation) and a tape form (training).

#ifndef DICGRL_SCORERS_HPP_
#define DICGRL_SCORERS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dicgrl/disentangle.hpp"
#include "dicgrl/grad.hpp"

namespace dicgrl {

// ||u + r - v||_p, p in {1, 2}. Lower means more plausible.
double transe_score(std::span<const double> u, std::span<const double> r, std::span<const double> v, int p);
Var transe_score(Tape& tape, Var u, Var r, Var v, int p);

struct ConvKBParams {
    Parameter filters;  // M x 4: (w_u, w_r, w_v, bias)
    Parameter output;   // 1 x (M * rows), W_1

    std::size_t filter_count() const { return filters.rows(); }
};

ConvKBParams init_convkb(std::size_t filter_count, std::size_t rows, std::uint64_t seed);

// W_1 . flatten(ReLU(conv([u r v]))). Higher means more plausible.
double convkb_score(std::span<const double> u, std::span<const double> r, std::span<const double> v,
                    const ConvKBParams& params);
Var convkb_score(Tape& tape, Var u, Var r, Var v, ConvKBParams& params);

struct GATParams {
    Parameter attention;  // W_3: 1 x d_c
    Parameter transform;  // W_4: K x (h * d_c), block k is the h x d_c matrix W_4^k
    std::size_t hidden = 0;
};

GATParams init_gat(std::size_t components, std::size_t component_dim, std::size_t hidden, std::uint64_t seed);

// sum_v softmax_v(W_3 v^k) * W_4^k v^k over the given (already restricted)
// neighbors. Throws std::invalid_argument on an empty neighbor set.
std::vector<double> gat_update_component(std::size_t k, std::span<const NodeId> neighbors, const GATParams& params,
                                         const DisentangledTable& table);
Var gat_update_component(Tape& tape, std::size_t k, std::span<const NodeId> neighbors, GATParams& params,
                         DisentangledTable& table);

struct ClassifierParams {
    Parameter weight;  // W_5: |C| x d

    std::size_t classes() const { return weight.rows(); }
};

ClassifierParams init_classifier(std::size_t classes, std::size_t dim, std::uint64_t seed);

// W_5 . embedding, where embedding is a full concatenated node vector of length d.
std::vector<double> classify_logits(std::span<const double> embedding, const ClassifierParams& params);
Var classify_logits(Tape& tape, Var embedding, ClassifierParams& params);
// Logits of the stored (un-updated) embedding of u.
std::vector<double> classify_logits(NodeId u, const DisentangledTable& table, const ClassifierParams& params);

}  // namespace dicgrl

#endif  // DICGRL_SCORERS_HPP_
