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

#include "dicgrl/scorers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dicgrl {

double transe_score(std::span<const double> u, std::span<const double> r, std::span<const double> v, int p) {
    if (u.size() != r.size() || u.size() != v.size()) throw std::invalid_argument("transe_score: length mismatch");
    if (p != 1 && p != 2) throw std::invalid_argument("transe_score: p must be 1 or 2");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double x = u[i] + r[i] - v[i];
        s += p == 1 ? std::fabs(x) : x * x;
    }
    return p == 1 ? s : std::sqrt(s);
}

Var transe_score(Tape& tape, Var u, Var r, Var v, int p) { return tape.pnorm(tape.sub(tape.add(u, r), v), p); }

ConvKBParams init_convkb(std::size_t filter_count, std::size_t rows, std::uint64_t seed) {
    ConvKBParams params{Parameter("convkb_filters", filter_count, 4), Parameter("convkb_output", 1, filter_count * rows)};
    Rng rng(seed);
    // ConvKB's customary start: filters near the TransE pattern (1, 1, -1).
    for (std::size_t m = 0; m < filter_count; ++m) {
        auto w = params.filters.row(m);
        w[0] = 1.0 + rng.uniform(-0.1, 0.1);
        w[1] = 1.0 + rng.uniform(-0.1, 0.1);
        w[2] = -1.0 + rng.uniform(-0.1, 0.1);
        w[3] = 0.0;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(filter_count * rows));
    for (double& x : params.output.values()) x = rng.uniform(-bound, bound);
    return params;
}

double convkb_score(std::span<const double> u, std::span<const double> r, std::span<const double> v,
                    const ConvKBParams& params) {
    const std::size_t rows = u.size();
    const std::size_t m_count = params.filter_count();
    if (r.size() != rows || v.size() != rows || params.filters.cols() != 4 || params.output.size() != m_count * rows)
        throw std::invalid_argument("convkb_score: shape mismatch with parameters");
    const auto w = params.filters.values();
    const auto out = params.output.values();
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t m = 0; m < m_count; ++m) {
            const double z = w[m * 4] * u[i] + w[m * 4 + 1] * r[i] + w[m * 4 + 2] * v[i] + w[m * 4 + 3];
            if (z > 0.0) s += out[i * m_count + m] * z;
        }
    }
    return s;
}

Var convkb_score(Tape& tape, Var u, Var r, Var v, ConvKBParams& params) {
    const std::size_t rows = tape.length(u);
    if (params.output.size() != params.filter_count() * rows)
        throw std::invalid_argument("convkb_score: shape mismatch with parameters");
    Var features = tape.relu(tape.conv_rows(u, r, v, params.filters));
    return tape.matvec(params.output, 0, 1, params.output.size(), features);
}

GATParams init_gat(std::size_t components, std::size_t component_dim, std::size_t hidden, std::uint64_t seed) {
    GATParams params{Parameter("gat_attention", 1, component_dim),
                     Parameter("gat_transform", components, hidden * component_dim), hidden};
    Rng rng(seed);
    const double a_bound = 1.0 / std::sqrt(static_cast<double>(component_dim));
    for (double& x : params.attention.values()) x = rng.uniform(-a_bound, a_bound);
    // Glorot range for each h x d_c block.
    const double w_bound = std::sqrt(6.0 / static_cast<double>(hidden + component_dim));
    for (double& x : params.transform.values()) x = rng.uniform(-w_bound, w_bound);
    return params;
}

std::vector<double> gat_update_component(std::size_t k, std::span<const NodeId> neighbors, const GATParams& params,
                                         const DisentangledTable& table) {
    if (neighbors.empty()) throw std::invalid_argument("gat_update_component: empty neighbor set");
    const std::size_t dc = table.component_dim();
    const std::size_t h = params.hidden;
    const auto a = params.attention.values();
    std::vector<double> scores(neighbors.size());
    for (std::size_t j = 0; j < neighbors.size(); ++j) {
        auto vk = table.component(neighbors[j], k);
        double s = 0.0;
        for (std::size_t i = 0; i < dc; ++i) s += a[i] * vk[i];
        scores[j] = s;
    }
    const double m = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double& s : scores) {
        s = std::exp(s - m);
        z += s;
    }
    const double* w = params.transform.row(k).data();
    std::vector<double> out(h, 0.0);
    for (std::size_t j = 0; j < neighbors.size(); ++j) {
        auto vk = table.component(neighbors[j], k);
        const double weight = scores[j] / z;
        for (std::size_t r = 0; r < h; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < dc; ++c) acc += w[r * dc + c] * vk[c];
            out[r] += weight * acc;
        }
    }
    return out;
}

Var gat_update_component(Tape& tape, std::size_t k, std::span<const NodeId> neighbors, GATParams& params,
                         DisentangledTable& table) {
    if (neighbors.empty()) throw std::invalid_argument("gat_update_component: empty neighbor set");
    const std::size_t dc = table.component_dim();
    const std::size_t h = params.hidden;
    std::vector<Var> components;
    std::vector<Var> scores;
    components.reserve(neighbors.size());
    scores.reserve(neighbors.size());
    for (NodeId v : neighbors) {
        Var vk = tape.read(table.node_components, table.component_offset(v, k), dc);
        components.push_back(vk);
        scores.push_back(tape.matvec(params.attention, 0, 1, dc, vk));
    }
    Var weights = tape.softmax(tape.concat(scores));
    std::vector<Var> terms;
    terms.reserve(neighbors.size());
    for (std::size_t j = 0; j < neighbors.size(); ++j) {
        Var projected = tape.matvec(params.transform, k * h * dc, h, dc, components[j]);
        terms.push_back(tape.scale_by(projected, tape.slice(weights, j, 1)));
    }
    return terms.size() == 1 ? terms[0] : tape.add_n(terms);
}

ClassifierParams init_classifier(std::size_t classes, std::size_t dim, std::uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("init_classifier: need at least two classes");
    ClassifierParams params{Parameter("classifier", classes, dim)};
    Rng rng(seed);
    const double bound = std::sqrt(6.0 / static_cast<double>(classes + dim));
    for (double& x : params.weight.values()) x = rng.uniform(-bound, bound);
    return params;
}

std::vector<double> classify_logits(std::span<const double> embedding, const ClassifierParams& params) {
    if (embedding.size() != params.weight.cols()) throw std::invalid_argument("classify_logits: dimension mismatch");
    std::vector<double> logits(params.classes(), 0.0);
    for (std::size_t c = 0; c < params.classes(); ++c) {
        auto w = params.weight.row(c);
        double s = 0.0;
        for (std::size_t i = 0; i < embedding.size(); ++i) s += w[i] * embedding[i];
        logits[c] = s;
    }
    return logits;
}

Var classify_logits(Tape& tape, Var embedding, ClassifierParams& params) {
    if (tape.length(embedding) != params.weight.cols())
        throw std::invalid_argument("classify_logits: dimension mismatch");
    return tape.matvec(params.weight, 0, params.classes(), params.weight.cols(), embedding);
}

std::vector<double> classify_logits(NodeId u, const DisentangledTable& table, const ClassifierParams& params) {
    return classify_logits(table.node(u), params);
}

}  // namespace dicgrl
