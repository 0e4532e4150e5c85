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

#include "dicgrl/baselines.hpp"

#include <algorithm>
#include <iostream>
#include <stdexcept>

namespace dicgrl {

FisherDiagonal estimate_fisher(std::span<Parameter* const> params, std::size_t samples,
                               const std::function<void(std::size_t)>& sample_gradient) {
    if (samples == 0) throw std::invalid_argument("estimate_fisher: empty sample");
    FisherDiagonal fisher;
    for (Parameter* p : params) {
        fisher.importance[p->name()].assign(p->size(), 0.0);
        fisher.anchor[p->name()].assign(p->values().begin(), p->values().end());
    }
    for (std::size_t i = 0; i < samples; ++i) {
        for (Parameter* p : params) p->zero_grad();
        sample_gradient(i);
        for (Parameter* p : params) {
            auto& acc = fisher.importance[p->name()];
            auto g = p->grad();
            auto touched = p->touched();
            for (std::size_t j = 0; j < g.size(); ++j)
                if (touched[j]) acc[j] += g[j] * g[j];
        }
    }
    const double inv = 1.0 / static_cast<double>(samples);
    for (auto& [name, acc] : fisher.importance)
        for (double& f : acc) f *= inv;
    for (Parameter* p : params) p->zero_grad();
    return fisher;
}

FisherDiagonal estimate_fisher(Model& model, std::span<const Triple> sample, const TrainContext& ctx, Rng& rng) {
    const auto params = model.parameters();
    return estimate_fisher(params, sample.size(), [&](std::size_t i) {
        backprop_link_batch(model, sample.subspan(i, 1), ctx, rng, nullptr, 0.0);
    });
}

double ewc_penalty(std::span<Parameter* const> params, std::span<const FisherDiagonal> fishers, double lambda,
                   bool accumulate_grad) {
    double total = 0.0;
    for (const FisherDiagonal& fisher : fishers) {
        for (Parameter* p : params) {
            auto f_it = fisher.importance.find(p->name());
            auto a_it = fisher.anchor.find(p->name());
            if (f_it == fisher.importance.end() || a_it == fisher.anchor.end()) continue;
            const auto& f = f_it->second;
            const auto& anchor = a_it->second;
            auto theta = p->values();
            // Parameters that grew since the anchor (new nodes) are unconstrained past its size.
            const std::size_t n = std::min({f.size(), anchor.size(), theta.size()});
            for (std::size_t i = 0; i < n; ++i) {
                if (f[i] == 0.0) continue;
                const double diff = theta[i] - anchor[i];
                total += 0.5 * lambda * f[i] * diff * diff;
                if (accumulate_grad) p->accumulate(i, lambda * f[i] * diff);
            }
        }
    }
    return total;
}

std::vector<MixedBatch> emr_replay(const EpisodicMemory<Triple>& memory, std::span<const Triple> new_triples,
                                   std::size_t batch_size, Rng& rng) {
    if (batch_size == 0) throw std::invalid_argument("emr_replay: batch size must be positive");
    std::vector<Triple> stored = memory.items();
    for (std::size_t i = stored.size(); i > 1; --i) std::swap(stored[i - 1], stored[rng.uniform_index(i)]);
    auto chunk = [batch_size](std::span<const Triple> items, std::size_t index) {
        const std::size_t begin = index * batch_size;
        const std::size_t end = std::min(items.size(), begin + batch_size);
        return std::vector<Triple>(items.begin() + static_cast<std::ptrdiff_t>(begin),
                                   items.begin() + static_cast<std::ptrdiff_t>(end));
    };
    const std::size_t new_batches = (new_triples.size() + batch_size - 1) / batch_size;
    const std::size_t memory_batches = (stored.size() + batch_size - 1) / batch_size;
    std::vector<MixedBatch> stream;
    for (const ScheduledBatch& sb : interleave_batches(new_batches, memory_batches)) {
        if (sb.kind == BatchKind::fresh)
            stream.push_back({BatchKind::fresh, chunk(new_triples, sb.index)});
        else
            stream.push_back({BatchKind::replay, chunk(stored, sb.index)});
    }
    return stream;
}

std::vector<double> agem_project(std::span<const double> g_new, std::span<const double> g_ref) {
    if (g_new.size() != g_ref.size()) throw std::invalid_argument("agem_project: gradient size mismatch");
    double dot = 0.0, ref_sq = 0.0;
    for (std::size_t i = 0; i < g_new.size(); ++i) {
        dot += g_new[i] * g_ref[i];
        ref_sq += g_ref[i] * g_ref[i];
    }
    std::vector<double> out(g_new.begin(), g_new.end());
    if (ref_sq == 0.0) {
        std::cerr << "warning: agem_project got a zero reference gradient; leaving the update unprojected\n";
        return out;
    }
    if (dot >= 0.0) return out;
    const double coef = dot / ref_sq;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= coef * g_ref[i];
    return out;
}

FlatGradient flatten_gradients(std::span<Parameter* const> params) {
    FlatGradient flat;
    for (Parameter* p : params) {
        flat.values.insert(flat.values.end(), p->grad().begin(), p->grad().end());
        flat.touched.insert(flat.touched.end(), p->touched().begin(), p->touched().end());
    }
    return flat;
}

void assign_gradients(std::span<Parameter* const> params, const FlatGradient& g) {
    std::size_t offset = 0;
    for (Parameter* p : params) {
        if (offset + p->size() > g.values.size()) throw std::invalid_argument("assign_gradients: layout mismatch");
        p->zero_grad();
        for (std::size_t i = 0; i < p->size(); ++i)
            if (g.touched[offset + i]) p->accumulate(i, g.values[offset + i]);
        offset += p->size();
    }
}

}  // namespace dicgrl
