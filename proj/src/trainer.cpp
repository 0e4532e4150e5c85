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

#include "dicgrl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace dicgrl {

NegativeSet sample_negatives(std::span<const Triple> batch, const TripleSet& known, std::size_t count,
                             std::size_t node_pool, Rng& rng) {
    if (count < 1) throw std::invalid_argument("sample_negatives: count must be >= 1");
    if (node_pool == 0) throw std::invalid_argument("sample_negatives: empty node pool");
    NegativeSet out;
    out.corrupted.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        out.corrupted[i].reserve(count);
        for (std::size_t c = 0; c < count; ++c) {
            Triple candidate = batch[i];
            bool accepted = false;
            for (std::size_t attempt = 0; attempt < kMaxNegativeRejections; ++attempt) {
                candidate = batch[i];
                const bool corrupt_head = rng.coin();
                const auto node = static_cast<NodeId>(rng.uniform_index(node_pool));
                (corrupt_head ? candidate.head : candidate.tail) = node;
                if (!known.count(candidate)) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) ++out.fallbacks;
            out.corrupted[i].push_back(candidate);
        }
    }
    return out;
}

namespace {

double softplus(double x) { return std::log1p(std::exp(-std::fabs(x))) + std::max(x, 0.0); }

}  // namespace

double link_loss(const Model& model, std::span<const LabeledTriple> items) {
    double total = 0.0;
    for (const LabeledTriple& item : items) total += softplus(-item.label * model.validity(item.triple, item.selected));
    return total;
}

Var link_loss(Tape& tape, Model& model, std::span<const LabeledTriple> items) {
    if (items.empty()) return tape.constant(0.0);
    std::vector<Var> terms;
    terms.reserve(items.size());
    for (const LabeledTriple& item : items)
        terms.push_back(tape.softplus(tape.scale(model.validity(tape, item.triple, item.selected), -item.label)));
    return terms.size() == 1 ? terms[0] : tape.add_n(terms);
}

double node_loss(const Model& model, std::span<const NodeId> nodes, std::span<const std::uint32_t> labels,
                 const AdjacencyIndex& graph) {
    const std::size_t classes = model.classifier.classes();
    double total = 0.0;
    for (NodeId u : nodes) {
        const std::uint32_t y = labels[u];
        if (y >= classes) throw std::out_of_range("node_loss: label out of range");
        const auto logits = model.class_logits(u, graph);
        const double m = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double l : logits) z += std::exp(l - m);
        total -= (logits[y] - m - std::log(z)) / static_cast<double>(classes);
    }
    return total;
}

Var node_loss(Tape& tape, Model& model, std::span<const NodeId> nodes, std::span<const std::uint32_t> labels,
              const AdjacencyIndex& graph, const Model& selection_source) {
    const std::size_t classes = model.classifier.classes();
    if (nodes.empty()) return tape.constant(0.0);
    std::vector<Var> terms;
    terms.reserve(nodes.size());
    for (NodeId u : nodes) {
        const std::uint32_t y = labels[u];
        if (y >= classes) throw std::out_of_range("node_loss: label out of range");
        Var embedding = model.node_embedding(tape, u, graph, selection_source);
        Var log_probs = tape.log_softmax(classify_logits(tape, embedding, model.classifier));
        terms.push_back(tape.scale(tape.slice(log_probs, y, 1), -1.0 / static_cast<double>(classes)));
    }
    return terms.size() == 1 ? terms[0] : tape.add_n(terms);
}

double norm_loss(const Model& model, std::span<const Triple> triples) {
    double total = 0.0;
    for (const Triple& t : triples) {
        const AttentionWeights w = model.attention(t);
        double mass = 0.0;
        for (std::size_t k : w.selected) mass += w.alpha[k];
        total += 1.0 - mass;
    }
    return total;
}

Var norm_loss(Tape& tape, Model& model, std::span<const Triple> triples) {
    if (triples.empty()) return tape.constant(0.0);
    std::vector<Var> masses;
    masses.reserve(triples.size() * model.table.top_n());
    for (const Triple& t : triples) {
        Var alpha = attention_on_tape(tape, t, model.table, model.pair_attention, model.config().attention);
        const ComponentSet selected = select_top(tape.value(alpha), model.table.top_n());
        for (std::size_t k : selected) masses.push_back(tape.slice(alpha, k, 1));
    }
    Var total_mass = masses.size() == 1 ? masses[0] : tape.add_n(masses);
    return tape.add_scalar(tape.scale(total_mass, -1.0), static_cast<double>(triples.size()));
}

void write_epoch_log(std::ostream& out, const EpochLog& log) {
    nlohmann::ordered_json j;
    j["part"] = log.part;
    j["epoch"] = log.epoch;
    j["L_new"] = log.loss_new;
    j["L_old"] = log.loss_old;
    j["L_norm"] = log.loss_norm;
    j["seconds"] = log.seconds;
    out << j.dump() << '\n';
}

std::vector<ScheduledBatch> interleave_batches(std::size_t new_batches, std::size_t replay_batches) {
    std::vector<ScheduledBatch> schedule;
    if (replay_batches == 0) {
        for (std::size_t i = 0; i < new_batches; ++i) schedule.push_back({BatchKind::fresh, i});
        return schedule;
    }
    if (new_batches == 0) {
        for (std::size_t i = 0; i < replay_batches; ++i) schedule.push_back({BatchKind::replay, i});
        return schedule;
    }
    const std::size_t rounds = std::max(new_batches, replay_batches);
    for (std::size_t i = 0; i < rounds; ++i) {
        schedule.push_back({BatchKind::fresh, i % new_batches});
        schedule.push_back({BatchKind::replay, i % replay_batches});
    }
    return schedule;
}

double backprop_link_batch(Model& model, std::span<const Triple> positives, const TrainContext& ctx, Rng& rng,
                           const Model* selection_source, double norm_weight, double* norm_out) {
    const Model& source = selection_source != nullptr ? *selection_source : model;
    const NegativeSet negatives =
        sample_negatives(positives, *ctx.known, model.config().negatives, ctx.node_pool, rng);
    if (negatives.fallbacks > 0)
        std::cerr << "warning: " << negatives.fallbacks << " negative slot(s) accepted a known triple after "
                  << kMaxNegativeRejections << " rejections\n";
    std::vector<LabeledTriple> items;
    items.reserve(positives.size() * (1 + model.config().negatives));
    for (std::size_t i = 0; i < positives.size(); ++i) {
        items.push_back({positives[i], 1.0, source.attention(positives[i]).selected});
        for (const Triple& neg : negatives.corrupted[i]) items.push_back({neg, -1.0, source.attention(neg).selected});
    }
    Tape tape;
    Var loss = link_loss(tape, model, items);
    const double link_value = tape.scalar(loss);
    if (norm_weight > 0.0) {
        Var norm = norm_loss(tape, model, positives);
        if (norm_out) *norm_out = tape.scalar(norm);
        loss = tape.add(loss, tape.scale(norm, norm_weight));
    } else if (norm_out) {
        *norm_out = norm_loss(model, positives);
    }
    tape.backward(loss);
    return link_value;
}

double backprop_node_batch(Model& model, std::span<const NodeId> nodes, std::span<const Triple> norm_edges,
                           const TrainContext& ctx, const Model* selection_source, double norm_weight,
                           double* norm_out) {
    const Model& source = selection_source != nullptr ? *selection_source : model;
    Tape tape;
    Var loss = node_loss(tape, model, nodes, *ctx.labels, *ctx.graph, source);
    const double node_value = tape.scalar(loss);
    if (norm_weight > 0.0) {
        Var norm = norm_loss(tape, model, norm_edges);
        if (norm_out) *norm_out = tape.scalar(norm);
        loss = tape.add(loss, tape.scale(norm, norm_weight));
    } else if (norm_out) {
        *norm_out = norm_loss(model, norm_edges);
    }
    tape.backward(loss);
    return node_value;
}

namespace {

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.uniform_index(i)]);
}

template <typename T>
std::span<const T> batch_view(const std::vector<T>& items, std::size_t index, std::size_t batch_size) {
    const std::size_t begin = index * batch_size;
    const std::size_t end = std::min(items.size(), begin + batch_size);
    return std::span<const T>(items).subspan(begin, end - begin);
}

std::size_t batch_count(std::size_t items, std::size_t batch_size) { return (items + batch_size - 1) / batch_size; }

void check_finite(double value, const char* what, std::size_t part, std::size_t epoch) {
    if (!std::isfinite(value))
        throw DivergenceError(std::string("non-finite ") + what + " at part " + std::to_string(part) + ", epoch " +
                              std::to_string(epoch));
}

}  // namespace

std::vector<EpochLog> train_part(Model& model, Adam& optimizer, const GraphPart& part, const ReplaySet& replay,
                                 const TrainContext& ctx, const TrainHooks& hooks) {
    const ModelConfig& cfg = model.config();
    const bool link = model.mode() == TaskMode::link_prediction;
    if (link && ctx.known == nullptr) throw std::invalid_argument("train_part: link prediction needs a filter set");
    if (!link && (ctx.graph == nullptr || ctx.labels == nullptr))
        throw std::invalid_argument("train_part: node classification needs a graph and labels");

    Rng rng(derive_seed(cfg.seed, 1000 + ctx.part_index));
    const auto params = model.parameters();
    auto attention_params = model.attention_parameters();

    std::vector<Triple> fresh_triples = part.train;
    std::vector<NodeId> fresh_nodes = part.train_nodes;
    std::vector<Triple> norm_edges = part.train;
    std::vector<Triple> old_triples = replay.triples;
    std::vector<NodeId> old_nodes = replay.nodes;

    std::vector<EpochLog> logs;
    double best_validation = -std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        std::size_t new_batches = 0, replay_batches = 0;
        if (link) {
            shuffle(fresh_triples, rng);
            shuffle(old_triples, rng);
            new_batches = batch_count(fresh_triples.size(), cfg.batch_size);
            replay_batches = batch_count(old_triples.size(), cfg.batch_size);
        } else {
            shuffle(fresh_nodes, rng);
            shuffle(norm_edges, rng);
            shuffle(old_nodes, rng);
            new_batches = batch_count(fresh_nodes.size(), cfg.batch_size);
            replay_batches = batch_count(old_nodes.size(), cfg.batch_size);
        }
        const std::size_t edge_chunk = new_batches == 0 ? 0 : batch_count(norm_edges.size(), new_batches);

        EpochLog log;
        log.part = ctx.part_index;
        log.epoch = epoch;
        std::size_t fresh_steps = 0, replay_steps = 0;
        for (const ScheduledBatch& sb : interleave_batches(new_batches, replay_batches)) {
            if (sb.kind == BatchKind::fresh) {
                double norm_value = 0.0;
                double value = 0.0;
                if (link) {
                    value = backprop_link_batch(model, batch_view(fresh_triples, sb.index, cfg.batch_size), ctx, rng,
                                                nullptr, cfg.beta, &norm_value);
                } else {
                    value = backprop_node_batch(model, batch_view(fresh_nodes, sb.index, cfg.batch_size),
                                                batch_view(norm_edges, sb.index, edge_chunk), ctx, nullptr, cfg.beta,
                                                &norm_value);
                }
                double penalty = 0.0;
                if (hooks.penalty) penalty = hooks.penalty(model);
                if (hooks.project) hooks.project(model);
                check_finite(value + cfg.beta * norm_value + penalty, "L_new", ctx.part_index, epoch);
                optimizer.step(params);
                log.loss_new += value;
                log.loss_norm += norm_value;
                ++fresh_steps;
            } else {
                double value = 0.0;
                if (link) {
                    value = backprop_link_batch(model, batch_view(old_triples, sb.index, cfg.batch_size), ctx, rng,
                                                replay.frozen, 0.0);
                } else {
                    value = backprop_node_batch(model, batch_view(old_nodes, sb.index, cfg.batch_size), {}, ctx,
                                                replay.frozen, 0.0);
                }
                check_finite(value, "L_old", ctx.part_index, epoch);
                if (replay.masks != nullptr) masked_gradient_filter(*replay.masks, model.table);
                if (replay.freeze_attention)
                    for (Parameter* p : attention_params) p->zero_grad();
                optimizer.step(params);
                log.loss_old += value;
                ++replay_steps;
            }
        }
        if (fresh_steps > 0) {
            log.loss_new /= static_cast<double>(fresh_steps);
            log.loss_norm /= static_cast<double>(fresh_steps);
        }
        if (replay_steps > 0) log.loss_old /= static_cast<double>(replay_steps);
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        logs.push_back(log);

        if (cfg.eval_every > 0 && ctx.validate && (epoch + 1) % cfg.eval_every == 0) {
            const double score = ctx.validate();
            if (score > best_validation) {
                best_validation = score;
                stale = 0;
            } else if (++stale >= cfg.patience) {
                break;
            }
        }
    }
    return logs;
}

}  // namespace dicgrl
