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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "dicgrl/trainer.hpp"
#include "json.hpp"

using namespace dicgrl;

namespace {

ModelConfig link_config(std::uint64_t seed = 3) {
    ModelConfig cfg;
    cfg.components = 4;
    cfg.top_n = 2;
    cfg.dim = 8;
    cfg.epochs = 2;
    cfg.batch_size = 5;
    cfg.lr = 0.01;
    cfg.seed = seed;
    return cfg;
}

ModelConfig node_config() {
    ModelConfig cfg;
    cfg.components = 3;
    cfg.top_n = 2;
    cfg.scorer = ScorerKind::gat;
    cfg.attention = AttentionVariant::ne_pair;
    cfg.seed = 5;
    return cfg;
}

std::vector<Triple> random_triples(std::size_t count, std::size_t nodes, std::size_t relations, Rng& rng) {
    std::set<Triple> seen;
    std::vector<Triple> out;
    while (out.size() < count) {
        Triple t{static_cast<NodeId>(rng.uniform_index(nodes)), static_cast<RelationId>(rng.uniform_index(relations)),
                 static_cast<NodeId>(rng.uniform_index(nodes))};
        if (seen.insert(t).second) out.push_back(t);
    }
    return out;
}

std::vector<std::vector<double>> random_features(std::size_t nodes, std::size_t width, Rng& rng) {
    std::vector<std::vector<double>> out(nodes, std::vector<double>(width));
    for (auto& row : out)
        for (double& v : row) v = rng.uniform(-1, 1);
    return out;
}


std::vector<double> snapshot(const Model& m) {
    std::vector<double> out;
    for (const Parameter* p : m.parameters()) out.insert(out.end(), p->values().begin(), p->values().end());
    return out;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

GraphPart part_with(std::size_t index, std::vector<Triple> train) {
    GraphPart p;
    p.index = index;
    p.train = std::move(train);
    return p;
}

}  // namespace

TEST_CASE("negatives fall back when every corruption is known") {
    const std::vector<Triple> batch{{0, 0, 0}};
    const TripleSet known{{0, 0, 0}};
    Rng rng(1);
    const NegativeSet neg = sample_negatives(batch, known, 3, 1, rng);
    CHECK(neg.fallbacks == 3);
    REQUIRE(neg.corrupted[0].size() == 3);
    CHECK(neg.corrupted[0][0] == Triple{0, 0, 0});
    CHECK_THROWS_AS(sample_negatives(batch, known, 0, 1, rng), std::invalid_argument);
}

TEST_CASE("negatives are deterministic and never known") {
    Rng data_rng(2);
    const auto triples = random_triples(50, 20, 3, data_rng);
    const TripleSet known(triples.begin(), triples.end());
    Rng a(10), b(10);
    const NegativeSet na = sample_negatives(triples, known, 4, 20, a);
    const NegativeSet nb = sample_negatives(triples, known, 4, 20, b);
    CHECK(na.corrupted == nb.corrupted);
    CHECK(na.fallbacks == 0);
    for (std::size_t i = 0; i < triples.size(); ++i) {
        for (const Triple& c : na.corrupted[i]) {
            CHECK(known.count(c) == 0);
            CHECK(c.relation == triples[i].relation);
            CHECK(((c.head == triples[i].head) != (c.tail == triples[i].tail)));
            CHECK(c.head < 20);
            CHECK(c.tail < 20);
        }
    }
}

TEST_CASE("link loss at a zero score is ln 2 for either label") {
    Model m(link_config(), 3, 1);
    for (double& v : m.table.node_components.values()) v = 0.0;
    for (double& v : m.table.relation_embeddings.values()) v = 0.0;
    const std::vector<LabeledTriple> items{{{0, 0, 1}, 1.0, {0, 1}}, {{2, 0, 1}, -1.0, {1, 3}}};
    CHECK(link_loss(m, items) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("link loss vanishes for a far corrupted triple") {
    Model m(link_config(), 2, 1);
    for (double& v : m.table.node_components.values()) v = 0.0;
    for (double& v : m.table.relation_embeddings.values()) v = 50.0;
    const std::vector<LabeledTriple> items{{{0, 0, 1}, -1.0, {0, 1}}};
    CHECK(link_loss(m, items) < 1e-80);
    const std::vector<LabeledTriple> positive{{{0, 0, 1}, 1.0, {0, 1}}};
    CHECK(link_loss(m, positive) == doctest::Approx(200.0).epsilon(1e-12));
}

TEST_CASE("link loss matches a recomputation and its gradient") {
    for (ScorerKind scorer : {ScorerKind::transe, ScorerKind::convkb}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            ModelConfig cfg = link_config(seed);
            cfg.scorer = scorer;
            cfg.filters = 3;
            Model m(cfg, 6, 2);
            Rng rng(seed);
            std::vector<LabeledTriple> items;
            for (const Triple& t : random_triples(6, 6, 2, rng))
                items.push_back({t, rng.coin() ? 1.0 : -1.0, m.attention(t).selected});
            double expected = 0.0;
            for (const auto& it : items) {
                const double z = -it.label * m.validity(it.triple, it.selected);
                expected += std::log1p(std::exp(z));
            }
            CHECK(link_loss(m, items) == doctest::Approx(expected).epsilon(1e-12));

            Objective f = [&](bool with_grad) {
                if (with_grad)
                    for (Parameter* p : m.parameters()) p->zero_grad();
                Tape tape;
                Var loss = link_loss(tape, m, items);
                const double value = tape.scalar(loss);
                if (with_grad) tape.backward(loss);
                return value;
            };
            CHECK(f(false) == doctest::Approx(expected).epsilon(1e-12));
            CHECK(finite_diff_check(f, m.table.node_components) <= 1e-4);
            CHECK(finite_diff_check(f, m.table.relation_embeddings) <= 1e-4);
            if (scorer == ScorerKind::convkb) {
                CHECK(finite_diff_check(f, m.convkb.filters) <= 1e-4);
                CHECK(finite_diff_check(f, m.convkb.output) <= 1e-4);
            }
        }
    }
}

TEST_CASE("node loss") {
    Rng rng(4);
    const std::size_t nodes = 5;
    const auto features = random_features(nodes, 6, rng);
    std::vector<GraphPart> parts{part_with(0, {{0, 0, 1}, {1, 0, 2}, {2, 0, 3}, {3, 0, 4}, {4, 0, 0}, {0, 0, 2}})};
    const AdjacencyIndex graph = build_adjacency(parts, 0);
    const std::vector<std::uint32_t> labels{0, 1, 0, 1, 1};
    const std::vector<NodeId> batch{0, 1, 2, 3, 4};

    SUBCASE("uniform logits with two classes give half ln 2 per node") {
        Model m(node_config(), nodes, 2, features);
        for (double& v : m.classifier.weight.values()) v = 0.0;
        CHECK(node_loss(m, batch, labels, graph) == doctest::Approx(5.0 * 0.5 * std::log(2.0)).epsilon(1e-14));
    }
    SUBCASE("confident correct predictions approach zero") {
        Model m(node_config(), nodes, 2, features);
        const std::vector<NodeId> one{0};
        const auto emb = m.node_embedding(0, graph, m);
        // Push class 0 along the embedding and class 1 against it.
        for (std::size_t j = 0; j < emb.size(); ++j) {
            m.classifier.weight.values()[j] = 1e4 * emb[j];
            m.classifier.weight.values()[emb.size() + j] = -1e4 * emb[j];
        }
        CHECK(node_loss(m, one, labels, graph) < 1e-12);
    }
    SUBCASE("matches a softmax recomputation and its gradient") {
        Model m(node_config(), nodes, 2, features);
        double expected = 0.0;
        for (NodeId u : batch) {
            const auto logits = m.class_logits(u, graph);
            const double z = std::exp(logits[0]) + std::exp(logits[1]);
            expected -= 0.5 * std::log(std::exp(logits[labels[u]]) / z);
        }
        CHECK(node_loss(m, batch, labels, graph) == doctest::Approx(expected).epsilon(1e-12));

        const Model selection = m;  // fixed selections keep the objective smooth
        Objective f = [&](bool with_grad) {
            if (with_grad)
                for (Parameter* p : m.parameters()) p->zero_grad();
            Tape tape;
            Var loss = node_loss(tape, m, batch, labels, graph, selection);
            const double value = tape.scalar(loss);
            if (with_grad) tape.backward(loss);
            return value;
        };
        CHECK(f(false) == doctest::Approx(expected).epsilon(1e-12));
        for (Parameter* p : {&m.table.node_components, &m.gat.attention, &m.gat.transform, &m.classifier.weight})
            CHECK(finite_diff_check(f, *p) <= 1e-4);
    }
    SUBCASE("labels out of range throw") {
        Model m(node_config(), nodes, 2, features);
        const std::vector<std::uint32_t> bad{0, 2, 0, 1, 1};
        CHECK_THROWS_AS(node_loss(m, batch, bad, graph), std::out_of_range);
    }
}

TEST_CASE("norm loss") {
    SUBCASE("all components selected gives zero") {
        ModelConfig cfg = link_config();
        cfg.top_n = 4;
        Model m(cfg, 3, 2);
        const std::vector<Triple> ts{{0, 0, 1}, {1, 1, 2}};
        CHECK(norm_loss(m, ts) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
    }
    SUBCASE("uniform attention over four with two selected gives one half") {
        ModelConfig cfg = link_config();
        cfg.logit_init = 0.0;
        Model m(cfg, 3, 1);
        const std::vector<Triple> ts{{0, 0, 1}};
        CHECK(norm_loss(m, ts) == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("oracle, bounds and gradient") {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            ModelConfig cfg = link_config(seed);
            cfg.logit_init = 3.0;
            Model m(cfg, 6, 3);
            Rng rng(seed);
            const auto ts = random_triples(7, 6, 3, rng);
            double expected = 0.0;
            for (const Triple& t : ts) {
                const auto logits = m.table.logits(t.relation);
                std::vector<double> e;
                double z = 0.0;
                for (double l : logits) z += std::exp(l);
                for (double l : logits) e.push_back(std::exp(l) / z);
                auto sorted = e;
                std::sort(sorted.begin(), sorted.end(), std::greater<>());
                expected += 1.0 - sorted[0] - sorted[1];
            }
            const double value = norm_loss(m, ts);
            CHECK(value == doctest::Approx(expected).epsilon(1e-12));
            CHECK(value >= 0.0);
            CHECK(value <= static_cast<double>(ts.size()));
            Objective f = [&](bool with_grad) {
                if (with_grad) m.table.attention_logits.zero_grad();
                Tape tape;
                Var loss = norm_loss(tape, m, ts);
                const double v = tape.scalar(loss);
                if (with_grad) tape.backward(loss);
                return v;
            };
            CHECK(f(false) == doctest::Approx(expected).epsilon(1e-12));
            CHECK(finite_diff_check(f, m.table.attention_logits) <= 1e-4);
        }
    }
}

TEST_CASE("interleaving alternates and cycles the shorter stream") {
    auto kinds = [](const std::vector<ScheduledBatch>& s) {
        std::string out;
        for (const auto& b : s) out += (b.kind == BatchKind::fresh ? "F" : "R") + std::to_string(b.index);
        return out;
    };
    CHECK(kinds(interleave_batches(3, 1)) == "F0R0F1R0F2R0");
    CHECK(kinds(interleave_batches(1, 2)) == "F0R0F0R1");
    CHECK(kinds(interleave_batches(2, 0)) == "F0F1");
    CHECK(kinds(interleave_batches(0, 2)) == "R0R1");
    CHECK(interleave_batches(0, 0).empty());
}

TEST_CASE("epoch logs are one JSON object per line") {
    std::ostringstream out;
    write_epoch_log(out, EpochLog{1, 2, 0.5, 0.25, 0.125, 3.0});
    const std::string line = out.str();
    CHECK(line.back() == '\n');
    const auto j = nlohmann::json::parse(line);
    CHECK(j["part"] == 1);
    CHECK(j["epoch"] == 2);
    CHECK(j["L_new"] == 0.5);
    CHECK(j["L_old"] == 0.25);
    CHECK(j["L_norm"] == 0.125);
    CHECK(line.find("\"part\"") < line.find("\"L_new\""));
}

namespace {

struct LinkFixture {
    std::vector<Triple> old_triples, new_triples;
    TripleSet known;
    TrainContext ctx;

    explicit LinkFixture(std::uint64_t seed) {
        Rng rng(seed);
        const auto all = random_triples(40, 12, 3, rng);
        old_triples.assign(all.begin(), all.begin() + 20);
        new_triples.assign(all.begin() + 20, all.end());
        known.insert(all.begin(), all.end());
        ctx.known = &known;
        ctx.node_pool = 12;
        ctx.part_index = 1;
    }
};

}  // namespace

TEST_CASE("training reduces the new-data loss over two epochs") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        LinkFixture fx(seed);
        Model m(link_config(seed), 12, 3);
        Adam adam(AdamOptions{m.config().lr});
        const auto logs = train_part(m, adam, part_with(1, fx.new_triples), {}, fx.ctx);
        REQUIRE(logs.size() == 2);
        CHECK(logs[1].loss_new < logs[0].loss_new);
        CHECK(logs[0].loss_old == 0.0);
        CHECK(logs[0].part == 1);
        CHECK(logs[1].epoch == 1);
    }
}

TEST_CASE("training is bit-reproducible") {
    LinkFixture fx(7);
    auto run = [&]() {
        Model m(link_config(7), 12, 3);
        Adam adam(AdamOptions{m.config().lr});
        ReplaySet replay;
        replay.triples = fx.old_triples;
        train_part(m, adam, part_with(1, fx.new_triples), replay, fx.ctx);
        return snapshot(m);
    };
    CHECK(bit_equal(run(), run()));
}

TEST_CASE("an empty replay set trains exactly like no replay") {
    LinkFixture fx(8);
    auto run = [&](bool with_empty_parts) {
        Model m(link_config(8), 12, 3);
        const Model frozen = m;
        const ComponentMasks masks(4);
        Adam adam(AdamOptions{m.config().lr});
        ReplaySet replay;
        if (with_empty_parts) {
            replay.frozen = &frozen;
            replay.masks = &masks;
        }
        train_part(m, adam, part_with(1, fx.new_triples), replay, fx.ctx);
        return snapshot(m);
    };
    CHECK(bit_equal(run(false), run(true)));
}

TEST_CASE("without the norm term attention logits stay fixed") {
    LinkFixture fx(9);
    ModelConfig cfg = link_config(9);
    cfg.beta = 0.0;
    Model m(cfg, 12, 3);
    const auto before = std::vector<double>(m.table.attention_logits.values().begin(),
                                            m.table.attention_logits.values().end());
    Adam adam(AdamOptions{cfg.lr});
    train_part(m, adam, part_with(1, fx.new_triples), {}, fx.ctx);
    const auto after = std::vector<double>(m.table.attention_logits.values().begin(),
                                           m.table.attention_logits.values().end());
    CHECK(bit_equal(before, after));

    cfg.beta = 0.5;
    Model m2(cfg, 12, 3);
    Adam adam2(AdamOptions{cfg.lr});
    train_part(m2, adam2, part_with(1, fx.new_triples), {}, fx.ctx);
    const auto moved = std::vector<double>(m2.table.attention_logits.values().begin(),
                                           m2.table.attention_logits.values().end());
    CHECK(!bit_equal(before, moved));
}

TEST_CASE("relations seen only in replay keep their logits") {
    Rng rng(12);
    auto fresh = random_triples(15, 10, 2, rng);  // relations 0 and 1
    std::vector<Triple> old;
    for (NodeId u = 0; u < 8; ++u) old.push_back({u, 2, static_cast<NodeId>(u + 1)});
    TripleSet known(fresh.begin(), fresh.end());
    known.insert(old.begin(), old.end());
    TrainContext ctx;
    ctx.known = &known;
    ctx.node_pool = 10;
    Model m(link_config(12), 10, 3);
    const Model frozen = m;
    const auto row_before = std::vector<double>(m.table.logits(2).begin(), m.table.logits(2).end());
    ReplaySet replay;
    replay.triples = old;
    replay.frozen = &frozen;
    Adam adam(AdamOptions{m.config().lr});
    train_part(m, adam, part_with(1, fresh), replay, ctx);
    const auto row_after = std::vector<double>(m.table.logits(2).begin(), m.table.logits(2).end());
    CHECK(bit_equal(row_before, row_after));
    CHECK(!bit_equal(std::vector<double>(frozen.table.logits(0).begin(), frozen.table.logits(0).end()),
                     std::vector<double>(m.table.logits(0).begin(), m.table.logits(0).end())));
}

TEST_CASE("node-classification training runs and reduces its loss") {
    Rng rng(14);
    const std::size_t nodes = 12;
    const auto features = random_features(nodes, 6, rng);
    std::vector<Triple> edges;
    for (NodeId u = 0; u + 1 < nodes; ++u) edges.push_back({u, 0, u + 1});
    std::vector<GraphPart> parts{part_with(0, edges)};
    for (NodeId u = 0; u < nodes; ++u) parts[0].train_nodes.push_back(u);
    std::vector<std::uint32_t> labels;
    for (NodeId u = 0; u < nodes; ++u) labels.push_back(features[u][0] > 0 ? 1 : 0);
    const AdjacencyIndex graph = build_adjacency(parts, 0);
    TrainContext ctx;
    ctx.graph = &graph;
    ctx.labels = &labels;
    ModelConfig cfg = node_config();
    cfg.epochs = 5;
    cfg.batch_size = 4;
    cfg.lr = 0.02;
    Model m(cfg, nodes, 2, features);
    Adam adam(AdamOptions{cfg.lr});
    const auto logs = train_part(m, adam, parts[0], {}, ctx);
    REQUIRE(logs.size() == 5);
    CHECK(logs.back().loss_new < logs.front().loss_new);
}

TEST_CASE("a non-finite loss raises a divergence error") {
    LinkFixture fx(15);
    Model m(link_config(15), 12, 3);
    for (double& v : m.table.node_components.row(0)) v = std::nan("");
    for (Triple& t : fx.new_triples) t.head = 0;
    GraphPart p = part_with(1, {fx.new_triples.front()});
    Adam adam;
    CHECK_THROWS_AS(train_part(m, adam, p, {}, fx.ctx), DivergenceError);
}

TEST_CASE("early stopping respects patience") {
    LinkFixture fx(16);
    ModelConfig cfg = link_config(16);
    cfg.epochs = 20;
    cfg.eval_every = 1;
    cfg.patience = 2;
    Model m(cfg, 12, 3);
    Adam adam(AdamOptions{cfg.lr});
    int calls = 0;
    fx.ctx.validate = [&]() { return ++calls == 1 ? 1.0 : 0.0; };
    const auto logs = train_part(m, adam, part_with(1, fx.new_triples), {}, fx.ctx);
    CHECK(logs.size() == 3);
}
