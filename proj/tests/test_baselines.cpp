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
#include <iostream>
#include <set>
#include <sstream>

#include "dicgrl/baselines.hpp"

using namespace dicgrl;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1, 1);
    return v;
}

}  // namespace

TEST_CASE("fisher of a constant loss is zero") {
    Parameter p("p", 1, 3, 1.0);
    std::vector<Parameter*> params{&p};
    const auto fisher = estimate_fisher(params, 4, [&](std::size_t) {
        Tape t;
        t.backward(t.scale(t.sum(t.read(p, 0, 3)), 0.0));
    });
    for (double f : fisher.importance.at("p")) CHECK(f == 0.0);
    CHECK(fisher.anchor.at("p") == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("fisher of one sample is the squared gradient") {
    Parameter p("p", 1, 2);
    p.values()[0] = 3.0;
    p.values()[1] = -0.5;
    std::vector<Parameter*> params{&p};
    // loss = x . x, gradient 2x
    const auto fisher = estimate_fisher(params, 1, [&](std::size_t) {
        Tape t;
        Var x = t.read(p, 0, 2);
        t.backward(t.dot(x, x));
    });
    CHECK(fisher.importance.at("p")[0] == doctest::Approx(36.0));
    CHECK(fisher.importance.at("p")[1] == doctest::Approx(1.0));
    CHECK(p.grad()[0] == 0.0);
}

TEST_CASE("fisher averages squared gradients over samples") {
    Rng rng(3);
    Parameter p("p", 1, 4);
    for (double& v : p.values()) v = rng.uniform(-1, 1);
    std::vector<std::vector<double>> weights;
    for (int i = 0; i < 10; ++i) weights.push_back(random_vector(4, rng));
    std::vector<Parameter*> params{&p};
    // loss_i = softplus(w_i . x)
    const auto fisher = estimate_fisher(params, 10, [&](std::size_t i) {
        Tape t;
        t.backward(t.sum(t.softplus(t.dot(t.read(p, 0, 4), t.constant(weights[i])))));
    });
    for (std::size_t j = 0; j < 4; ++j) {
        double expected = 0.0;
        for (const auto& w : weights) {
            const double s = 1.0 / (1.0 + std::exp(-dot(w, p.values())));
            expected += (s * w[j]) * (s * w[j]) / 10.0;
        }
        CHECK(fisher.importance.at("p")[j] == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK_THROWS_AS(estimate_fisher(params, 0, [](std::size_t) {}), std::invalid_argument);
}

TEST_CASE("ewc penalty values") {
    Parameter p("p", 1, 1, 3.0);
    std::vector<Parameter*> params{&p};
    FisherDiagonal fisher;
    fisher.importance["p"] = {1.0};
    fisher.anchor["p"] = {1.0};
    const std::vector<FisherDiagonal> fishers{fisher};
    CHECK(ewc_penalty(params, fishers, 1.0, false) == doctest::Approx(2.0));
    p.values()[0] = 1.0;
    CHECK(ewc_penalty(params, fishers, 1.0, true) == 0.0);
    CHECK(p.grad()[0] == 0.0);
}

TEST_CASE("ewc penalty matches a sum and its gradient, and tolerates growth") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        Parameter p("p", 2, 3), q("q", 1, 2);
        for (double& v : p.values()) v = rng.uniform(-1, 1);
        for (double& v : q.values()) v = rng.uniform(-1, 1);
        std::vector<FisherDiagonal> fishers(2);
        for (auto& f : fishers) {
            f.importance["p"] = random_vector(6, rng);
            for (double& x : f.importance["p"]) x = std::fabs(x);
            f.anchor["p"] = random_vector(6, rng);
            // q grew after this anchor: only its first entry is constrained.
            f.importance["q"] = {0.7};
            f.anchor["q"] = {0.1};
        }
        std::vector<Parameter*> params{&p, &q};
        const double lambda = 2.5;
        double expected = 0.0;
        for (const auto& f : fishers) {
            for (std::size_t i = 0; i < 6; ++i) {
                const double d = p.values()[i] - f.anchor.at("p")[i];
                expected += 0.5 * lambda * f.importance.at("p")[i] * d * d;
            }
            const double d = q.values()[0] - 0.1;
            expected += 0.5 * lambda * 0.7 * d * d;
        }
        CHECK(ewc_penalty(params, fishers, lambda, false) == doctest::Approx(expected).epsilon(1e-12));
        for (Parameter* x : params) {
            Objective f = [&](bool with_grad) {
                if (with_grad) {
                    p.zero_grad();
                    q.zero_grad();
                }
                return ewc_penalty(params, fishers, lambda, with_grad);
            };
            CHECK(finite_diff_check(f, *x) <= 1e-6);
        }
        p.zero_grad();
        q.zero_grad();
        ewc_penalty(params, fishers, lambda, true);
        CHECK(q.grad()[1] == 0.0);
    }
}

TEST_CASE("episodic memory") {
    SUBCASE("empty memory replays only new batches") {
        EpisodicMemory<Triple> memory(0);
        Rng rng(1);
        memory.offer({0, 0, 1}, rng);
        CHECK(memory.empty());
        const std::vector<Triple> fresh{{0, 0, 1}, {1, 0, 2}, {2, 0, 3}};
        const auto stream = emr_replay(memory, fresh, 2, rng);
        REQUIRE(stream.size() == 2);
        for (const auto& b : stream) CHECK(b.kind == BatchKind::fresh);
        CHECK(stream[1].triples.size() == 1);
    }
    SUBCASE("reservoir keeps capacity items from what was offered") {
        EpisodicMemory<Triple> memory(5);
        Rng rng(2);
        std::vector<Triple> offered;
        for (NodeId u = 0; u < 100; ++u) offered.push_back({u, 0, u + 1});
        memory.offer_all(offered, rng);
        CHECK(memory.size() == 5);
        std::set<Triple> distinct(memory.items().begin(), memory.items().end());
        CHECK(distinct.size() == 5);
        for (const Triple& t : memory.items()) CHECK(t.head < 100);
    }
    SUBCASE("reservoir sampling is roughly uniform") {
        std::vector<int> hits(20, 0);
        for (std::uint64_t seed = 0; seed < 2000; ++seed) {
            EpisodicMemory<int> memory(5);
            Rng rng(seed);
            for (int i = 0; i < 20; ++i) memory.offer(i, rng);
            for (int i : memory.items()) ++hits[static_cast<std::size_t>(i)];
        }
        // Expected 500 per item; 5 sigma is about 97.
        for (int h : hits) CHECK(std::abs(h - 500) < 110);
    }
    SUBCASE("replay is deterministic and covers the memory") {
        EpisodicMemory<Triple> memory(4);
        Rng fill(3);
        for (NodeId u = 0; u < 10; ++u) memory.offer({u, 1, u}, fill);
        const std::vector<Triple> fresh{{0, 0, 1}, {1, 0, 2}};
        Rng a(4), b(4);
        const auto sa = emr_replay(memory, fresh, 1, a);
        const auto sb = emr_replay(memory, fresh, 1, b);
        REQUIRE(sa.size() == sb.size());
        std::multiset<Triple> replayed;
        for (std::size_t i = 0; i < sa.size(); ++i) {
            CHECK(sa[i].triples == sb[i].triples);
            CHECK(sa[i].kind == (i % 2 == 0 ? BatchKind::fresh : BatchKind::replay));
            if (sa[i].kind == BatchKind::replay) replayed.insert(sa[i].triples.begin(), sa[i].triples.end());
        }
        CHECK(replayed == std::multiset<Triple>(memory.items().begin(), memory.items().end()));
    }
}

TEST_CASE("projection examples") {
    const std::vector<double> g{1.0, 2.0, -1.0};
    CHECK(agem_project(g, g) == g);
    const std::vector<double> neg{-1.0, -2.0, 1.0};
    for (double x : agem_project(g, neg)) CHECK(x == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(agem_project(g, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("projection removes only conflicting directions") {
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        Rng rng(seed);
        const auto g = random_vector(7, rng);
        const auto r = random_vector(7, rng);
        const auto out = agem_project(g, r);
        const double before = dot(g, r);
        if (before >= 0.0) {
            CHECK(out == g);
        } else {
            CHECK(std::fabs(dot(out, r)) <= 1e-9);
        }
        CHECK(dot(out, r) >= -1e-9);
    }
}

TEST_CASE("zero reference gradient warns and passes through") {
    std::ostringstream captured;
    auto* old = std::cerr.rdbuf(captured.rdbuf());
    const std::vector<double> g{1.0, -3.0};
    const auto out = agem_project(g, std::vector<double>{0.0, 0.0});
    std::cerr.rdbuf(old);
    CHECK(out == g);
    CHECK(captured.str().find("warning") != std::string::npos);
}

TEST_CASE("flattened gradients round-trip") {
    Parameter a("a", 2, 2), b("b", 1, 3);
    a.accumulate(1, 0.5);
    a.accumulate(3, -2.0);
    b.accumulate(0, 4.0);
    std::vector<Parameter*> params{&a, &b};
    const FlatGradient flat = flatten_gradients(params);
    CHECK(flat.values == std::vector<double>{0.0, 0.5, 0.0, -2.0, 4.0, 0.0, 0.0});
    CHECK(flat.touched == std::vector<std::uint8_t>{0, 1, 0, 1, 1, 0, 0});
    for (Parameter* p : params) p->zero_grad();
    b.accumulate(2, 9.0);
    assign_gradients(params, flat);
    CHECK(flatten_gradients(params).values == flat.values);
    CHECK(flatten_gradients(params).touched == flat.touched);
    FlatGradient short_flat{{1.0}, {1}};
    CHECK_THROWS_AS(assign_gradients(params, short_flat), std::invalid_argument);
}

TEST_CASE("model fisher touches only parameters the sample reaches") {
    ModelConfig cfg;
    cfg.components = 2;
    cfg.top_n = 1;
    cfg.dim = 4;
    Model m(cfg, 6, 2);
    const std::vector<Triple> sample{{0, 0, 1}, {1, 0, 2}};
    TripleSet known(sample.begin(), sample.end());
    TrainContext ctx;
    ctx.known = &known;
    ctx.node_pool = 3;
    Rng rng(1);
    const auto fisher = estimate_fisher(m, sample, ctx, rng);
    const auto& nodes = fisher.importance.at("node_components");
    // Nodes 3..5 never appear in a positive or in a corruption from [0, 3).
    for (std::size_t i = 3 * 4; i < 6 * 4; ++i) CHECK(nodes[i] == 0.0);
    double total = 0.0;
    for (double f : nodes) total += f;
    CHECK(total > 0.0);
    for (double f : fisher.importance.at("relation_embeddings")) CHECK(f >= 0.0);
}
