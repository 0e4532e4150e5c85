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

#include <algorithm>
#include <cmath>

#include "dicgrl/scorers.hpp"

using namespace dicgrl;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

// Explicit (rows x 3) matrix, filter by filter, row by row.
double convkb_oracle(const std::vector<double>& u, const std::vector<double>& r, const std::vector<double>& v,
                     const ConvKBParams& p) {
    const std::size_t M = p.filters.rows(), rows = u.size();
    auto f = p.filters.values();
    auto w = p.output.values();
    double score = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t m = 0; m < M; ++m) {
            const double z = f[m * 4] * u[i] + f[m * 4 + 1] * r[i] + f[m * 4 + 2] * v[i] + f[m * 4 + 3];
            score += w[i * M + m] * std::max(0.0, z);
        }
    }
    return score;
}

TableShape shape(std::size_t nodes, std::size_t K, std::size_t dc) {
    TableShape s;
    s.nodes = nodes;
    s.relations = 1;
    s.components = K;
    s.component_dim = dc;
    s.top_n = 1;
    return s;
}

std::vector<double> gat_oracle(std::size_t k, const std::vector<NodeId>& nbrs, const GATParams& p,
                               const DisentangledTable& t) {
    const std::size_t dc = t.component_dim(), h = p.hidden;
    std::vector<double> logits;
    for (NodeId v : nbrs) {
        double s = 0.0;
        for (std::size_t i = 0; i < dc; ++i) s += p.attention.values()[i] * t.component(v, k)[i];
        logits.push_back(s);
    }
    double z = 0.0;
    for (double s : logits) z += std::exp(s);
    std::vector<double> out(h, 0.0);
    for (std::size_t j = 0; j < nbrs.size(); ++j) {
        const double a = std::exp(logits[j]) / z;
        for (std::size_t row = 0; row < h; ++row) {
            double y = 0.0;
            for (std::size_t i = 0; i < dc; ++i)
                y += p.transform.values()[k * h * dc + row * dc + i] * t.component(nbrs[j], k)[i];
            out[row] += a * y;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("transe distance examples") {
    const std::vector<double> z(4, 0.0);
    CHECK(transe_score(z, z, z, 1) == 0.0);
    CHECK(transe_score(std::vector<double>{1, 0}, std::vector<double>{0, 1}, std::vector<double>{1, 1}, 1) == 0.0);
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto u = random_vec(8, rng), r = random_vec(8, rng), v = random_vec(8, rng);
        double sq = 0.0, abs = 0.0;
        for (std::size_t i = 0; i < 8; ++i) {
            sq += (u[i] + r[i] - v[i]) * (u[i] + r[i] - v[i]);
            abs += std::fabs(u[i] + r[i] - v[i]);
        }
        CHECK(transe_score(u, r, v, 2) == doctest::Approx(std::sqrt(sq)).epsilon(1e-14));
        CHECK(transe_score(u, r, v, 1) == doctest::Approx(abs).epsilon(1e-14));
        CHECK(transe_score(u, r, v, 1) >= 0.0);
    }
    CHECK_THROWS_AS(transe_score(std::vector<double>{1}, std::vector<double>{1, 2}, std::vector<double>{1}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(transe_score(z, z, z, 3), std::invalid_argument);
}

TEST_CASE("convkb examples") {
    SUBCASE("zero filters and biases") {
        ConvKBParams p = init_convkb(3, 4, 1);
        for (double& f : p.filters.values()) f = 0.0;
        CHECK(convkb_score(std::vector<double>(4, 0.7), std::vector<double>(4, -0.2), std::vector<double>(4, 1.1), p) ==
              0.0);
    }
    SUBCASE("single (1,1,-1) filter with all-ones output") {
        const std::size_t rows = 6;
        ConvKBParams p = init_convkb(1, rows, 1);
        auto f = p.filters.values();
        f[0] = 1.0;
        f[1] = 1.0;
        f[2] = -1.0;
        f[3] = 0.0;
        for (double& w : p.output.values()) w = 1.0;
        const std::vector<double> ones(rows, 1.0);
        CHECK(convkb_score(ones, ones, ones, p) == doctest::Approx(static_cast<double>(rows)));
    }
    SUBCASE("random parameters with two filters") {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            Rng rng(seed);
            ConvKBParams p = init_convkb(2, 5, seed);
            for (double& w : p.filters.values()) w = rng.uniform(-1, 1);
            for (double& w : p.output.values()) w = rng.uniform(-1, 1);
            const auto u = random_vec(5, rng), r = random_vec(5, rng), v = random_vec(5, rng);
            CHECK(convkb_score(u, r, v, p) == doctest::Approx(convkb_oracle(u, r, v, p)).epsilon(1e-13));
            // Positive homogeneity in W_1.
            const double base = convkb_score(u, r, v, p);
            for (double& w : p.output.values()) w *= 2.5;
            CHECK(convkb_score(u, r, v, p) == doctest::Approx(2.5 * base).epsilon(1e-13));
        }
    }
    SUBCASE("shape mismatch") {
        ConvKBParams p = init_convkb(2, 3, 1);
        const std::vector<double> four(4, 0.0);
        CHECK_THROWS(convkb_score(four, four, four, p));
    }
}

TEST_CASE("scorer gradients pass finite differences") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        Parameter emb("emb", 3, 8);
        for (double& x : emb.values()) x = rng.uniform(-1, 1);
        ConvKBParams p = init_convkb(2, 8, seed);
        for (double& w : p.output.values()) w = rng.uniform(-1, 1);
        for (int which = 0; which < 3; ++which) {
            Objective f = [&](bool with_grad) {
                emb.zero_grad();
                p.filters.zero_grad();
                p.output.zero_grad();
                Tape t;
                Var u = t.read(emb, 0, 8), r = t.read(emb, 8, 8), v = t.read(emb, 16, 8);
                Var s = which == 2 ? convkb_score(t, u, r, v, p) : transe_score(t, u, r, v, which == 0 ? 1 : 2);
                Var loss = t.sum(t.softplus(s));
                const double value = t.scalar(loss);
                if (with_grad) t.backward(loss);
                return value;
            };
            CHECK(finite_diff_check(f, emb) <= 1e-4);
            if (which == 2) {
                CHECK(finite_diff_check(f, p.filters) <= 1e-4);
                CHECK(finite_diff_check(f, p.output) <= 1e-4);
            }
        }
    }
}

TEST_CASE("tape scorers agree with value scorers") {
    Rng rng(30);
    Parameter emb("emb", 3, 6);
    for (double& x : emb.values()) x = rng.uniform(-1, 1);
    ConvKBParams p = init_convkb(3, 6, 5);
    Tape t;
    Var u = t.read(emb, 0, 6), r = t.read(emb, 6, 6), v = t.read(emb, 12, 6);
    CHECK(t.scalar(transe_score(t, u, r, v, 1)) == doctest::Approx(transe_score(emb.row(0), emb.row(1), emb.row(2), 1)));
    CHECK(t.scalar(convkb_score(t, u, r, v, p)) == doctest::Approx(convkb_score(emb.row(0), emb.row(1), emb.row(2), p)));
}

TEST_CASE("gat component update") {
    const std::size_t K = 3, dc = 2;
    DisentangledTable t = init_table(shape(5, K, dc), 4);
    GATParams p = init_gat(K, dc, dc, 9);
    SUBCASE("single neighbor") {
        const auto out = gat_update_component(1, std::vector<NodeId>{2}, p, t);
        const auto oracle = gat_oracle(1, {2}, p, t);
        for (std::size_t i = 0; i < dc; ++i) CHECK(out[i] == doctest::Approx(oracle[i]).epsilon(1e-14));
    }
    SUBCASE("two identical neighbors equal one") {
        const auto one = gat_update_component(0, std::vector<NodeId>{3}, p, t);
        const auto two = gat_update_component(0, std::vector<NodeId>{3, 3}, p, t);
        for (std::size_t i = 0; i < dc; ++i) CHECK(two[i] == doctest::Approx(one[i]).epsilon(1e-14));
    }
    SUBCASE("random neighbors match recomputation and ignore order") {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            DisentangledTable rt = init_table(shape(5, K, dc), seed);
            GATParams rp = init_gat(K, dc, dc, seed + 50);
            const std::vector<NodeId> nbrs{0, 2, 4};
            const auto out = gat_update_component(2, nbrs, rp, rt);
            const auto oracle = gat_oracle(2, nbrs, rp, rt);
            const auto reordered = gat_update_component(2, std::vector<NodeId>{4, 0, 2}, rp, rt);
            for (std::size_t i = 0; i < dc; ++i) {
                CHECK(out[i] == doctest::Approx(oracle[i]).epsilon(1e-13));
                CHECK(reordered[i] == doctest::Approx(out[i]).epsilon(1e-13));
            }
        }
    }
    SUBCASE("empty neighbor set") {
        CHECK_THROWS_AS(gat_update_component(0, std::vector<NodeId>{}, p, t), std::invalid_argument);
    }
    SUBCASE("gradient") {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            DisentangledTable gt = init_table(shape(4, K, dc), seed);
            GATParams gp = init_gat(K, dc, dc, seed + 7);
            const std::vector<NodeId> nbrs{0, 1, 3};
            Objective f = [&](bool with_grad) {
                gt.node_components.zero_grad();
                gp.attention.zero_grad();
                gp.transform.zero_grad();
                Tape tp;
                Var out = gat_update_component(tp, 1, nbrs, gp, gt);
                Var loss = tp.dot(out, tp.constant(std::vector<double>{0.7, -1.3}));
                const double v = tp.scalar(loss);
                if (with_grad) tp.backward(loss);
                return v;
            };
            CHECK(finite_diff_check(f, gp.attention) <= 1e-4);
            CHECK(finite_diff_check(f, gp.transform) <= 1e-4);
            CHECK(finite_diff_check(f, gt.node_components) <= 1e-4);
        }
    }
}

TEST_CASE("classifier logits") {
    const std::size_t K = 2, dc = 2;
    DisentangledTable t = init_table(shape(3, K, dc), 12);
    SUBCASE("zero weights give equal logits") {
        ClassifierParams c = init_classifier(3, K * dc, 1);
        for (double& w : c.weight.values()) w = 0.0;
        for (double l : classify_logits(1, t, c)) CHECK(l == 0.0);
    }
    SUBCASE("one-hot rows pick coordinates") {
        ClassifierParams c = init_classifier(4, K * dc, 1);
        for (double& w : c.weight.values()) w = 0.0;
        for (std::size_t row = 0; row < 4; ++row) c.weight.values()[row * 4 + (3 - row)] = 1.0;
        const auto logits = classify_logits(2, t, c);
        for (std::size_t row = 0; row < 4; ++row) CHECK(logits[row] == t.node(2)[3 - row]);
    }
    SUBCASE("random weights match recomputation") {
        ClassifierParams c = init_classifier(3, K * dc, 77);
        const auto logits = classify_logits(0, t, c);
        for (std::size_t row = 0; row < 3; ++row) {
            double s = 0.0;
            for (std::size_t i = 0; i < 4; ++i) s += c.weight.values()[row * 4 + i] * t.node(0)[i];
            CHECK(logits[row] == doctest::Approx(s).epsilon(1e-14));
        }
    }
    CHECK_THROWS(init_classifier(1, 4, 1));
    ClassifierParams c = init_classifier(2, 4, 1);
    CHECK_THROWS(classify_logits(std::vector<double>(3, 0.0), c));
}
