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
#include <filesystem>

#include "dicgrl/common.hpp"
#include "dicgrl/grad.hpp"

using namespace dicgrl;

namespace {

void fill_random(Parameter& p, Rng& rng, double lo = -1.0, double hi = 1.0) {
    for (double& v : p.values()) v = rng.uniform(lo, hi);
}

}  // namespace

TEST_CASE("x dot x at 3 has gradient 6") {
    Parameter x("x", 1, 1, 3.0);
    Tape tape;
    Var a = tape.read(x, 0, 1);
    Var loss = tape.dot(a, a);
    CHECK(tape.scalar(loss) == 9.0);
    tape.backward(loss);
    CHECK(x.grad()[0] == 6.0);
}

TEST_CASE("inactive relu passes no gradient") {
    Parameter x("x", 1, 1, -2.0);
    Tape tape;
    Var loss = tape.sum(tape.relu(tape.read(x, 0, 1)));
    tape.backward(loss);
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.touched()[0] == 1);

    Parameter z("z", 1, 1, 0.0);
    Tape t2;
    t2.backward(t2.sum(t2.relu(t2.read(z, 0, 1))));
    CHECK(z.grad()[0] == 0.0);
}

TEST_CASE("softplus at 0 has gradient one half") {
    Parameter x("x", 1, 1, 0.0);
    Tape tape;
    Var loss = tape.sum(tape.softplus(tape.read(x, 0, 1)));
    CHECK(tape.scalar(loss) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("non-scalar loss is rejected") {
    Parameter x("x", 1, 3, 1.0);
    Tape tape;
    Var v = tape.read(x, 0, 3);
    CHECK_THROWS_AS(tape.backward(v), std::invalid_argument);
}

TEST_CASE("unreachable parameters keep a zero gradient") {
    Parameter used("used", 1, 2, 1.0), unused("unused", 1, 2, 1.0);
    Tape tape;
    tape.read(unused, 0, 2);
    tape.backward(tape.sum(tape.read(used, 0, 2)));
    CHECK(unused.grad()[0] == 0.0);
    CHECK(unused.grad()[1] == 0.0);
    CHECK(used.grad()[1] == 1.0);
}

TEST_CASE("quadratic finite difference is exact up to rounding") {
    Parameter p("p", 1, 5);
    Rng rng(3);
    fill_random(p, rng);
    Objective f = [&](bool with_grad) {
        if (with_grad) p.zero_grad();
        Tape tape;
        Var x = tape.read(p, 0, 5);
        Var loss = tape.add(tape.dot(x, x), tape.scale(tape.sum(x), 3.0));
        const double value = tape.scalar(loss);
        if (with_grad) tape.backward(loss);
        return value;
    };
    CHECK(finite_diff_check(f, p) < 1e-7);
}

TEST_CASE("every primitive passes a finite-difference check") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        Parameter a("a", 1, 6), b("b", 1, 6), m("m", 3, 6), f("f", 2, 4), s("s", 1, 1);
        fill_random(a, rng);
        fill_random(b, rng);
        fill_random(m, rng);
        fill_random(f, rng);
        fill_random(s, rng, 0.5, 1.5);
        std::vector<Parameter*> all{&a, &b, &m, &f, &s};
        Objective obj = [&](bool with_grad) {
            if (with_grad)
                for (Parameter* p : all) p->zero_grad();
            Tape t;
            Var x = t.read(a, 0, 6), y = t.read(b, 0, 6), sc = t.read(s, 0, 1);
            std::vector<Var> terms;
            terms.push_back(t.sum(t.mul(x, y)));
            terms.push_back(t.pnorm(t.sub(x, y), 2));
            terms.push_back(t.pnorm(t.add_scalar(x, 0.1), 1));
            terms.push_back(t.sum(t.logistic(t.scale(y, 2.0))));
            terms.push_back(t.sum(t.softplus(t.scale_by(x, sc))));
            Var mv = t.matvec(m, 0, 3, 6, t.relu(x));
            terms.push_back(t.dot(t.softmax(mv), t.constant(std::vector<double>{1.0, -2.0, 0.5})));
            terms.push_back(t.sum(t.scale(t.log_softmax(mv), -0.3)));
            Var cat = t.concat(std::vector<Var>{t.slice(x, 1, 2), t.slice(y, 3, 2)});
            terms.push_back(t.sum(t.mul(cat, cat)));
            Var conv = t.conv_rows(t.slice(x, 0, 3), t.slice(y, 0, 3), t.slice(x, 3, 3), f);
            terms.push_back(t.sum(t.relu(conv)));
            Var loss = t.sum(t.add_n(std::vector<Var>{t.constant(0.0), terms[0]}));
            for (std::size_t i = 1; i < terms.size(); ++i) loss = t.add(loss, terms[i]);
            const double value = t.scalar(loss);
            if (with_grad) t.backward(loss);
            return value;
        };
        for (Parameter* p : all) CHECK(finite_diff_check(obj, *p) <= 1e-4);
    }
}

TEST_CASE("backward is bit-deterministic") {
    Rng rng(9);
    Parameter a("a", 2, 4);
    fill_random(a, rng);
    auto run = [&]() {
        a.zero_grad();
        Tape t;
        Var x = t.read(a, 0, 8);
        t.backward(t.sum(t.softplus(t.matvec(a, 0, 2, 4, t.slice(x, 2, 4)))));
        return std::vector<double>(a.grad().begin(), a.grad().end());
    };
    const auto g1 = run();
    const auto g2 = run();
    CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("adam first step moves by the learning rate") {
    Parameter p("p", 1, 1, 0.5);
    Adam adam(AdamOptions{});
    p.accumulate(0, 1.0);
    std::vector<Parameter*> params{&p};
    adam.step(params);
    CHECK(p.values()[0] == doctest::Approx(0.5 - 0.001).epsilon(1e-9));
    CHECK(p.grad()[0] == 0.0);
    CHECK(p.touched()[0] == 0);
}

TEST_CASE("adam with zero gradient leaves values and counts the step") {
    Parameter p("p", 1, 2, 0.25);
    Adam adam;
    std::vector<Parameter*> params{&p};
    p.accumulate(0, 0.0);
    adam.step(params);
    adam.step(params);
    CHECK(p.values()[0] == 0.25);
    CHECK(p.values()[1] == 0.25);
    CHECK(adam.step_count() == 2);
}

TEST_CASE("adam matches the scalar recurrence over two steps") {
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.3;
    Parameter p("p", 1, 1, 2.0);
    Adam adam(AdamOptions{lr, b1, b2, eps});
    std::vector<Parameter*> params{&p};
    double theta = 2.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
        p.accumulate(0, g);
        adam.step(params);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        theta -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    }
    CHECK(p.values()[0] == doctest::Approx(theta).epsilon(1e-14));
}

TEST_CASE("adam skips untouched entries entirely") {
    Parameter p("p", 1, 2, 1.0);
    Adam adam;
    std::vector<Parameter*> params{&p};
    p.accumulate(0, 1.0);
    adam.step(params);
    const double untouched = p.values()[1];
    p.accumulate(0, -1.0);
    adam.step(params);
    CHECK(p.values()[1] == untouched);
    CHECK(untouched == 1.0);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    Rng rng(17);
    Parameter a("node_components", 3, 4), b("classifier", 2, 2);
    fill_random(a, rng, -1e3, 1e3);
    fill_random(b, rng, -1e-9, 1e-9);
    b.values()[0] = 0.1;
    const auto path = (std::filesystem::temp_directory_path() / "dicgrl_ckpt_test.txt").string();
    std::vector<const Parameter*> out{&a, &b};
    save_checkpoint(path, out);
    Parameter a2("node_components", 3, 4), b2("classifier", 2, 2);
    std::vector<Parameter*> in{&a2, &b2};
    restore_checkpoint(load_checkpoint(path), in);
    CHECK(std::memcmp(a.values().data(), a2.values().data(), a.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(b.values().data(), b2.values().data(), b.size() * sizeof(double)) == 0);

    Parameter wrong("classifier", 3, 2);
    std::vector<Parameter*> bad{&wrong};
    CHECK_THROWS_AS(restore_checkpoint(load_checkpoint(path), bad), DataError);
}

TEST_CASE("rng is reproducible and within range") {
    Rng a(5), b(5);
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.uniform_index(7);
        CHECK(x == b.uniform_index(7));
        CHECK(x < 7);
        const double u = a.uniform01();
        CHECK(u == b.uniform01());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}

TEST_CASE("shortest decimal formatting round-trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) CHECK(std::stod(format_double(v)) == v);
}
