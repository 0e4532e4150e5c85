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

#include "dicgrl/grad.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dicgrl/common.hpp"

namespace dicgrl {

Parameter::Parameter(std::string name, std::size_t rows, std::size_t cols, double fill)
    : name_(std::move(name)), rows_(rows), cols_(cols), values_(rows * cols, fill), grad_(rows * cols, 0.0),
      touched_(rows * cols, 0) {}

void Parameter::accumulate(std::size_t offset, std::span<const double> g) {
    double* dst = grad_.data() + offset;
    std::uint8_t* flags = touched_.data() + offset;
    for (std::size_t i = 0; i < g.size(); ++i) {
        dst[i] += g[i];
        flags[i] = 1;
    }
}

void Parameter::zero_grad() {
    std::fill(grad_.begin(), grad_.end(), 0.0);
    std::fill(touched_.begin(), touched_.end(), 0);
}

Var Tape::push(Node node) {
    node.offset = values_.size();
    values_.resize(values_.size() + node.len, 0.0);
    nodes_.push_back(node);
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::require_same_length(Var a, Var b, const char* what) const {
    if (nodes_.at(a.id).len != nodes_.at(b.id).len)
        throw std::invalid_argument(std::string("tape: length mismatch in ") + what);
}

Var Tape::constant(std::span<const double> values) {
    Node n{Op::constant};
    n.len = values.size();
    Var v = push(n);
    std::copy(values.begin(), values.end(), val(v.id));
    return v;
}

Var Tape::constant(double value) { return constant(std::span<const double>(&value, 1)); }

Var Tape::read(Parameter& p, std::size_t offset, std::size_t len) {
    if (offset + len > p.size()) throw std::out_of_range("tape: parameter read out of range");
    Node n{Op::read};
    n.len = len;
    n.param = &p;
    n.p_offset = offset;
    Var v = push(n);
    auto src = p.values().subspan(offset, len);
    std::copy(src.begin(), src.end(), val(v.id));
    return v;
}

Var Tape::add(Var a, Var b) {
    require_same_length(a, b, "add");
    Node n{Op::add, a.id, b.id};
    n.len = nodes_[a.id].len;
    Var v = push(n);
    const double *x = val(a.id), *y = val(b.id);
    double* out = val(v.id);
    for (std::size_t i = 0; i < n.len; ++i) out[i] = x[i] + y[i];
    return v;
}

Var Tape::sub(Var a, Var b) {
    require_same_length(a, b, "sub");
    Node n{Op::sub, a.id, b.id};
    n.len = nodes_[a.id].len;
    Var v = push(n);
    const double *x = val(a.id), *y = val(b.id);
    double* out = val(v.id);
    for (std::size_t i = 0; i < n.len; ++i) out[i] = x[i] - y[i];
    return v;
}

Var Tape::mul(Var a, Var b) {
    require_same_length(a, b, "mul");
    Node n{Op::mul, a.id, b.id};
    n.len = nodes_[a.id].len;
    Var v = push(n);
    const double *x = val(a.id), *y = val(b.id);
    double* out = val(v.id);
    for (std::size_t i = 0; i < n.len; ++i) out[i] = x[i] * y[i];
    return v;
}

Var Tape::scale(Var a, double c) {
    Node n{Op::scale, a.id};
    n.len = nodes_.at(a.id).len;
    n.k = c;
    Var v = push(n);
    const double* x = val(a.id);
    double* out = val(v.id);
    for (std::size_t i = 0; i < n.len; ++i) out[i] = c * x[i];
    return v;
}

Var Tape::scale_by(Var a, Var s) {
    if (nodes_.at(s.id).len != 1) throw std::invalid_argument("tape: scale_by expects a scalar");
    Node n{Op::scale_by, a.id, s.id};
    n.len = nodes_.at(a.id).len;
    Var v = push(n);
    const double* x = val(a.id);
    const double c = *val(s.id);
    double* out = val(v.id);
    for (std::size_t i = 0; i < n.len; ++i) out[i] = c * x[i];
    return v;
}

Var Tape::add_scalar(Var a, double c) {
    Node n{Op::add_scalar, a.id};
    n.len = nodes_.at(a.id).len;
    n.k = c;
    Var v = push(n);
    const double* x = val(a.id);
    double* out = val(v.id);
    for (std::size_t i = 0; i < n.len; ++i) out[i] = x[i] + c;
    return v;
}

Var Tape::sum(Var a) {
    Node n{Op::sum, a.id};
    n.len = 1;
    Var v = push(n);
    const double* x = val(a.id);
    double s = 0.0;
    for (std::size_t i = 0; i < nodes_[a.id].len; ++i) s += x[i];
    *val(v.id) = s;
    return v;
}

Var Tape::add_n(std::span<const Var> terms) {
    if (terms.empty()) throw std::invalid_argument("tape: add_n of nothing");
    for (Var t : terms) require_same_length(terms[0], t, "add_n");
    Node n{Op::add_n};
    n.len = nodes_[terms[0].id].len;
    n.list_begin = static_cast<std::uint32_t>(lists_.size());
    n.list_len = static_cast<std::uint32_t>(terms.size());
    for (Var t : terms) lists_.push_back(t.id);
    Var v = push(n);
    double* out = val(v.id);
    for (Var t : terms) {
        const double* x = val(t.id);
        for (std::size_t i = 0; i < n.len; ++i) out[i] += x[i];
    }
    return v;
}

Var Tape::dot(Var a, Var b) {
    require_same_length(a, b, "dot");
    Node n{Op::dot, a.id, b.id};
    n.len = 1;
    Var v = push(n);
    const double *x = val(a.id), *y = val(b.id);
    double s = 0.0;
    for (std::size_t i = 0; i < nodes_[a.id].len; ++i) s += x[i] * y[i];
    *val(v.id) = s;
    return v;
}

Var Tape::matvec(Parameter& p, std::size_t offset, std::size_t rows, std::size_t cols, Var x) {
    if (nodes_.at(x.id).len != cols) throw std::invalid_argument("tape: matvec shape mismatch");
    if (offset + rows * cols > p.size()) throw std::out_of_range("tape: matvec block out of range");
    Node n{Op::matvec, x.id};
    n.len = rows;
    n.param = &p;
    n.p_offset = offset;
    n.p_rows = rows;
    n.p_cols = cols;
    Var v = push(n);
    const double* w = p.values().data() + offset;
    const double* in = val(x.id);
    double* out = val(v.id);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += w[r * cols + c] * in[c];
        out[r] = s;
    }
    return v;
}

Var Tape::concat(std::span<const Var> parts) {
    Node n{Op::concat};
    n.list_begin = static_cast<std::uint32_t>(lists_.size());
    n.list_len = static_cast<std::uint32_t>(parts.size());
    for (Var p : parts) {
        lists_.push_back(p.id);
        n.len += nodes_.at(p.id).len;
    }
    Var v = push(n);
    double* out = val(v.id);
    for (Var p : parts) {
        const double* x = val(p.id);
        out = std::copy(x, x + nodes_[p.id].len, out);
    }
    return v;
}

Var Tape::slice(Var a, std::size_t offset, std::size_t len) {
    if (offset + len > nodes_.at(a.id).len) throw std::out_of_range("tape: slice out of range");
    Node n{Op::slice, a.id};
    n.len = len;
    n.p_offset = offset;
    Var v = push(n);
    const double* x = val(a.id) + offset;
    std::copy(x, x + len, val(v.id));
    return v;
}

Var Tape::pnorm(Var a, int p) {
    if (p != 1 && p != 2) throw std::invalid_argument("tape: pnorm order must be 1 or 2");
    Node n{Op::pnorm, a.id};
    n.len = 1;
    n.k = p;
    Var v = push(n);
    const double* x = val(a.id);
    double s = 0.0;
    const std::size_t len = nodes_[a.id].len;
    if (p == 1) {
        for (std::size_t i = 0; i < len; ++i) s += std::fabs(x[i]);
    } else {
        for (std::size_t i = 0; i < len; ++i) s += x[i] * x[i];
        s = std::sqrt(s);
    }
    *val(v.id) = s;
    return v;
}

Var Tape::relu(Var a) {
    Node n{Op::relu, a.id};
    n.len = nodes_.at(a.id).len;
    Var v = push(n);
    const double* x = val(a.id);
    double* out = val(v.id);
    for (std::size_t i = 0; i < n.len; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return v;
}

Var Tape::softmax(Var a) {
    Node n{Op::softmax, a.id};
    n.len = nodes_.at(a.id).len;
    Var v = push(n);
    const double* x = val(a.id);
    double* out = val(v.id);
    const double m = *std::max_element(x, x + n.len);
    double z = 0.0;
    for (std::size_t i = 0; i < n.len; ++i) {
        out[i] = std::exp(x[i] - m);
        z += out[i];
    }
    for (std::size_t i = 0; i < n.len; ++i) out[i] /= z;
    return v;
}

Var Tape::log_softmax(Var a) {
    Node n{Op::log_softmax, a.id};
    n.len = nodes_.at(a.id).len;
    Var v = push(n);
    const double* x = val(a.id);
    double* out = val(v.id);
    const double m = *std::max_element(x, x + n.len);
    double z = 0.0;
    for (std::size_t i = 0; i < n.len; ++i) z += std::exp(x[i] - m);
    const double lse = m + std::log(z);
    for (std::size_t i = 0; i < n.len; ++i) out[i] = x[i] - lse;
    return v;
}

namespace {

double softplus_value(double x) { return std::log1p(std::exp(-std::fabs(x))) + std::max(x, 0.0); }

double logistic_value(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Var Tape::softplus(Var a) {
    Node n{Op::softplus, a.id};
    n.len = nodes_.at(a.id).len;
    Var v = push(n);
    const double* x = val(a.id);
    double* out = val(v.id);
    for (std::size_t i = 0; i < n.len; ++i) out[i] = softplus_value(x[i]);
    return v;
}

Var Tape::logistic(Var a) {
    Node n{Op::logistic, a.id};
    n.len = nodes_.at(a.id).len;
    Var v = push(n);
    const double* x = val(a.id);
    double* out = val(v.id);
    for (std::size_t i = 0; i < n.len; ++i) out[i] = logistic_value(x[i]);
    return v;
}

Var Tape::conv_rows(Var u, Var r, Var v, Parameter& filters) {
    require_same_length(u, r, "conv_rows");
    require_same_length(u, v, "conv_rows");
    if (filters.cols() != 4) throw std::invalid_argument("tape: conv filters must be M x 4");
    const std::size_t rows = nodes_[u.id].len;
    const std::size_t m_count = filters.rows();
    Node n{Op::conv_rows, u.id, r.id, v.id};
    n.len = rows * m_count;
    n.param = &filters;
    Var out_var = push(n);
    const double *xu = val(u.id), *xr = val(r.id), *xv = val(v.id);
    const double* w = filters.values().data();
    double* out = val(out_var.id);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t m = 0; m < m_count; ++m)
            out[i * m_count + m] = w[m * 4] * xu[i] + w[m * 4 + 1] * xr[i] + w[m * 4 + 2] * xv[i] + w[m * 4 + 3];
    return out_var;
}

std::span<const double> Tape::value(Var v) const {
    const Node& n = nodes_.at(v.id);
    return std::span<const double>(values_.data() + n.offset, n.len);
}

double Tape::scalar(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.len != 1) throw std::invalid_argument("tape: node is not a scalar");
    return values_[n.offset];
}

void Tape::clear() {
    nodes_.clear();
    values_.clear();
    lists_.clear();
    grads_.clear();
}

void Tape::backward(Var loss) {
    if (loss.id >= nodes_.size()) throw std::invalid_argument("tape: loss is not on this tape");
    if (nodes_[loss.id].len != 1) throw std::invalid_argument("tape: backward requires a scalar loss");
    grads_.assign(values_.size(), 0.0);
    grads_[nodes_[loss.id].offset] = 1.0;
    auto g = [this](std::uint32_t id) { return grads_.data() + nodes_[id].offset; };

    for (std::size_t idx = loss.id + 1; idx-- > 0;) {
        const Node& n = nodes_[idx];
        const double* gy = grads_.data() + n.offset;
        const double* y = values_.data() + n.offset;
        switch (n.op) {
            case Op::constant:
                break;
            case Op::read:
                n.param->accumulate(n.p_offset, std::span<const double>(gy, n.len));
                break;
            case Op::add: {
                double *ga = g(n.a), *gb = g(n.b);
                for (std::size_t i = 0; i < n.len; ++i) {
                    ga[i] += gy[i];
                    gb[i] += gy[i];
                }
                break;
            }
            case Op::sub: {
                double *ga = g(n.a), *gb = g(n.b);
                for (std::size_t i = 0; i < n.len; ++i) {
                    ga[i] += gy[i];
                    gb[i] -= gy[i];
                }
                break;
            }
            case Op::mul: {
                double *ga = g(n.a), *gb = g(n.b);
                const double *xa = val(n.a), *xb = val(n.b);
                for (std::size_t i = 0; i < n.len; ++i) {
                    ga[i] += gy[i] * xb[i];
                    gb[i] += gy[i] * xa[i];
                }
                break;
            }
            case Op::scale: {
                double* ga = g(n.a);
                for (std::size_t i = 0; i < n.len; ++i) ga[i] += n.k * gy[i];
                break;
            }
            case Op::scale_by: {
                double *ga = g(n.a), *gs = g(n.b);
                const double* x = val(n.a);
                const double c = *val(n.b);
                double acc = 0.0;
                for (std::size_t i = 0; i < n.len; ++i) {
                    ga[i] += c * gy[i];
                    acc += x[i] * gy[i];
                }
                *gs += acc;
                break;
            }
            case Op::add_scalar: {
                double* ga = g(n.a);
                for (std::size_t i = 0; i < n.len; ++i) ga[i] += gy[i];
                break;
            }
            case Op::sum: {
                double* ga = g(n.a);
                for (std::size_t i = 0; i < nodes_[n.a].len; ++i) ga[i] += gy[0];
                break;
            }
            case Op::add_n: {
                for (std::uint32_t j = 0; j < n.list_len; ++j) {
                    double* gt = g(lists_[n.list_begin + j]);
                    for (std::size_t i = 0; i < n.len; ++i) gt[i] += gy[i];
                }
                break;
            }
            case Op::dot: {
                double *ga = g(n.a), *gb = g(n.b);
                const double *xa = val(n.a), *xb = val(n.b);
                for (std::size_t i = 0; i < nodes_[n.a].len; ++i) {
                    ga[i] += gy[0] * xb[i];
                    gb[i] += gy[0] * xa[i];
                }
                break;
            }
            case Op::matvec: {
                double* gx = g(n.a);
                const double* x = val(n.a);
                const double* w = n.param->values().data() + n.p_offset;
                for (std::size_t r = 0; r < n.p_rows; ++r) {
                    for (std::size_t c = 0; c < n.p_cols; ++c) {
                        gx[c] += w[r * n.p_cols + c] * gy[r];
                        n.param->accumulate(n.p_offset + r * n.p_cols + c, gy[r] * x[c]);
                    }
                }
                break;
            }
            case Op::concat: {
                const double* src = gy;
                for (std::uint32_t j = 0; j < n.list_len; ++j) {
                    const std::uint32_t part = lists_[n.list_begin + j];
                    double* gp = g(part);
                    for (std::size_t i = 0; i < nodes_[part].len; ++i) gp[i] += src[i];
                    src += nodes_[part].len;
                }
                break;
            }
            case Op::slice: {
                double* ga = g(n.a) + n.p_offset;
                for (std::size_t i = 0; i < n.len; ++i) ga[i] += gy[i];
                break;
            }
            case Op::pnorm: {
                double* ga = g(n.a);
                const double* x = val(n.a);
                const std::size_t len = nodes_[n.a].len;
                if (n.k == 1.0) {
                    for (std::size_t i = 0; i < len; ++i)
                        ga[i] += gy[0] * (x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0));
                } else if (y[0] > 0.0) {
                    for (std::size_t i = 0; i < len; ++i) ga[i] += gy[0] * x[i] / y[0];
                }
                break;
            }
            case Op::relu: {
                double* ga = g(n.a);
                const double* x = val(n.a);
                for (std::size_t i = 0; i < n.len; ++i)
                    if (x[i] > 0.0) ga[i] += gy[i];
                break;
            }
            case Op::softmax: {
                double* ga = g(n.a);
                double inner = 0.0;
                for (std::size_t i = 0; i < n.len; ++i) inner += gy[i] * y[i];
                for (std::size_t i = 0; i < n.len; ++i) ga[i] += y[i] * (gy[i] - inner);
                break;
            }
            case Op::log_softmax: {
                double* ga = g(n.a);
                double total = 0.0;
                for (std::size_t i = 0; i < n.len; ++i) total += gy[i];
                for (std::size_t i = 0; i < n.len; ++i) ga[i] += gy[i] - std::exp(y[i]) * total;
                break;
            }
            case Op::softplus: {
                double* ga = g(n.a);
                const double* x = val(n.a);
                for (std::size_t i = 0; i < n.len; ++i) ga[i] += gy[i] * logistic_value(x[i]);
                break;
            }
            case Op::logistic: {
                double* ga = g(n.a);
                for (std::size_t i = 0; i < n.len; ++i) ga[i] += gy[i] * y[i] * (1.0 - y[i]);
                break;
            }
            case Op::conv_rows: {
                double *gu = g(n.a), *gr = g(n.b), *gv = g(n.c);
                const double *xu = val(n.a), *xr = val(n.b), *xv = val(n.c);
                const std::size_t m_count = n.param->rows();
                const std::size_t rows = nodes_[n.a].len;
                const double* w = n.param->values().data();
                std::vector<double> gw(m_count * 4, 0.0);
                for (std::size_t i = 0; i < rows; ++i) {
                    for (std::size_t m = 0; m < m_count; ++m) {
                        const double go = gy[i * m_count + m];
                        gu[i] += go * w[m * 4];
                        gr[i] += go * w[m * 4 + 1];
                        gv[i] += go * w[m * 4 + 2];
                        gw[m * 4] += go * xu[i];
                        gw[m * 4 + 1] += go * xr[i];
                        gw[m * 4 + 2] += go * xv[i];
                        gw[m * 4 + 3] += go;
                    }
                }
                n.param->accumulate(0, gw);
                break;
            }
        }
    }
}

double finite_diff_check(const Objective& f, Parameter& p, FiniteDiffOptions options) {
    f(true);
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    const double h = options.step;
    double worst = 0.0;
    auto values = p.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        const double f0 = f(false);
        values[i] = saved + h;
        const double fp = f(false);
        values[i] = saved - h;
        const double fm = f(false);
        values[i] = saved;
        const double central = (fp - fm) / (2.0 * h);
        const double forward = (fp - f0) / h;
        const double backward = (f0 - fm) / h;
        const double err = std::fabs(analytic[i] - central);
        const double scale = std::max(1.0, std::fabs(analytic[i]));
        // A derivative jump inside [x-h, x+h] shows up as a one-sided
        // disagreement about twice the central error; smooth points have
        // |forward - backward| ~ h * f'' which is far below a real error.
        if (err / scale > 1e-6 && std::fabs(forward - backward) >= 1.5 * err) continue;
        worst = std::max(worst, err / scale);
    }
    f(true);
    return worst;
}

void Adam::step(std::span<Parameter* const> params) {
    ++steps_;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (Parameter* p : params) {
        Moments& mom = moments_[p->name()];
        if (mom.first.size() != p->size()) {
            mom.first.assign(p->size(), 0.0);
            mom.second.assign(p->size(), 0.0);
        }
        auto values = p->values();
        auto grad = p->grad();
        auto touched = p->touched();
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!touched[i]) continue;
            const double gi = grad[i];
            mom.first[i] = b1 * mom.first[i] + (1.0 - b1) * gi;
            mom.second[i] = b2 * mom.second[i] + (1.0 - b2) * gi * gi;
            const double mhat = mom.first[i] / corr1;
            const double vhat = mom.second[i] / corr2;
            values[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.epsilon);
        }
        p->zero_grad();
    }
}

void Adam::reset() {
    steps_ = 0;
    moments_.clear();
}

namespace {
constexpr const char* kCheckpointHeader = "dicgrl-checkpoint v1";
}

void save_checkpoint(const std::string& path, std::span<const Parameter* const> params) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint " + path);
    out << kCheckpointHeader << '\n';
    for (const Parameter* p : params) {
        out << p->name() << ' ' << p->rows() << ' ' << p->cols();
        for (double v : p->values()) out << ' ' << format_double(v);
        out << '\n';
    }
    if (!out) throw DataError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint " + path);
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointHeader)
        throw DataError(path + ": not a version-1 checkpoint");
    Checkpoint result;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string name;
        CheckpointEntry entry;
        if (!(fields >> name >> entry.rows >> entry.cols)) throw DataError(path + ": malformed entry header");
        entry.values.reserve(entry.rows * entry.cols);
        std::string token;
        while (fields >> token) {
            double v = 0.0;
            auto res = std::from_chars(token.data(), token.data() + token.size(), v);
            if (res.ec != std::errc() || res.ptr != token.data() + token.size())
                throw DataError(path + ": bad value '" + token + "' in " + name);
            entry.values.push_back(v);
        }
        if (entry.values.size() != entry.rows * entry.cols) throw DataError(path + ": size mismatch in " + name);
        result.emplace(std::move(name), std::move(entry));
    }
    return result;
}

void restore_checkpoint(const Checkpoint& checkpoint, std::span<Parameter* const> params) {
    for (Parameter* p : params) {
        auto it = checkpoint.find(p->name());
        if (it == checkpoint.end()) throw DataError("checkpoint lacks parameter " + p->name());
        if (it->second.rows != p->rows() || it->second.cols != p->cols())
            throw DataError("checkpoint shape mismatch for " + p->name());
        std::copy(it->second.values.begin(), it->second.values.end(), p->values().begin());
    }
}

}  // namespace dicgrl
