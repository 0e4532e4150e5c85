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

// Reverse-mode differentiation over small dense vectors.
//
// A Tape records vector-valued primitive operations in execution order; since
// every node's inputs are recorded before the node itself, walking the node
// list backwards is a valid reverse topological order. Parameters are read
// onto the tape through slices and receive gradients on backward().

#ifndef DICGRL_GRAD_HPP_
#define DICGRL_GRAD_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace dicgrl {

// Dense row-major matrix of trainable values with a same-shaped gradient
// accumulator. `touched` marks entries that received a gradient since the last
// zero_grad(); the optimizer only moves touched entries.
class Parameter {
  public:
    Parameter() = default;
    Parameter(std::string name, std::size_t rows, std::size_t cols, double fill = 0.0);

    const std::string& name() const { return name_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::span<double> grad() { return grad_; }
    std::span<const double> grad() const { return grad_; }
    std::span<std::uint8_t> touched() { return touched_; }
    std::span<const std::uint8_t> touched() const { return touched_; }

    std::span<double> row(std::size_t r) { return std::span<double>(values_).subspan(r * cols_, cols_); }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(values_).subspan(r * cols_, cols_);
    }

    void accumulate(std::size_t offset, std::span<const double> g);
    void accumulate(std::size_t offset, double g) {
        grad_[offset] += g;
        touched_[offset] = 1;
    }
    void zero_grad();
    // Clears both the gradient and the touched flag of one entry.
    void drop_grad(std::size_t offset) {
        grad_[offset] = 0.0;
        touched_[offset] = 0;
    }

  private:
    std::string name_;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
    std::vector<double> grad_;
    std::vector<std::uint8_t> touched_;
};

struct Var {
    std::uint32_t id = 0;
};

class Tape {
  public:
    Tape() = default;

    Var constant(std::span<const double> values);
    Var constant(double value);
    // Leaf reading `len` consecutive values of p starting at flat offset.
    Var read(Parameter& p, std::size_t offset, std::size_t len);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var scale(Var a, double c);
    // Vector a times scalar node s.
    Var scale_by(Var a, Var s);
    Var add_scalar(Var a, double c);
    Var sum(Var a);
    Var add_n(std::span<const Var> terms);  // equal lengths
    Var dot(Var a, Var b);
    // Block of p viewed as a rows x cols matrix starting at flat offset, times x.
    Var matvec(Parameter& p, std::size_t offset, std::size_t rows, std::size_t cols, Var x);
    Var concat(std::span<const Var> parts);
    Var slice(Var a, std::size_t offset, std::size_t len);
    Var pnorm(Var a, int p);  // p in {1, 2}
    Var relu(Var a);
    Var softmax(Var a);
    Var log_softmax(Var a);
    Var softplus(Var a);
    Var logistic(Var a);
    // Row-wise 1x3 convolution over the columns (u, r, v), one output per row
    // per filter, laid out row-major as out[i * M + m]. `filters` is M x 4
    // with rows (w_u, w_r, w_v, bias).
    Var conv_rows(Var u, Var r, Var v, Parameter& filters);

    std::span<const double> value(Var v) const;
    double scalar(Var v) const;
    std::size_t length(Var v) const { return nodes_.at(v.id).len; }
    std::size_t node_count() const { return nodes_.size(); }

    // Accumulates d(loss)/d(parameter) into every parameter read on this tape.
    // Throws std::invalid_argument if loss is not a scalar.
    void backward(Var loss);
    void clear();

  private:
    enum class Op : std::uint8_t {
        constant, read, add, sub, mul, scale, scale_by, add_scalar, sum, add_n, dot, matvec,
        concat, slice, pnorm, relu, softmax, log_softmax, softplus, logistic, conv_rows,
    };
    struct Node {
        Op op;
        std::uint32_t a = 0;
        std::uint32_t b = 0;
        std::uint32_t c = 0;
        std::size_t offset = 0;  // value offset into values_
        std::size_t len = 0;
        Parameter* param = nullptr;
        std::size_t p_offset = 0;
        std::size_t p_rows = 0;
        std::size_t p_cols = 0;
        double k = 0.0;
        std::uint32_t list_begin = 0;
        std::uint32_t list_len = 0;
    };

    Var push(Node node);
    double* val(std::uint32_t id) { return values_.data() + nodes_[id].offset; }
    const double* val(std::uint32_t id) const { return values_.data() + nodes_[id].offset; }
    void require_same_length(Var a, Var b, const char* what) const;

    std::vector<Node> nodes_;
    std::vector<double> values_;
    std::vector<std::uint32_t> lists_;
    std::vector<double> grads_;
};

// Loss evaluation closure for gradient checking. Called with true it must zero
// the gradients, compute the loss and populate gradients; with false it only
// returns the loss value.
using Objective = std::function<double(bool with_grad)>;

struct FiniteDiffOptions {
    double step = 1e-5;
    // Coordinates whose central difference straddles a non-differentiable
    // point are detected through one-sided difference disagreement and skipped.
    double kink_tolerance = 1e-3;
};

// max over coordinates of |analytic - numeric| / max(1, |analytic|).
double finite_diff_check(const Objective& f, Parameter& p, FiniteDiffOptions options = {});

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Bias-corrected Adam. Only entries flagged as touched are moved (and only
// their moments advance); all gradients are zeroed afterwards.
class Adam {
  public:
    explicit Adam(AdamOptions options = {}) : options_(options) {}

    void step(std::span<Parameter* const> params);
    std::uint64_t step_count() const { return steps_; }
    const AdamOptions& options() const { return options_; }
    void reset();

  private:
    struct Moments {
        std::vector<double> first;
        std::vector<double> second;
    };
    AdamOptions options_;
    std::uint64_t steps_ = 0;
    std::unordered_map<std::string, Moments> moments_;
};

// Textual checkpoint: header line then one `name rows cols v0 v1 ...` line per
// parameter, values in shortest round-trip decimal form.
struct CheckpointEntry {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
};
using Checkpoint = std::map<std::string, CheckpointEntry>;

void save_checkpoint(const std::string& path, std::span<const Parameter* const> params);
Checkpoint load_checkpoint(const std::string& path);
// Copies matching entries into params; throws DataError on missing or
// mis-shaped entries.
void restore_checkpoint(const Checkpoint& checkpoint, std::span<Parameter* const> params);

}  // namespace dicgrl

#endif  // DICGRL_GRAD_HPP_
