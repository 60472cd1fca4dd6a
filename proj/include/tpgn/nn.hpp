#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tpgn {
class Rng;
}

namespace tpgn::nn {

/// Dense row-major matrix; vectors are rows x 1.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  std::size_t size() const { return data.size(); }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Learned tensor with its gradient slot and Adagrad accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor accum;

  std::size_t rows() const { return value.rows; }
  std::size_t cols() const { return value.cols; }
};

enum class Init { Zero, Uniform };

/// Owns parameters at stable addresses, in registration order.
class ParameterSet {
 public:
  /// Weights draw from uniform(-scale, scale); Init::Zero is for biases.
  Parameter& add(const std::string& name, std::size_t rows, std::size_t cols, Init init, Rng& rng,
                 double scale = 0.1);

  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  Parameter* find(const std::string& name);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  void reset_accumulators(double value);
  std::size_t num_values() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Graph;

/// Handle to a node on a Graph tape.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  std::span<const double> value() const;
  double scalar() const;
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return rows() * cols(); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
/// insertion order is a valid topological order for backpropagation.
class Graph {
 public:
  using Backward = std::function<void(Graph&, std::size_t)>;

  Var constant(std::vector<double> values, std::size_t rows, std::size_t cols = 1);
  Var constant(std::vector<double> values) {
    const auto n = values.size();
    return constant(std::move(values), n, 1);
  }
  Var zeros(std::size_t rows, std::size_t cols = 1) { return constant(std::vector<double>(rows * cols, 0.0), rows, cols); }

  /// Leaf mirroring a parameter's value; gradients flow into Parameter::grad.
  Var param(Parameter& p);

  /// Throws NonScalarLoss unless `loss` is 1 x 1. Node gradients are reset,
  /// parameter gradients accumulate across calls.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Node access for op implementations.
  Var push(std::vector<double> value, std::size_t rows, std::size_t cols, Backward backward);
  std::vector<double>& value_of(std::size_t id) { return nodes_[id].value; }
  const std::vector<double>& value_of(std::size_t id) const { return nodes_[id].value; }
  std::vector<double>& grad_of(std::size_t id);
  std::size_t rows_of(std::size_t id) const { return nodes_[id].rows; }
  std::size_t cols_of(std::size_t id) const { return nodes_[id].cols; }

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    std::size_t rows;
    std::size_t cols;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// ---- operations ----
// All shape violations throw Error(ShapeMismatch).

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// 1 - a, elementwise.
Var one_minus(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
/// log(max(a, floor)); the gradient is zero where the floor is active.
Var log_floor(Var a, double floor);
Var sum(Var a);
Var mean(Var a);
Var dot(Var a, Var b);
Var pick(Var a, std::size_t index);
Var slice(Var a, std::size_t offset, std::size_t length);
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
/// Stacks equal-length vectors as the rows of a matrix.
Var stack(std::span<const Var> rows);
Var mean_rows(Var m);
/// M x for a parameter matrix M (r x c) and vector x (c).
Var matvec(Parameter& m, Var x);
/// M x with M a graph node.
Var matvec(Var m, Var x);
/// Row-wise projection: out_i = M x_i for the rows x_i of `xs`.
Var project_rows(Parameter& m, Var xs);
/// out_i = xs_i + v (broadcast over rows).
Var add_rows(Var xs, Var v);
/// sum_i w_i xs_i for a weight vector w and row matrix xs.
Var weighted_rows(Var w, Var xs);
Var embedding(Graph& g, Parameter& table, std::size_t row);
/// Max-shifted softmax over all entries.
Var softmax(Var a);

/// Pointer-generator mixture over an extended vocabulary of `extended_size`
/// ids: p_gen * [P_vocab ; 0] + (1 - p_gen) * scatter(attention -> source_ids).
Var pointer_mixture(Var p_gen, Var p_vocab, Var attention, std::span<const std::int32_t> source_ids,
                    std::size_t extended_size);

double sigmoid(double x);
std::vector<double> softmax(std::span<const double> x);

// ---- layers ----

enum class Activation { Linear, Tanh, Sigmoid };

struct LstmCell {
  Parameter* w_input = nullptr;   // 4H x I, gate order i, f, g, o
  Parameter* w_hidden = nullptr;  // 4H x H
  Parameter* bias = nullptr;      // 4H
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;

  static LstmCell create(ParameterSet& params, const std::string& prefix, std::size_t input_size,
                         std::size_t hidden_size, Rng& rng);
};

struct LstmState {
  Var h;
  Var c;
};

LstmState lstm_step(const LstmCell& cell, Var x, Var h_prev, Var c_prev);

struct BiLstmOutput {
  std::vector<Var> states;  // [fwd_i ; bwd_i], 2H each
  Var final;                // [fwd_last ; bwd_first]
};

/// Throws EmptySequence for an empty input.
BiLstmOutput bilstm_encode(const LstmCell& fwd, const LstmCell& bwd, std::span<const Var> xs);

struct DenseLayer {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  Activation activation = Activation::Linear;
};

DenseLayer make_dense(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
                      Activation activation, Rng& rng);
Var dense_forward(const DenseLayer& layer, Var x);
Var mlp_forward(std::span<const DenseLayer> layers, Var x);

// ---- optimization ----

/// accum += g^2; value -= lr * g / sqrt(accum); grads are zeroed afterwards.
void adagrad_step(ParameterSet& params, double lr);
/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

// ---- checkpoints ----

/// "TPGNCKPT", u32 version, u64 count, then per parameter: name, u64 rank,
/// u64 dims, float32 payload. Little-endian throughout.
std::string serialize_checkpoint(const ParameterSet& params);
/// Throws ShapeMismatch when names or shapes disagree with `params`.
void deserialize_checkpoint(ParameterSet& params, std::string_view bytes);
void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
void load_checkpoint(ParameterSet& params, const std::filesystem::path& path);

}  // namespace tpgn::nn
