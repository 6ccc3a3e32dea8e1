#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "basis/rng.hpp"

namespace basis {

// Iterative numerics that failed to converge or produced non-finite values.
struct NonConvergence : std::runtime_error {
  NonConvergence(const std::string& what, double res)
      : std::runtime_error(what), residual(res) {}
  double residual;
};

enum class Activation { relu, tanh };

// Fully-connected net shape: input -> hidden... -> output, activation on
// hidden layers only, linear output. hidden may be empty (affine map).
struct ApproximatorSpec {
  int input_dim = 0;
  std::vector<int> hidden;
  Activation activation = Activation::relu;
  int output_dim = 0;

  std::vector<int> layer_dims() const;  // [input, hidden..., output]
  int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
  size_t param_count() const;
  void validate() const;  // throws std::invalid_argument
  bool operator==(const ApproximatorSpec&) const = default;
};

struct ParamBlock {
  std::string name;
  size_t offset = 0;
  int rows = 0;
  int cols = 1;
  size_t size() const { return static_cast<size_t>(rows) * cols; }
};

// Flat parameter array plus a named-block layout. Blocks tile the array
// exactly once, in declaration order.
class ParamVector {
 public:
  int add_block(std::string name, int rows, int cols = 1);

  size_t size() const { return data_.size(); }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  int block_index(std::string_view name) const;  // -1 if absent
  const ParamBlock& block(int idx) const { return blocks_[idx]; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  Eigen::Map<Eigen::MatrixXd> mat(std::string_view name);
  Eigen::Map<const Eigen::MatrixXd> mat(std::string_view name) const;
  Eigen::Map<Eigen::VectorXd> vec(std::string_view name);
  Eigen::Map<const Eigen::VectorXd> vec(std::string_view name) const;
  std::span<double> block_span(std::string_view name);
  std::span<const double> block_span(std::string_view name) const;

 private:
  const ParamBlock& require(std::string_view name) const;
  std::vector<double> data_;
  std::vector<ParamBlock> blocks_;
};

// Gradient array congruent with a ParamVector; shares its block layout.
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(const ParamVector& layout)
      : layout_(&layout), data_(layout.size(), 0.0) {}

  void zero() { std::fill(data_.begin(), data_.end(), 0.0); }
  size_t size() const { return data_.size(); }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  Eigen::Map<Eigen::MatrixXd> mat(std::string_view name);
  Eigen::Map<const Eigen::MatrixXd> mat(std::string_view name) const;
  std::span<double> block_span(std::string_view name);
  std::span<const double> block_span(std::string_view name) const;

  const ParamVector* layout() const { return layout_; }

 private:
  const ParamVector* layout_ = nullptr;
  std::vector<double> data_;
};

// Activation cache for one forward pass. acts[0] is the input batch,
// acts[l] the post-activation output of hidden layer l.
struct MlpTape {
  std::vector<Eigen::MatrixXd> acts;
};

// Batched MLP. Columns are batch elements: forward maps
// (input_dim x B) -> (output_dim x B). Blocks are named W0,b0,W1,b1,...
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(ApproximatorSpec spec);

  void init_uniform(Rng& rng);  // U(-1/sqrt(fan_in), +1/sqrt(fan_in)) per layer

  const ApproximatorSpec& spec() const { return spec_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, MlpTape& tape) const;
  // Accumulates parameter gradients of sum_b cotangent(:,b) . output(:,b)
  // into grads; optionally also emits input gradients.
  void backward(const MlpTape& tape, const Eigen::MatrixXd& cotangent,
                GradBuffer& grads, Eigen::MatrixXd* dinput = nullptr) const;

 private:
  ApproximatorSpec spec_;
  ParamVector params_;
};

// Single-vector convenience wrappers over the batched path.
Eigen::VectorXd forward(const ApproximatorSpec& spec, const ParamVector& params,
                        const Eigen::VectorXd& input);
GradBuffer backward(const ApproximatorSpec& spec, const ParamVector& params,
                    const Eigen::VectorXd& input, const Eigen::VectorXd& cotangent,
                    Eigen::VectorXd* dinput = nullptr);

// Adaptive-moment optimizer state; one per (loss, parameter group) pairing so
// separate losses keep separate moments over shared parameters.
struct AdamState {
  explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}
  std::vector<double> m, v;
  int64_t t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// In-place update; throws on non-finite gradients (divergence signal).
void optimizer_step(ParamVector& params, const GradBuffer& grads, AdamState& state,
                    double lr);
void optimizer_step(std::span<double> params, std::span<const double> grads,
                    AdamState& state, double lr);

// Central-difference verification of an analytic gradient on a random
// coordinate subset. loss_fn re-evaluates the loss at the current params;
// returns the max relative error over probed coordinates.
double gradcheck(ParamVector& params, std::span<const double> analytic_grad,
                 const std::function<double()>& loss_fn, int probes, Rng& rng,
                 double h = 1e-5);

}  // namespace basis
