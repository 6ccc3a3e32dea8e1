#include "basis/approx.hpp"

#include <cmath>
#include <stdexcept>

namespace basis {

std::vector<int> ApproximatorSpec::layer_dims() const {
  std::vector<int> dims;
  dims.reserve(hidden.size() + 2);
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);
  return dims;
}

size_t ApproximatorSpec::param_count() const {
  auto dims = layer_dims();
  size_t n = 0;
  for (size_t l = 0; l + 1 < dims.size(); ++l)
    n += static_cast<size_t>(dims[l + 1]) * dims[l] + dims[l + 1];
  return n;
}

void ApproximatorSpec::validate() const {
  if (input_dim < 1 || output_dim < 1)
    throw std::invalid_argument("ApproximatorSpec: dims must be >= 1");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("ApproximatorSpec: hidden dims must be >= 1");
}

int ParamVector::add_block(std::string name, int rows, int cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("add_block: bad shape");
  ParamBlock b;
  b.name = std::move(name);
  b.offset = data_.size();
  b.rows = rows;
  b.cols = cols;
  data_.resize(data_.size() + b.size(), 0.0);
  blocks_.push_back(std::move(b));
  return static_cast<int>(blocks_.size()) - 1;
}

int ParamVector::block_index(std::string_view name) const {
  for (size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].name == name) return static_cast<int>(i);
  return -1;
}

const ParamBlock& ParamVector::require(std::string_view name) const {
  int i = block_index(name);
  if (i < 0) throw std::out_of_range("ParamVector: no block named " + std::string(name));
  return blocks_[i];
}

Eigen::Map<Eigen::MatrixXd> ParamVector::mat(std::string_view name) {
  const auto& b = require(name);
  return {data_.data() + b.offset, b.rows, b.cols};
}
Eigen::Map<const Eigen::MatrixXd> ParamVector::mat(std::string_view name) const {
  const auto& b = require(name);
  return {data_.data() + b.offset, b.rows, b.cols};
}
Eigen::Map<Eigen::VectorXd> ParamVector::vec(std::string_view name) {
  const auto& b = require(name);
  return {data_.data() + b.offset, static_cast<Eigen::Index>(b.size())};
}
Eigen::Map<const Eigen::VectorXd> ParamVector::vec(std::string_view name) const {
  const auto& b = require(name);
  return {data_.data() + b.offset, static_cast<Eigen::Index>(b.size())};
}
std::span<double> ParamVector::block_span(std::string_view name) {
  const auto& b = require(name);
  return {data_.data() + b.offset, b.size()};
}
std::span<const double> ParamVector::block_span(std::string_view name) const {
  const auto& b = require(name);
  return {data_.data() + b.offset, b.size()};
}

Eigen::Map<Eigen::MatrixXd> GradBuffer::mat(std::string_view name) {
  int i = layout_->block_index(name);
  if (i < 0) throw std::out_of_range("GradBuffer: no block named " + std::string(name));
  const auto& b = layout_->block(i);
  return {data_.data() + b.offset, b.rows, b.cols};
}
Eigen::Map<const Eigen::MatrixXd> GradBuffer::mat(std::string_view name) const {
  int i = layout_->block_index(name);
  if (i < 0) throw std::out_of_range("GradBuffer: no block named " + std::string(name));
  const auto& b = layout_->block(i);
  return {data_.data() + b.offset, b.rows, b.cols};
}
std::span<double> GradBuffer::block_span(std::string_view name) {
  int i = layout_->block_index(name);
  if (i < 0) throw std::out_of_range("GradBuffer: no block named " + std::string(name));
  const auto& b = layout_->block(i);
  return {data_.data() + b.offset, b.size()};
}
std::span<const double> GradBuffer::block_span(std::string_view name) const {
  int i = layout_->block_index(name);
  if (i < 0) throw std::out_of_range("GradBuffer: no block named " + std::string(name));
  const auto& b = layout_->block(i);
  return {data_.data() + b.offset, b.size()};
}

Mlp::Mlp(ApproximatorSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  auto dims = spec_.layer_dims();
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    params_.add_block("W" + std::to_string(l), dims[l + 1], dims[l]);
    params_.add_block("b" + std::to_string(l), dims[l + 1]);
  }
}

void Mlp::init_uniform(Rng& rng) {
  auto dims = spec_.layer_dims();
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (double& w : params_.block_span("W" + std::to_string(l)))
      w = rng.uniform(-bound, bound);
    for (double& b : params_.block_span("b" + std::to_string(l)))
      b = rng.uniform(-bound, bound);
  }
}

namespace {

inline void apply_activation(Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::relu)
    z = z.cwiseMax(0.0);
  else
    z = z.array().tanh().matrix();
}

}  // namespace

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  if (x.rows() != spec_.input_dim)
    throw std::invalid_argument("Mlp::forward: input dim mismatch");
  Eigen::MatrixXd a = x;
  int L = spec_.num_layers();
  for (int l = 0; l < L; ++l) {
    std::string sl = std::to_string(l);
    Eigen::MatrixXd z = params_.mat("W" + sl) * a;
    z.colwise() += params_.vec("b" + sl);
    if (l + 1 < L) apply_activation(z, spec_.activation);
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, MlpTape& tape) const {
  if (x.rows() != spec_.input_dim)
    throw std::invalid_argument("Mlp::forward: input dim mismatch");
  int L = spec_.num_layers();
  tape.acts.clear();
  tape.acts.reserve(L);
  tape.acts.push_back(x);
  for (int l = 0; l + 1 < L; ++l) {
    std::string sl = std::to_string(l);
    Eigen::MatrixXd z = params_.mat("W" + sl) * tape.acts.back();
    z.colwise() += params_.vec("b" + sl);
    apply_activation(z, spec_.activation);
    tape.acts.push_back(std::move(z));
  }
  std::string sl = std::to_string(L - 1);
  Eigen::MatrixXd out = params_.mat("W" + sl) * tape.acts.back();
  out.colwise() += params_.vec("b" + sl);
  return out;
}

void Mlp::backward(const MlpTape& tape, const Eigen::MatrixXd& cotangent,
                   GradBuffer& grads, Eigen::MatrixXd* dinput) const {
  int L = spec_.num_layers();
  if (static_cast<int>(tape.acts.size()) != L)
    throw std::invalid_argument("Mlp::backward: tape/spec mismatch");
  if (cotangent.rows() != spec_.output_dim)
    throw std::invalid_argument("Mlp::backward: cotangent dim mismatch");

  Eigen::MatrixXd dz = cotangent;
  for (int l = L - 1; l >= 0; --l) {
    std::string sl = std::to_string(l);
    grads.mat("W" + sl).noalias() += dz * tape.acts[l].transpose();
    grads.mat("b" + sl).noalias() += dz.rowwise().sum();
    if (l == 0) {
      if (dinput) dinput->noalias() = params_.mat("W" + sl).transpose() * dz;
      break;
    }
    Eigen::MatrixXd da = params_.mat("W" + sl).transpose() * dz;
    const Eigen::MatrixXd& a = tape.acts[l];
    if (spec_.activation == Activation::relu)
      dz = (a.array() > 0.0).select(da, 0.0);
    else
      dz = (da.array() * (1.0 - a.array().square())).matrix();
  }
}

Eigen::VectorXd forward(const ApproximatorSpec& spec, const ParamVector& params,
                        const Eigen::VectorXd& input) {
  Mlp net(spec);
  net.params() = params;
  return net.forward(input);
}

GradBuffer backward(const ApproximatorSpec& spec, const ParamVector& params,
                    const Eigen::VectorXd& input, const Eigen::VectorXd& cotangent,
                    Eigen::VectorXd* dinput) {
  Mlp net(spec);
  net.params() = params;
  MlpTape tape;
  net.forward(input, tape);
  GradBuffer grads(net.params());
  Eigen::MatrixXd dx;
  net.backward(tape, cotangent, grads, dinput ? &dx : nullptr);
  if (dinput) *dinput = dx.col(0);
  return grads;
}

void optimizer_step(std::span<double> params, std::span<const double> grads,
                    AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("optimizer_step: shape mismatch");
  for (double g : grads)
    if (!std::isfinite(g)) throw NonConvergence("optimizer_step: non-finite gradient", g);
  state.t += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

void optimizer_step(ParamVector& params, const GradBuffer& grads, AdamState& state,
                    double lr) {
  optimizer_step(params.flat(), grads.flat(), state, lr);
}

double gradcheck(ParamVector& params, std::span<const double> analytic_grad,
                 const std::function<double()>& loss_fn, int probes, Rng& rng,
                 double h) {
  if (analytic_grad.size() != params.size())
    throw std::invalid_argument("gradcheck: gradient/params size mismatch");
  // snapshot: loss_fn may recompute gradients into the caller's buffer,
  // which would otherwise alias analytic_grad at a perturbed point
  std::vector<double> an(analytic_grad.begin(), analytic_grad.end());
  size_t n = params.size();
  double max_rel = 0.0;
  for (int k = 0; k < probes; ++k) {
    size_t i = (n <= static_cast<size_t>(probes))
                   ? static_cast<size_t>(k % n)
                   : static_cast<size_t>(rng.uniform_int(static_cast<int>(n)));
    double saved = params.data()[i];
    params.data()[i] = saved + h;
    double lp = loss_fn();
    params.data()[i] = saved - h;
    double lm = loss_fn();
    params.data()[i] = saved;
    double fd = (lp - lm) / (2.0 * h);
    double rel =
        std::abs(fd - an[i]) / std::max({std::abs(fd), std::abs(an[i]), 1e-6});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace basis
