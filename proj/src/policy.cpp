#include "dynpo/policy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dynpo/stable_math.hpp"

namespace dynpo {

PolicyModel::PolicyModel(std::size_t vocab_size, std::size_t dim, RngSeed seed)
    : vocab_size_(vocab_size), dim_(dim), seed_(seed) {
  if (vocab_size < 2) throw_invalid("policy vocabulary must hold at least 2 items");
  if (dim == 0) throw_invalid("embedding dimension must be positive");
  input_.assign(vocab_size * dim, 0.0);
  output_.assign(vocab_size * dim, 0.0);
}

PolicyModel PolicyModel::random(std::size_t vocab_size, std::size_t dim, RngSeed seed,
                                double stddev) {
  PolicyModel model(vocab_size, dim, seed);
  Rng rng(derive_seed(seed, {0x706f6c696379ULL}));
  for (double& w : model.input_) w = stddev * rng.normal();
  for (double& w : model.output_) w = stddev * rng.normal();
  return model;
}

std::vector<double> PolicyModel::user_vector(const Context& ctx) const {
  if (ctx.history.empty()) throw_invalid("context history is empty");
  std::vector<double> u(dim_, 0.0);
  for (ItemId item : ctx.history) {
    if (item >= vocab_size_) throw_invalid("history item outside vocabulary");
    auto row = input_row(item);
    for (std::size_t d = 0; d < dim_; ++d) u[d] += row[d];
  }
  const double inv = 1.0 / static_cast<double>(ctx.history.size());
  for (double& x : u) x *= inv;
  return u;
}

namespace {

std::vector<double> log_softmax_of(const PolicyModel& model, std::span<const double> user) {
  std::vector<double> scores(model.vocab_size());
  for (std::size_t j = 0; j < scores.size(); ++j) {
    auto row = model.output_row(static_cast<ItemId>(j));
    double s = 0.0;
    for (std::size_t d = 0; d < user.size(); ++d) s += row[d] * user[d];
    scores[j] = s;
  }
  const double norm = log_sum_exp(scores);
  for (double& s : scores) s -= norm;
  return scores;
}

}  // namespace

std::vector<double> PolicyModel::log_softmax(const Context& ctx) const {
  return log_softmax_of(*this, user_vector(ctx));
}

double PolicyModel::log_prob(const Context& ctx, ItemId item) const {
  if (item >= vocab_size_) throw_invalid("item outside vocabulary");
  return log_softmax(ctx)[item];
}

void Gradients::zero() {
  std::fill(input.begin(), input.end(), 0.0);
  std::fill(output.begin(), output.end(), 0.0);
}

void Gradients::scale(double factor) {
  for (double& g : input) g *= factor;
  for (double& g : output) g *= factor;
}

ForwardPass forward(const PolicyModel& model, const Context& ctx) {
  ForwardPass pass;
  pass.user = model.user_vector(ctx);
  pass.log_probs = log_softmax_of(model, pass.user);
  return pass;
}

void backward(const PolicyModel& model, const Context& ctx, const ForwardPass& pass,
              std::span<const ItemId> items, std::span<const double> weights, Gradients& grads) {
  if (items.size() != weights.size()) throw_invalid("backward: items and weights differ in size");
  const std::size_t dim = model.dim();
  const std::size_t vocab = model.vocab_size();

  // d/dscore_j = w_j - (sum_c w_c) * p_j
  std::vector<double> dscore(vocab);
  double total = 0.0;
  for (double w : weights) total += w;
  for (std::size_t j = 0; j < vocab; ++j) dscore[j] = -total * std::exp(pass.log_probs[j]);
  for (std::size_t c = 0; c < items.size(); ++c) dscore[items[c]] += weights[c];

  std::vector<double> duser(dim, 0.0);
  for (std::size_t j = 0; j < vocab; ++j) {
    const double g = dscore[j];
    auto out_row = model.output_row(static_cast<ItemId>(j));
    double* grad_row = grads.output.data() + j * dim;
    for (std::size_t d = 0; d < dim; ++d) {
      grad_row[d] += g * pass.user[d];
      duser[d] += g * out_row[d];
    }
  }

  const double inv = 1.0 / static_cast<double>(ctx.history.size());
  for (ItemId item : ctx.history) {
    double* grad_row = grads.input.data() + static_cast<std::size_t>(item) * dim;
    for (std::size_t d = 0; d < dim; ++d) grad_row[d] += duser[d] * inv;
  }
}

AdamOptimizer::AdamOptimizer(const PolicyModel& model, AdamConfig config)
    : config_(config),
      m_input_(model.input_weights().size(), 0.0),
      v_input_(model.input_weights().size(), 0.0),
      m_output_(model.output_weights().size(), 0.0),
      v_output_(model.output_weights().size(), 0.0) {
  if (!(config.learning_rate > 0.0)) throw_invalid("learning rate must be positive");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw_invalid("moment decay rates must lie in [0, 1)");
  }
  if (!(config.epsilon > 0.0)) throw_invalid("epsilon must be positive");
}

void AdamOptimizer::step(PolicyModel& model, const Gradients& grads) {
  if (grads.input.size() != m_input_.size() || grads.output.size() != m_output_.size()) {
    throw_invalid("gradient shape does not match optimizer state");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  auto update = [&](std::vector<double>& params, const std::vector<double>& g,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  };
  update(model.input_weights(), grads.input, m_input_, v_input_);
  update(model.output_weights(), grads.output, m_output_, v_output_);
}

double sft_loss_and_gradients(const PolicyModel& model, std::span<const SftExample> batch,
                              Gradients& grads) {
  if (batch.empty()) throw_invalid("SFT batch is empty");
  const double weight = -1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const SftExample& ex : batch) {
    if (ex.positive >= model.vocab_size()) throw_invalid("SFT target outside vocabulary");
    const ForwardPass pass = forward(model, ex.context);
    loss -= pass.log_probs[ex.positive];
    const ItemId item = ex.positive;
    backward(model, ex.context, pass, {&item, 1}, {&weight, 1}, grads);
  }
  return loss / static_cast<double>(batch.size());
}

double sft_step(PolicyModel& model, std::span<const SftExample> batch, AdamOptimizer& opt) {
  Gradients grads(model);
  const double loss = sft_loss_and_gradients(model, batch, grads);
  if (!std::isfinite(loss)) throw Error(ErrorCode::Numerical, "non-finite SFT loss");
  opt.step(model, grads);
  return loss;
}

namespace {

constexpr char kMagic[8] = {'D', 'Y', 'N', 'P', 'O', 'C', 'K', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64(std::string_view bytes, std::size_t& pos) {
  if (pos + 8 > bytes.size()) throw Error(ErrorCode::Parse, "checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  pos += 8;
  return v;
}

}  // namespace

std::string serialize_checkpoint(const PolicyModel& model) {
  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, model.vocab_size());
  put_u64(out, model.dim());
  put_u64(out, model.seed().value);
  for (double w : model.input_weights()) put_u64(out, std::bit_cast<std::uint64_t>(w));
  for (double w : model.output_weights()) put_u64(out, std::bit_cast<std::uint64_t>(w));
  return out;
}

PolicyModel deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::Parse, "not a policy checkpoint (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  const std::uint64_t vocab = get_u64(bytes, pos);
  const std::uint64_t dim = get_u64(bytes, pos);
  const std::uint64_t seed = get_u64(bytes, pos);
  if (vocab < 2 || dim == 0 || vocab > (1ULL << 32) || dim > (1ULL << 20) ||
      bytes.size() != pos + 16 * vocab * dim) {
    throw Error(ErrorCode::Parse, "checkpoint header inconsistent with its size");
  }
  PolicyModel model(vocab, dim, RngSeed{seed});
  for (double& w : model.input_weights()) w = std::bit_cast<double>(get_u64(bytes, pos));
  for (double& w : model.output_weights()) w = std::bit_cast<double>(get_u64(bytes, pos));
  return model;
}

void save_checkpoint(const PolicyModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint " + path.string());
  const std::string bytes = serialize_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing checkpoint " + path.string());
}

PolicyModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace dynpo
