#pragma once

// A small differentiable next-item recommender: mean-of-history user encoder
// over an input embedding table, dot-product scores against a separate output
// table, and a softmax over the whole vocabulary.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dynpo/core.hpp"

namespace dynpo {

class PolicyModel {
 public:
  PolicyModel(std::size_t vocab_size, std::size_t dim, RngSeed seed = {});

  // Both tables drawn i.i.d. from N(0, stddev^2).
  static PolicyModel random(std::size_t vocab_size, std::size_t dim, RngSeed seed,
                            double stddev = 0.1);

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t dim() const noexcept { return dim_; }
  RngSeed seed() const noexcept { return seed_; }

  std::span<double> input_row(ItemId item) { return {input_.data() + item * dim_, dim_}; }
  std::span<const double> input_row(ItemId item) const {
    return {input_.data() + item * dim_, dim_};
  }
  std::span<double> output_row(ItemId item) { return {output_.data() + item * dim_, dim_}; }
  std::span<const double> output_row(ItemId item) const {
    return {output_.data() + item * dim_, dim_};
  }

  // Row-major [vocab_size x dim].
  std::vector<double>& input_weights() noexcept { return input_; }
  const std::vector<double>& input_weights() const noexcept { return input_; }
  std::vector<double>& output_weights() noexcept { return output_; }
  const std::vector<double>& output_weights() const noexcept { return output_; }

  std::vector<double> user_vector(const Context& ctx) const;
  std::vector<double> log_softmax(const Context& ctx) const;
  double log_prob(const Context& ctx, ItemId item) const;

  bool operator==(const PolicyModel&) const = default;

 private:
  std::size_t vocab_size_;
  std::size_t dim_;
  RngSeed seed_;
  std::vector<double> input_;
  std::vector<double> output_;
};

// Frozen snapshot of a policy; read-only for its lifetime.
class ReferenceModel {
 public:
  explicit ReferenceModel(PolicyModel snapshot) : model_(std::move(snapshot)) {}
  const PolicyModel& policy() const noexcept { return model_; }

 private:
  PolicyModel model_;
};

struct Gradients {
  explicit Gradients(const PolicyModel& model)
      : input(model.input_weights().size(), 0.0), output(model.output_weights().size(), 0.0) {}

  void zero();
  void scale(double factor);

  std::vector<double> input;
  std::vector<double> output;
};

struct ForwardPass {
  std::vector<double> user;       // encoded context
  std::vector<double> log_probs;  // over the whole vocabulary
};

ForwardPass forward(const PolicyModel& model, const Context& ctx);

// Adds d/dparams of sum_c weights[c] * log_prob(ctx, items[c]) to `grads`.
void backward(const PolicyModel& model, const Context& ctx, const ForwardPass& pass,
              std::span<const ItemId> items, std::span<const double> weights, Gradients& grads);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive moment estimation with bias correction.
class AdamOptimizer {
 public:
  AdamOptimizer(const PolicyModel& model, AdamConfig config);

  void step(PolicyModel& model, const Gradients& grads);

  std::uint64_t steps() const noexcept { return steps_; }
  const AdamConfig& config() const noexcept { return config_; }

 private:
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<double> m_input_, v_input_, m_output_, v_output_;
};

struct SftExample {
  Context context;
  ItemId positive = 0;
};

// Mean of -log_prob(ctx, positive) over the batch; gradients are accumulated
// into `grads` (not zeroed first).
double sft_loss_and_gradients(const PolicyModel& model, std::span<const SftExample> batch,
                              Gradients& grads);

// One optimizer step on the batch; returns the mean loss at the parameters
// the gradient was taken at.
double sft_step(PolicyModel& model, std::span<const SftExample> batch, AdamOptimizer& opt);

// Checkpoint layout (all integers and doubles little-endian):
//   8 bytes  magic "DYNPOCK1"
//   u64      vocab_size
//   u64      dim
//   u64      seed
//   f64[vocab_size * dim]  input embeddings, row-major
//   f64[vocab_size * dim]  output embeddings, row-major
std::string serialize_checkpoint(const PolicyModel& model);
PolicyModel deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const PolicyModel& model, const std::filesystem::path& path);
PolicyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace dynpo
