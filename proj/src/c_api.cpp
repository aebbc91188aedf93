#include "dynpo/dynpo.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "dynpo/beta.hpp"
#include "dynpo/commands.hpp"
#include "dynpo/config.hpp"
#include "dynpo/losses.hpp"
#include "dynpo/policy.hpp"
#include "dynpo/selection.hpp"

struct dynpo_config {
  dynpo::RunConfig value;
};

struct dynpo_model {
  dynpo::PolicyModel value;
};

namespace {

thread_local std::string last_error;

dynpo_status to_status(dynpo::ErrorCode code) {
  switch (code) {
    case dynpo::ErrorCode::InvalidParameter: return DYNPO_ERR_INVALID_PARAMETER;
    case dynpo::ErrorCode::Parse: return DYNPO_ERR_PARSE;
    case dynpo::ErrorCode::Io: return DYNPO_ERR_IO;
    case dynpo::ErrorCode::Numerical: return DYNPO_ERR_NUMERICAL;
  }
  return DYNPO_ERR_INTERNAL;
}

dynpo_status fail(dynpo_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <typename F>
dynpo_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const dynpo::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(DYNPO_ERR_INTERNAL, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(DYNPO_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(DYNPO_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DYNPO_ERR_INTERNAL, "unknown exception");
  }
}

#define DYNPO_REQUIRE(ptr)                                                             \
  do {                                                                                 \
    if ((ptr) == nullptr) return fail(DYNPO_ERR_INVALID_PARAMETER, #ptr " is null"); \
  } while (0)

dynpo_status copy_out(const std::string& text, char* buf, std::size_t cap, std::size_t* len) {
  if (len != nullptr) *len = text.size();
  if (cap == 0 && buf == nullptr) return DYNPO_OK;
  if (buf == nullptr || cap <= text.size()) {
    return fail(DYNPO_ERR_BUFFER_TOO_SMALL,
                "buffer needs " + std::to_string(text.size() + 1) + " bytes");
  }
  std::memcpy(buf, text.data(), text.size());
  buf[text.size()] = '\0';
  return DYNPO_OK;
}

dynpo::LikelihoodRecord to_record(const dynpo_record* r) {
  if (r == nullptr) dynpo::throw_invalid("record is null");
  if (r->k > 0 && (r->neg_theta == nullptr || r->neg_ref == nullptr)) {
    dynpo::throw_invalid("record negatives are null");
  }
  dynpo::LikelihoodRecord rec;
  rec.pos_theta = r->pos_theta;
  rec.pos_ref = r->pos_ref;
  if (r->k > 0) {
    rec.neg_theta.assign(r->neg_theta, r->neg_theta + r->k);
    rec.neg_ref.assign(r->neg_ref, r->neg_ref + r->k);
  }
  dynpo::validate(rec);
  return rec;
}

}  // namespace

extern "C" {

const char* dynpo_version(void) { return "0.1.0"; }

const char* dynpo_status_name(dynpo_status status) {
  switch (status) {
    case DYNPO_OK: return "ok";
    case DYNPO_ERR_INVALID_PARAMETER: return "invalid_parameter";
    case DYNPO_ERR_PARSE: return "parse";
    case DYNPO_ERR_IO: return "io";
    case DYNPO_ERR_NUMERICAL: return "numerical";
    case DYNPO_ERR_BUFFER_TOO_SMALL: return "buffer_too_small";
    case DYNPO_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* dynpo_last_error(void) { return last_error.c_str(); }

dynpo_status dynpo_config_create(dynpo_config** out) {
  DYNPO_REQUIRE(out);
  return guarded([&] {
    *out = new dynpo_config{};
    return DYNPO_OK;
  });
}

void dynpo_config_destroy(dynpo_config* cfg) { delete cfg; }

dynpo_status dynpo_config_set(dynpo_config* cfg, const char* key, const char* value) {
  DYNPO_REQUIRE(cfg);
  DYNPO_REQUIRE(key);
  DYNPO_REQUIRE(value);
  return guarded([&] {
    dynpo::set_config_value(cfg->value, key, value);
    return DYNPO_OK;
  });
}

dynpo_status dynpo_config_get(const dynpo_config* cfg, const char* key, char* buf, size_t cap,
                              size_t* len) {
  DYNPO_REQUIRE(cfg);
  DYNPO_REQUIRE(key);
  return guarded([&] { return copy_out(dynpo::get_config_value(cfg->value, key), buf, cap, len); });
}

dynpo_status dynpo_config_load(dynpo_config* cfg, const char* path) {
  DYNPO_REQUIRE(cfg);
  DYNPO_REQUIRE(path);
  return guarded([&] {
    std::ifstream in(path);
    if (!in) return fail(DYNPO_ERR_IO, std::string("cannot open config ") + path);
    dynpo::RunConfig updated = cfg->value;
    dynpo::apply_config(updated, in, path);
    cfg->value = std::move(updated);
    return DYNPO_OK;
  });
}

dynpo_status dynpo_config_save(const dynpo_config* cfg, const char* path) {
  DYNPO_REQUIRE(cfg);
  DYNPO_REQUIRE(path);
  return guarded([&] {
    dynpo::save_config(cfg->value, path);
    return DYNPO_OK;
  });
}

dynpo_status dynpo_config_validate(const dynpo_config* cfg) {
  DYNPO_REQUIRE(cfg);
  return guarded([&] {
    dynpo::validate(cfg->value);
    return DYNPO_OK;
  });
}

size_t dynpo_config_key_count(void) { return dynpo::config_keys().size(); }

const char* dynpo_config_key_name(size_t index) {
  const auto& keys = dynpo::config_keys();
  return index < keys.size() ? keys[index].name.data() : nullptr;
}

const char* dynpo_config_key_help(size_t index) {
  const auto& keys = dynpo::config_keys();
  return index < keys.size() ? keys[index].help.data() : nullptr;
}

dynpo_status dynpo_generate(const dynpo_config* cfg, const char* out_dir, size_t* rows) {
  DYNPO_REQUIRE(cfg);
  DYNPO_REQUIRE(out_dir);
  return guarded([&] {
    const auto result = dynpo::cmd_generate(cfg->value, out_dir);
    if (rows != nullptr) *rows = result.rows;
    return DYNPO_OK;
  });
}

dynpo_status dynpo_train(const dynpo_config* cfg, const char* run_dir, char* buf, size_t cap,
                         size_t* len) {
  DYNPO_REQUIRE(cfg);
  return guarded([&] {
    const std::string dir = run_dir != nullptr ? run_dir : cfg->value.out;
    return copy_out(dynpo::cmd_train(cfg->value, dir), buf, cap, len);
  });
}

dynpo_status dynpo_sweep(const dynpo_config* cfg, const char* grid, const double* values,
                         size_t n_values, const char* out_dir, size_t jobs) {
  DYNPO_REQUIRE(cfg);
  DYNPO_REQUIRE(grid);
  DYNPO_REQUIRE(out_dir);
  if (n_values > 0) DYNPO_REQUIRE(values);
  return guarded([&] {
    dynpo::cmd_sweep(cfg->value, grid, std::span<const double>(values, n_values), out_dir, jobs);
    return DYNPO_OK;
  });
}

dynpo_status dynpo_timing(const dynpo_config* cfg, const char* out_dir, size_t repeats,
                          dynpo_timing_report* out) {
  DYNPO_REQUIRE(cfg);
  DYNPO_REQUIRE(out_dir);
  return guarded([&] {
    const auto report = dynpo::cmd_timing(cfg->value, out_dir, repeats);
    if (out != nullptr) {
      *out = {report.naive_seconds,      report.dynamic_seconds,      report.overhead,
              report.naive_mean_seconds, report.dynamic_mean_seconds, report.po_steps};
    }
    return DYNPO_OK;
  });
}

dynpo_status dynpo_eval(const dynpo_config* cfg, const char* checkpoint, const char* reference,
                        dynpo_eval_report* out) {
  DYNPO_REQUIRE(cfg);
  DYNPO_REQUIRE(checkpoint);
  DYNPO_REQUIRE(out);
  return guarded([&] {
    std::optional<std::filesystem::path> ref;
    if (reference != nullptr) ref = reference;
    const auto report = dynpo::cmd_eval(cfg->value, checkpoint, ref);
    out->hit_ratio_at_1 = report.hit_ratio_at_1;
    out->has_win_rate = report.reward_win_rate.has_value() ? 1 : 0;
    out->reward_win_rate = report.reward_win_rate.value_or(0.0);
    return DYNPO_OK;
  });
}

dynpo_status dynpo_model_load(const char* path, dynpo_model** out) {
  DYNPO_REQUIRE(path);
  DYNPO_REQUIRE(out);
  return guarded([&] {
    *out = new dynpo_model{dynpo::load_checkpoint(path)};
    return DYNPO_OK;
  });
}

void dynpo_model_destroy(dynpo_model* model) { delete model; }

size_t dynpo_model_vocab_size(const dynpo_model* model) {
  return model != nullptr ? model->value.vocab_size() : 0;
}

size_t dynpo_model_dim(const dynpo_model* model) {
  return model != nullptr ? model->value.dim() : 0;
}

dynpo_status dynpo_model_log_prob(const dynpo_model* model, const uint32_t* history,
                                  size_t history_len, uint32_t item, double* out) {
  DYNPO_REQUIRE(model);
  DYNPO_REQUIRE(out);
  if (history_len > 0) DYNPO_REQUIRE(history);
  return guarded([&] {
    const std::size_t vocab = model->value.vocab_size();
    if (item >= vocab) dynpo::throw_invalid("item out of range");
    dynpo::Context ctx;
    ctx.history.assign(history, history + history_len);
    for (dynpo::ItemId h : ctx.history) {
      if (h >= vocab) dynpo::throw_invalid("history item out of range");
    }
    *out = model->value.log_prob(ctx, item);
    return DYNPO_OK;
  });
}

dynpo_status dynpo_loss(dynpo_objective objective, const dynpo_record* record, const double* betas,
                        const size_t* active, size_t n_active, double* value, double* grad_pos,
                        double* grad_neg) {
  DYNPO_REQUIRE(record);
  if (n_active > 0) {
    DYNPO_REQUIRE(betas);
    DYNPO_REQUIRE(active);
  }
  return guarded([&] {
    dynpo::Objective obj;
    switch (objective) {
      case DYNPO_OBJECTIVE_DPO: obj = dynpo::Objective::Dpo; break;
      case DYNPO_OBJECTIVE_DMPO: obj = dynpo::Objective::Dmpo; break;
      case DYNPO_OBJECTIVE_SDPO: obj = dynpo::Objective::Sdpo; break;
      case DYNPO_OBJECTIVE_MPPO: obj = dynpo::Objective::Mppo; break;
      default: return fail(DYNPO_ERR_INVALID_PARAMETER, "unknown objective");
    }
    const dynpo::LogRatioSet ratios = dynpo::log_ratios(to_record(record));
    const std::vector<std::size_t> act(active, active + n_active);
    const auto loss = dynpo::evaluate_loss(obj, ratios, std::span<const double>(betas, n_active),
                                           act);
    if (value != nullptr) *value = loss.value;
    if (grad_pos != nullptr) *grad_pos = loss.grad_pos;
    if (grad_neg != nullptr) std::copy(loss.grad_neg.begin(), loss.grad_neg.end(), grad_neg);
    return DYNPO_OK;
  });
}

dynpo_status dynpo_select_boundary(const dynpo_record* record, size_t* boundary,
                                   size_t* n_boundary, dynpo_stage* stage) {
  DYNPO_REQUIRE(boundary);
  DYNPO_REQUIRE(n_boundary);
  return guarded([&] {
    const auto sel = dynpo::select_boundary(to_record(record));
    std::copy(sel.boundary.begin(), sel.boundary.end(), boundary);
    *n_boundary = sel.boundary.size();
    if (stage != nullptr) {
      switch (sel.stage) {
        case dynpo::SelectionStage::Violation: *stage = DYNPO_STAGE_VIOLATION; break;
        case dynpo::SelectionStage::Cluster: *stage = DYNPO_STAGE_CLUSTER; break;
        case dynpo::SelectionStage::Degenerate: *stage = DYNPO_STAGE_DEGENERATE; break;
      }
    }
    return DYNPO_OK;
  });
}

dynpo_status dynpo_dynamic_beta(const dynpo_record* record, const size_t* boundary,
                                size_t n_boundary, size_t b_index, double beta0, double alpha,
                                double gamma, double* beta) {
  DYNPO_REQUIRE(beta);
  if (n_boundary > 0) DYNPO_REQUIRE(boundary);
  return guarded([&] {
    const std::vector<std::size_t> b(boundary, boundary + n_boundary);
    const dynpo::BetaConfig cfg{beta0, alpha, gamma};
    *beta = dynpo::dynamic_beta(dynpo::dual_margins(to_record(record), b, b_index), cfg);
    return DYNPO_OK;
  });
}

dynpo_status dynpo_kmeans_1d(const double* values, size_t n, size_t k, size_t* assignments,
                             double* centroids, double* wcss) {
  if (n > 0) DYNPO_REQUIRE(values);
  return guarded([&] {
    const auto c = dynpo::kmeans_1d_exact(std::span<const double>(values, n), k);
    if (assignments != nullptr) std::copy(c.assignments.begin(), c.assignments.end(), assignments);
    if (centroids != nullptr) std::copy(c.centroids.begin(), c.centroids.end(), centroids);
    if (wcss != nullptr) *wcss = c.wcss;
    return DYNPO_OK;
  });
}

}  // extern "C"
