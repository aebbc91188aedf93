#include "dynpo/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace dynpo {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw Error(ErrorCode::Parse, "config key '" + std::string(key) + "': '" + std::string(value) +
                                    "' is not " + std::string(want));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value, std::string_view want) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc{} || ptr != value.data() + value.size()) {
    bad_value(key, value, want);
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view value) {
  return static_cast<std::size_t>(parse_number<std::uint64_t>(key, value, "a non-negative integer"));
}

double parse_real(std::string_view key, std::string_view value) {
  const double v = parse_number<double>(key, value, "a number");
  if (!std::isfinite(v)) bad_value(key, value, "a finite number");
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "a boolean (true/false)");
}

std::string sampler_name(NegativeSampler s) {
  return s == NegativeSampler::Uniform ? "uniform" : "popularity";
}

template <typename Field>
ConfigKey count_key(std::string_view name, std::string_view help, Field field) {
  return {name, help,
          [field](const RunConfig& c) { return std::to_string(field(c)); },
          [field, name](RunConfig& c, std::string_view v) { field(c) = parse_count(name, v); }};
}

template <typename Field>
ConfigKey real_key(std::string_view name, std::string_view help, Field field) {
  return {name, help,
          [field](const RunConfig& c) { return format_double(field(c)); },
          [field, name](RunConfig& c, std::string_view v) { field(c) = parse_real(name, v); }};
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> keys;
  keys.push_back({"data", "interaction CSV (user_id,item_id,timestamp)",
                  [](const RunConfig& c) { return c.data; },
                  [](RunConfig& c, std::string_view v) { c.data = std::string(v); }});
  keys.push_back(count_key("users", "synthetic: number of users",
                           [](auto& c) -> auto& { return c.synthetic.users; }));
  keys.push_back(count_key("items", "synthetic: number of items",
                           [](auto& c) -> auto& { return c.synthetic.items; }));
  keys.push_back(count_key("latent_dim", "synthetic: latent factor dimension",
                           [](auto& c) -> auto& { return c.synthetic.latent_dim; }));
  keys.push_back(count_key("interactions_per_user", "synthetic: sequence length per user",
                           [](auto& c) -> auto& { return c.synthetic.interactions_per_user; }));
  keys.push_back(real_key("noise", "synthetic: Gaussian logit noise",
                          [](auto& c) -> auto& { return c.synthetic.noise; }));
  keys.push_back(real_key("temperature", "synthetic: affinity temperature",
                          [](auto& c) -> auto& { return c.synthetic.temperature; }));
  keys.push_back(count_key("history_len", "context window length",
                           [](auto& c) -> auto& { return c.history_len; }));
  keys.push_back(count_key("dim", "policy embedding dimension",
                           [](auto& c) -> auto& { return c.dim; }));
  keys.push_back(count_key("sft_epochs", "supervised epochs",
                           [](auto& c) -> auto& { return c.sft_epochs; }));
  keys.push_back(count_key("po_epochs", "preference-optimization epochs",
                           [](auto& c) -> auto& { return c.po_epochs; }));
  keys.push_back(count_key("negatives", "negatives per preference instance",
                           [](auto& c) -> auto& { return c.negatives; }));
  keys.push_back({"objective", "dpo | dmpo | sdpo | mppo",
                  [](const RunConfig& c) { return std::string(objective_name(c.objective)); },
                  [](RunConfig& c, std::string_view v) { c.objective = parse_objective(v); }});
  keys.push_back({"variant",
                  "naive | dynamicpo | topk | wo_stage1 | wo_stage2 | wo_stages | wo_beta | ...",
                  [](const RunConfig& c) { return variant_name(c.variant); },
                  [](RunConfig& c, std::string_view v) {
                    // top_k may be set later in the same file; keep the kind here.
                    c.variant = v == "topk" ? Variant::top_k_only(c.variant.top_k)
                                            : parse_variant(v);
                    if (v != "topk") c.variant.top_k = 0;
                  }});
  keys.push_back({"top_k", "K for the topk variant",
                  [](const RunConfig& c) { return std::to_string(c.variant.top_k); },
                  [](RunConfig& c, std::string_view v) {
                    c.variant.top_k = parse_count("top_k", v);
                  }});
  keys.push_back(real_key("beta0", "base beta",
                          [](auto& c) -> auto& { return c.beta.beta0; }));
  keys.push_back(real_key("alpha", "dynamic beta adjustment intensity, [0, 1)",
                          [](auto& c) -> auto& { return c.beta.alpha; }));
  keys.push_back(real_key("gamma", "dynamic beta intrinsic preference margin",
                          [](auto& c) -> auto& { return c.beta.gamma; }));
  keys.push_back(real_key("sft_lr", "supervised learning rate",
                          [](auto& c) -> auto& { return c.sft_lr; }));
  keys.push_back(real_key("po_lr", "preference-optimization learning rate",
                          [](auto& c) -> auto& { return c.po_lr; }));
  keys.push_back(count_key("batch_size", "instances per optimizer step",
                           [](auto& c) -> auto& { return c.batch_size; }));
  keys.push_back({"seed", "run seed",
                  [](const RunConfig& c) { return std::to_string(c.seed); },
                  [](RunConfig& c, std::string_view v) {
                    c.seed = parse_number<std::uint64_t>("seed", v, "a 64-bit unsigned integer");
                  }});
  keys.push_back({"fixed_negatives", "reuse epoch-0 negatives in every PO epoch",
                  [](const RunConfig& c) { return std::string(c.fixed_negatives ? "true" : "false"); },
                  [](RunConfig& c, std::string_view v) {
                    c.fixed_negatives = parse_bool("fixed_negatives", v);
                  }});
  keys.push_back({"negative_sampler", "uniform | popularity",
                  [](const RunConfig& c) { return sampler_name(c.negative_sampler); },
                  [](RunConfig& c, std::string_view v) {
                    if (v == "uniform") {
                      c.negative_sampler = NegativeSampler::Uniform;
                    } else if (v == "popularity") {
                      c.negative_sampler = NegativeSampler::Popularity;
                    } else {
                      bad_value("negative_sampler", v, "uniform or popularity");
                    }
                  }});
  keys.push_back(real_key("sb_threshold", "likelihood-gap threshold for the S/B partition",
                          [](auto& c) -> auto& { return c.sb_threshold; }));
  keys.push_back(count_key("sb_probe", "instances tracked for the S/B curve",
                           [](auto& c) -> auto& { return c.sb_probe; }));
  keys.push_back(real_key("sb_interval", "S/B checkpoint spacing (fraction of PO steps)",
                          [](auto& c) -> auto& { return c.sb_interval; }));
  keys.push_back({"out", "output directory",
                  [](const RunConfig& c) { return c.out; },
                  [](RunConfig& c, std::string_view v) { c.out = std::string(v); }});
  return keys;
}

}  // namespace

void validate(const RunConfig& cfg) {
  SyntheticConfig synthetic = cfg.synthetic;
  validate(synthetic);
  if (cfg.history_len == 0) throw_invalid("history_len must be positive");
  if (cfg.dim == 0) throw_invalid("dim must be positive");
  if (cfg.negatives == 0) throw_invalid("negatives must be positive");
  if (cfg.batch_size == 0) throw_invalid("batch_size must be positive");
  if (!(cfg.sft_lr > 0.0) || !(cfg.po_lr > 0.0)) throw_invalid("learning rates must be positive");
  validate(cfg.beta);
  if (cfg.objective == Objective::Dpo && cfg.negatives != 1) {
    throw_invalid("objective dpo needs negatives = 1");
  }
  if (cfg.variant.kind == Variant::Kind::TopK &&
      (cfg.variant.top_k == 0 || cfg.variant.top_k > cfg.negatives)) {
    throw_invalid("top_k must lie in [1, negatives]");
  }
  if (!(cfg.sb_interval > 0.0 && cfg.sb_interval <= 1.0)) {
    throw_invalid("sb_interval must lie in (0, 1]");
  }
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const ConfigKey& k : config_keys()) {
    if (k.name == key) {
      k.set(cfg, trim(value));
      return;
    }
  }
  throw Error(ErrorCode::Parse, "unknown config key '" + std::string(key) + "'");
}

std::string get_config_value(const RunConfig& cfg, std::string_view key) {
  for (const ConfigKey& k : config_keys()) {
    if (k.name == key) return k.get(cfg);
  }
  throw Error(ErrorCode::Parse, "unknown config key '" + std::string(key) + "'");
}

void apply_config(RunConfig& cfg, std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::Parse,
                  source_name + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_config_value(cfg, trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(e.code(), source_name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

RunConfig parse_config(std::istream& in, const std::string& source_name) {
  RunConfig cfg;
  apply_config(cfg, in, source_name);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  return parse_config(in, path.string());
}

void write_config(const RunConfig& cfg, std::ostream& out) {
  for (const ConfigKey& k : config_keys()) out << k.name << " = " << k.get(cfg) << '\n';
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write config " + path.string());
  write_config(cfg, out);
}

}  // namespace dynpo
