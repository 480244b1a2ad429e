#include "run_config.hpp"

#include <cstdlib>
#include <type_traits>

namespace resrl::cli {

namespace {

const char* const kCommands[] = {"reweight", "verify", "train", "bench"};

// Field visitors shared by the default writers and the readers.
template <class F>
void visit_gating(GatingConfig& g, F&& f) {
  f("rank", g.rank);
  f("m_max", g.m_max);
  f("alpha", g.alpha);
  f("beta", g.beta);
  f("xi", g.xi);
  f("eps", g.eps);
  f("lambda_pos", g.lambda_pos);
  f("clip_eps", g.clip_eps);
  f("truncation_guard", g.truncation_guard);
  f("layernorm_enabled", g.layernorm_enabled);
  f("layernorm_eps", g.layernorm_eps);
  f("kl_coeff", g.kl_coeff);
  f("svd_tol", g.svd_tol);
  f("std_floor", g.std_floor);
  f("boundary_fraction", g.boundary_fraction);
}

template <class F>
void visit_toy(toy::ToyConfig& c, F&& f) {
  f("modulus", c.modulus);
  f("depth", c.depth);
  f("max_len", c.max_len);
  f("embed_dim", c.embed_dim);
  f("recurrent_dim", c.recurrent_dim);
  f("hidden_dim", c.hidden_dim);
  f("layer", c.layer);
  f("group_size", c.group_size);
  f("temperature", c.temperature);
  f("prompts_per_step", c.prompts_per_step);
  f("lr", c.lr);
  f("momentum", c.momentum);
  f("warmup_steps", c.warmup_steps);
  f("warmup_batch", c.warmup_batch);
  f("warmup_lr", c.warmup_lr);
  f("steps", c.steps);
  f("mode", c.mode);
  f("length_scaling", c.length_scaling);
  f("length_l0_fraction", c.length_l0_fraction);
  f("length_floor", c.length_floor);
  f("eval_every", c.eval_every);
  f("eval_prompts", c.eval_prompts);
  f("eval_samples", c.eval_samples);
  f("probe_size", c.probe_size);
  f("save_every", c.save_every);
}

template <class F>
void visit_verify(TheoryReportOptions& o, bool& bench, F&& f) {
  f("factorization_trials", o.factorization_trials);
  f("bound_trials", o.bound_trials);
  f("proxy_tokens", o.proxy_tokens);
  f("bootstrap", o.bootstrap);
  f("projector_fault", o.projector_fault);
  f("bench", bench);
}

template <class F>
void visit_bench(BenchOptions& o, F&& f) {
  f("repeats", o.repeats);
  f("warmup", o.warmup);
  f("min_sample_seconds", o.min_sample_seconds);
}

struct Writer {
  Json& out;
  void operator()(const char* k, Mode v) { out[k] = std::string(to_string(v)); }
  void operator()(const char* k, toy::HiddenLayer v) { out[k] = toy::to_string(v); }
  template <class T>
  void operator()(const char* k, const T& v) { out[k] = v; }
};

struct Reader {
  const Json& in;
  void operator()(const char* k, Mode& v) { v = parse_mode(in.at(k).get<std::string>()); }
  void operator()(const char* k, toy::HiddenLayer& v) { v = toy::parse_hidden_layer(in.at(k).get<std::string>()); }
  template <class T>
  void operator()(const char* k, T& v) { v = in.at(k).get<T>(); }
};

Json gating_json(GatingConfig g) {
  Json j = Json::object();
  visit_gating(g, Writer{j});
  return j;
}

Json section_defaults(const std::string& section) {
  Json j = Json::object();
  if (section == "gating") return gating_json(GatingConfig{});
  if (section == "reweight") {
    j["input"] = "";
    j["output"] = "";
    j["mode"] = "resrl";
  } else if (section == "verify") {
    TheoryReportOptions o;
    bool bench = false;
    visit_verify(o, bench, Writer{j});
    j["report"] = "";
  } else if (section == "train") {
    toy::ToyConfig c;
    visit_toy(c, Writer{j});
    j["metrics"] = "";
  } else if (section == "bench") {
    j["sizes"] = "";
    BenchOptions o;
    visit_bench(o, Writer{j});
    j["output"] = "";
  }
  return j;
}

bool compatible(const Json& def, const Json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_unsigned()) return v.is_number_unsigned();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number_float()) return v.is_number();
  if (def.is_string()) return v.is_string();
  return false;
}

const char* type_name(const Json& def) {
  if (def.is_boolean()) return "a boolean";
  if (def.is_number_unsigned()) return "a non-negative integer";
  if (def.is_number_integer()) return "an integer";
  if (def.is_number_float()) return "a number";
  return "a string";
}

// Checks v against the default's type and returns it stored as that type.
Json checked(const Json& def, const Json& v, const std::string& where) {
  if (!compatible(def, v)) throw ConfigError(where + " must be " + type_name(def));
  if (def.is_number_float()) return v.get<double>();
  if (def.is_number_integer() && !def.is_number_unsigned()) return v.get<std::int64_t>();
  return v;
}

}  // namespace

Json default_config(const std::string& command) {
  Json j = Json::object();
  j["seed"] = std::uint64_t{0};
  const char* env = std::getenv("RESRL_OUTPUT_DIR");
  j["output_dir"] = env && *env ? env : ".";
  if (command == "reweight") j["gating"] = gating_json(GatingConfig{});
  if (command == "train") j["gating"] = gating_json(toy::ToyConfig::default_gating());
  j[command] = section_defaults(command);
  return j;
}

void merge_config(Json& base, const Json& file) {
  if (!file.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : file.items()) {
    if (key == "seed" || key == "output_dir") {
      base[key] = checked(base.at(key), value, key);
      continue;
    }
    bool known = key == "gating";
    for (const char* c : kCommands) known = known || key == c;
    if (!known) throw ConfigError("unknown config key '" + key + "'");
    if (!value.is_object()) throw ConfigError("section '" + key + "' must be an object");
    const bool used = base.contains(key);
    const Json defaults = used ? base.at(key) : section_defaults(key);
    for (const auto& [k, v] : value.items()) {
      if (!defaults.contains(k)) throw ConfigError("unknown config key '" + key + "." + k + "'");
      const Json c = checked(defaults.at(k), v, key + "." + k);
      if (used) base[key][k] = c;
    }
  }
}

void set_from_string(Json& base, const std::string& section, const std::string& key,
                     const std::string& value) {
  Json& slot = section.empty() ? base.at(key) : base.at(section).at(key);
  const std::string where = "--" + key;
  if (slot.is_string()) {
    slot = value;
    return;
  }
  Json parsed;
  try {
    parsed = Json::parse(value);
  } catch (const Json::parse_error&) {
    throw ConfigError(where + ": cannot parse '" + value + "'");
  }
  slot = checked(slot, parsed, where);
}

GatingConfig gating_from(const Json& cfg) {
  GatingConfig g;
  visit_gating(g, Reader{cfg.at("gating")});
  return g;
}

toy::ToyConfig toy_from(const Json& cfg) {
  toy::ToyConfig c;
  visit_toy(c, Reader{cfg.at("train")});
  c.gating = gating_from(cfg);
  c.seed = cfg.at("seed").get<std::uint64_t>();
  return c;
}

TheoryReportOptions verify_from(const Json& cfg) {
  TheoryReportOptions o;
  bool bench = false;
  visit_verify(o, bench, Reader{cfg.at("verify")});
  o.seed = cfg.at("seed").get<std::uint64_t>();
  if (bench) o.bench_sizes = default_bench_grid();
  return o;
}

BenchOptions bench_options_from(const Json& cfg) {
  BenchOptions o;
  visit_bench(o, Reader{cfg.at("bench")});
  o.seed = cfg.at("seed").get<std::uint64_t>();
  return o;
}

}  // namespace resrl::cli
