#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "resrl/bench.hpp"
#include "resrl/group_io.hpp"
#include "resrl/json_writer.hpp"
#include "resrl/pipeline.hpp"
#include "resrl/report.hpp"
#include "resrl/toy/snapshot.hpp"
#include "resrl/toy/train.hpp"
#include "run_config.hpp"

namespace resrl::cli {

namespace {

namespace fs = std::filesystem;

// A flag bound to one config key; applied after the config file is merged.
struct FlagBinding {
  std::string section;
  std::string key;
  CLI::Option* option = nullptr;
  std::string text;
  bool flag = false;
};

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  std::string config_path;
  std::vector<std::unique_ptr<FlagBinding>> flags;
};

void bind_flags(Command& cmd) {
  const Json defaults = default_config(cmd.name);
  cmd.app->add_option("--config", cmd.config_path, "JSON config file; flags override its values");
  auto bind = [&](const std::string& section, const std::string& key, const Json& value) {
    auto b = std::make_unique<FlagBinding>();
    b->section = section;
    b->key = key;
    const std::string name = "--" + key;
    const std::string help = (section.empty() ? key : section + "." + key) + " (default " + value.dump() + ")";
    if (value.is_boolean()) {
      b->option = cmd.app->add_flag(name, b->flag, help);
    } else {
      b->option = cmd.app->add_option(name, b->text, help);
    }
    cmd.flags.push_back(std::move(b));
  };
  for (const auto& [key, value] : defaults.items()) {
    if (value.is_object()) {
      for (const auto& [k, v] : value.items()) bind(key, k, v);
    } else {
      bind("", key, value);
    }
  }
}

Json resolve(const Command& cmd) {
  Json cfg = default_config(cmd.name);
  if (!cmd.config_path.empty()) {
    std::ifstream in(cmd.config_path);
    if (!in) throw ConfigError("cannot open config '" + cmd.config_path + "'");
    Json file;
    try {
      file = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw ConfigError("config '" + cmd.config_path + "': " + e.what());
    }
    merge_config(cfg, file);
  }
  for (const auto& b : cmd.flags) {
    if (b->option->count() == 0) continue;
    Json& slot = b->section.empty() ? cfg.at(b->key) : cfg.at(b->section).at(b->key);
    if (slot.is_boolean()) {
      slot = b->flag;
    } else {
      set_from_string(cfg, b->section, b->key, b->text);
    }
  }
  return cfg;
}

fs::path output_dir(const Json& cfg) {
  fs::path dir = cfg.at("output_dir").get<std::string>();
  fs::create_directories(dir);
  return dir;
}

fs::path output_path(const Json& cfg, const std::string& configured, const char* fallback) {
  return configured.empty() ? output_dir(cfg) / fallback : fs::path(configured);
}

void write_echo(const Json& cfg, const std::string& command) {
  std::ofstream out(output_dir(cfg) / (command + ".config.json"));
  out << cfg.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write config echo");
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::string real_or_null(const std::optional<double>& v) { return v ? format_real(*v) : "null"; }

int cmd_reweight(const Json& cfg, std::ostream& out, std::ostream& err) {
  const Json& section = cfg.at("reweight");
  const std::string input = section.at("input").get<std::string>();
  if (input.empty()) {
    err << "reweight: --input is required\n";
    return kUsage;
  }
  const GatingConfig gating = gating_from(cfg);
  gating.validate();
  const Mode mode = parse_mode(section.at("mode").get<std::string>());
  std::ifstream in(input);
  if (!in) {
    err << "reweight: cannot open '" << input << "'\n";
    return kUsage;
  }
  std::vector<PromptGroup> groups;
  try {
    groups = read_groups(in);
  } catch (const GroupParseError& e) {
    err << input << ":" << e.line() << ": " << e.what() << '\n';
    return kUsage;
  }
  const std::string target = section.at("output").get<std::string>();
  std::ofstream file;
  std::ostream* sink = &out;
  if (target != "-") {
    file = open_output(output_path(cfg, target, "reweight.jsonl"));
    sink = &file;
  }
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  for (const auto& raw : groups) {
    PromptGroup group;
    try {
      group = normalize_advantages(raw, gating.std_floor);
    } catch (const std::invalid_argument& e) {
      err << input << ": group '" << raw.prompt_id << "': " << e.what() << '\n';
      return kUsage;
    }
    const GroupReweighting rw = reweight_group(group, gating, mode, seed);
    std::map<std::pair<int, int>, const GatedToken*> gated;
    if (rw.gate) {
      for (const auto& t : rw.gate->tokens) gated[{t.traj, t.pos}] = &t;
    }
    const bool has_residuals = rw.gate && !rw.gate->fallback;
    for (std::size_t i = 0; i < group.size(); ++i) {
      const auto& traj = group.trajectories[i];
      for (std::size_t t = 0; t < traj.length(); ++t) {
        const auto& tok = traj.tokens[t];
        if (!tok.valid) continue;
        std::optional<double> r, omega;
        if (auto it = gated.find({static_cast<int>(i), static_cast<int>(t)}); it != gated.end()) {
          if (has_residuals) r = it->second->residual;
          omega = it->second->weight;
        }
        JsonObject o;
        o.add("prompt_id", group.prompt_id)
            .add("traj", static_cast<int>(i))
            .add("pos", tok.position)
            .add_raw("R", real_or_null(r))
            .add_raw("omega", real_or_null(omega))
            .add("A_tilde", rw.coefficients.values[i][t]);
        *sink << o.str() << '\n';
      }
    }
  }
  sink->flush();
  write_echo(cfg, "reweight");
  return kOk;
}

int cmd_verify(const Json& cfg, std::ostream& out) {
  const TheoryReport report = run_theory_report(verify_from(cfg));
  const std::string configured = cfg.at("verify").at("report").get<std::string>();
  const fs::path path = output_path(cfg, configured, "theory_report.json");
  auto file = open_output(path);
  file << report.to_json() << '\n';
  file.close();
  write_echo(cfg, "verify");
  out << "factorization_max_rel_err " << format_real(report.factorization.max_rel_err) << '\n'
      << "alignment_violations " << report.alignment.violations << '\n'
      << "proxy_violations " << report.proxy.violations << '\n'
      << "lld_bridge_order " << format_real(report.lld.slope) << '\n'
      << "total_violations " << report.total_violations() << '\n'
      << "report " << path.string() << '\n';
  return report.total_violations() == 0 ? kOk : kCheckFailed;
}

int cmd_train(const Json& cfg, std::ostream& out, std::ostream& err) {
  toy::ToyConfig toy_cfg = toy_from(cfg);
  toy_cfg.validate();
  const fs::path dir = output_dir(cfg);
  const std::string configured = cfg.at("train").at("metrics").get<std::string>();
  auto metrics = open_output(output_path(cfg, configured, "metrics.jsonl"));
  write_echo(cfg, "train");
  const auto outcome = toy::train(
      toy_cfg, [&](const toy::RunMetrics& m) { metrics << m.to_json() << '\n'; },
      [&](const toy::ToyRun& run) {
        auto snap = open_output(dir / ("snapshot_step" + std::to_string(run.steps_done()) + ".bin"));
        toy::write_snapshot(snap, run.policy(), run.steps_done());
      });
  metrics.flush();
  if (outcome.diverged) {
    err << "train: diverged after " << outcome.metrics.size() << " steps: " << outcome.error << '\n';
    return kCheckFailed;
  }
  if (!outcome.metrics.empty()) out << outcome.metrics.back().to_json() << '\n';
  return kOk;
}

int cmd_bench(const Json& cfg, std::ostream& out) {
  const Json& section = cfg.at("bench");
  const std::string spec = section.at("sizes").get<std::string>();
  const auto sizes = spec.empty() ? default_bench_grid() : parse_bench_sizes(spec);
  const auto rows = bench_overhead(sizes, bench_options_from(cfg));
  const auto summary = summarize_bench(rows);
  const std::string configured = section.at("output").get<std::string>();
  const fs::path path = output_path(cfg, configured, "bench.csv");
  auto file = open_output(path);
  write_bench_csv(file, rows, summary);
  file.close();
  write_echo(cfg, "bench");
  write_bench_csv(out, rows, summary);
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Residual-gated negative reweighting toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "resrl 0.1.0");
  std::vector<std::unique_ptr<Command>> commands;
  const std::pair<const char*, const char*> specs[] = {
      {"reweight", "Reweight serialized prompt groups"},
      {"verify", "Run the theory checks and write a JSON report"},
      {"train", "Toy-scale RL training with JSONL metrics"},
      {"bench", "Time the residual path against the vocabulary path"},
  };
  for (const auto& [name, help] : specs) {
    auto cmd = std::make_unique<Command>();
    cmd->name = name;
    cmd->app = app.add_subcommand(name, help);
    bind_flags(*cmd);
    commands.push_back(std::move(cmd));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kUsage;
  }
  const Command* cmd = nullptr;
  for (const auto& c : commands) {
    if (c->app->parsed()) cmd = c.get();
  }
  Json cfg;
  try {
    cfg = resolve(*cmd);
  } catch (const ConfigError& e) {
    err << cmd->name << ": " << e.what() << '\n';
    return kUsage;
  }
  try {
    if (cmd->name == "reweight") return cmd_reweight(cfg, out, err);
    if (cmd->name == "verify") return cmd_verify(cfg, out);
    if (cmd->name == "train") return cmd_train(cfg, out, err);
    return cmd_bench(cfg, out);
  } catch (const std::invalid_argument& e) {
    err << cmd->name << ": " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << cmd->name << ": " << e.what() << '\n';
    return kCheckFailed;
  }
}

}  // namespace resrl::cli
