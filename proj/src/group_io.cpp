#include "resrl/group_io.hpp"

#include <json.hpp>

#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>

#include "resrl/json_writer.hpp"

namespace resrl {
namespace {

using nlohmann::json;

struct PendingTrajectory {
  std::map<int, TokenRecord> tokens;
  std::optional<double> reward;
  std::optional<int> length;
  std::size_t first_line = 0;
};

struct PendingGroup {
  std::string prompt_id;
  std::map<int, PendingTrajectory> trajs;
  std::size_t first_line = 0;
  Eigen::Index dim = -1;
};

template <typename T>
T field(const json& obj, const char* name, std::size_t line) {
  const auto it = obj.find(name);
  if (it == obj.end()) throw GroupParseError(line, std::string("missing field '") + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw GroupParseError(line, std::string("field '") + name + "' has the wrong type");
  }
}

bool flag(const json& obj, const char* name, std::size_t line, bool fallback) {
  const auto it = obj.find(name);
  if (it == obj.end()) return fallback;
  if (it->is_boolean()) return it->get<bool>();
  if (it->is_number_integer()) {
    const auto v = it->get<long long>();
    if (v == 0 || v == 1) return v == 1;
  }
  throw GroupParseError(line, std::string("field '") + name + "' must be 0 or 1");
}

}  // namespace

std::vector<PromptGroup> read_groups(std::istream& in) {
  std::vector<PendingGroup> pending;
  std::map<std::string, std::size_t> index;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw GroupParseError(line, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw GroupParseError(line, "record is not a JSON object");
    const auto id = field<std::string>(obj, "prompt_id", line);
    const int traj = field<int>(obj, "traj", line);
    if (traj < 0) throw GroupParseError(line, "negative trajectory index");
    auto [it, inserted] = index.try_emplace(id, pending.size());
    if (inserted) pending.push_back({id, {}, line, -1});
    PendingGroup& grp = pending[it->second];
    PendingTrajectory& pt = grp.trajs[traj];
    if (pt.first_line == 0) pt.first_line = line;

    if (obj.contains("hidden")) {
      TokenRecord tok;
      tok.traj = traj;
      tok.position = field<int>(obj, "pos", line);
      if (tok.position < 0) throw GroupParseError(line, "negative position");
      const auto hidden = field<std::vector<double>>(obj, "hidden", line);
      tok.hidden = Eigen::Map<const Eigen::VectorXd>(hidden.data(), static_cast<Eigen::Index>(hidden.size()));
      if (!tok.hidden.allFinite()) throw GroupParseError(line, "non-finite hidden state");
      if (grp.dim < 0) grp.dim = tok.hidden.size();
      if (tok.hidden.size() != grp.dim) {
        throw GroupParseError(line, "hidden dim " + std::to_string(tok.hidden.size()) +
                                        " differs from group dim " + std::to_string(grp.dim));
      }
      tok.valid = flag(obj, "mask", line, true);
      tok.truncation_tail = flag(obj, "tail", line, false);
      tok.old_logprob = obj.contains("old_logprob") ? field<double>(obj, "old_logprob", line) : 0.0;
      tok.cur_logprob = obj.contains("cur_logprob") ? field<double>(obj, "cur_logprob", line)
                                                    : tok.old_logprob;
      if (!pt.tokens.emplace(tok.position, std::move(tok)).second) {
        throw GroupParseError(line, "duplicate token position");
      }
    } else if (obj.contains("reward")) {
      if (pt.reward) throw GroupParseError(line, "duplicate trajectory trailer");
      pt.reward = field<double>(obj, "reward", line);
      if (!std::isfinite(*pt.reward)) throw GroupParseError(line, "non-finite reward");
      pt.length = field<int>(obj, "length", line);
    } else {
      throw GroupParseError(line, "record is neither a token nor a trajectory trailer");
    }
  }

  std::vector<PromptGroup> groups;
  groups.reserve(pending.size());
  for (auto& grp : pending) {
    PromptGroup out;
    out.prompt_id = grp.prompt_id;
    int expected = 0;
    for (auto& [ti, pt] : grp.trajs) {
      if (ti != expected) {
        throw GroupParseError(pt.first_line, "group '" + grp.prompt_id + "' skips trajectory " +
                                                 std::to_string(expected));
      }
      ++expected;
      if (!pt.reward) {
        throw GroupParseError(pt.first_line, "trajectory " + std::to_string(ti) + " of group '" +
                                                 grp.prompt_id + "' has no trailer");
      }
      if (static_cast<std::size_t>(*pt.length) != pt.tokens.size()) {
        throw GroupParseError(pt.first_line, "trajectory " + std::to_string(ti) + " of group '" +
                                                 grp.prompt_id + "' declares length " +
                                                 std::to_string(*pt.length) + " but has " +
                                                 std::to_string(pt.tokens.size()) + " tokens");
      }
      Trajectory traj;
      traj.reward = *pt.reward;
      int pos = 0;
      for (auto& [p, tok] : pt.tokens) {
        if (p != pos++) {
          throw GroupParseError(pt.first_line, "trajectory " + std::to_string(ti) +
                                                   " has a gap in token positions");
        }
        traj.tokens.push_back(std::move(tok));
      }
      out.trajectories.push_back(std::move(traj));
    }
    groups.push_back(std::move(out));
  }
  return groups;
}

void write_groups(std::ostream& out, const std::vector<PromptGroup>& groups) {
  for (const auto& grp : groups) {
    for (std::size_t i = 0; i < grp.size(); ++i) {
      const auto& traj = grp.trajectories[i];
      for (const auto& tok : traj.tokens) {
        JsonObject rec;
        rec.add("prompt_id", grp.prompt_id)
            .add("traj", tok.traj)
            .add("pos", tok.position)
            .add_array("hidden", std::span<const double>(tok.hidden.data(),
                                                         static_cast<std::size_t>(tok.hidden.size())))
            .add("mask", tok.valid ? 1 : 0)
            .add("tail", tok.truncation_tail ? 1 : 0)
            .add("old_logprob", tok.old_logprob);
        out << rec.str() << '\n';
      }
      JsonObject trailer;
      trailer.add("prompt_id", grp.prompt_id)
          .add("traj", static_cast<int>(i))
          .add("reward", traj.reward)
          .add("length", traj.length());
      out << trailer.str() << '\n';
    }
  }
}

}  // namespace resrl
