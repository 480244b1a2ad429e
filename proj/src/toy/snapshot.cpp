#include "resrl/toy/snapshot.hpp"

#include <bit>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace resrl::toy {

static_assert(std::endian::native == std::endian::little, "snapshots assume a little-endian host");

void write_snapshot(std::ostream& out, const TinyPolicy& policy, int step) {
  const PolicyShape& s = policy.shape();
  nlohmann::ordered_json header;
  header["format"] = "resrl-policy";
  header["version"] = 1;
  header["step"] = step;
  header["dtype"] = "f64";
  header["shape"] = {{"vocab", s.vocab}, {"embed", s.embed}, {"recurrent", s.recurrent}, {"hidden", s.hidden}};
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  for (const auto& t : policy.layout()) {
    tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"offset", t.offset}});
  }
  header["tensors"] = tensors;
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(policy.params().data()),
            static_cast<std::streamsize>(policy.param_count() * static_cast<Eigen::Index>(sizeof(double))));
  if (!out) throw std::runtime_error("write_snapshot: write failed");
}

Snapshot read_snapshot(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_snapshot: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
    if (header.at("format") != "resrl-policy" || header.at("version") != 1 || header.at("dtype") != "f64") {
      throw std::runtime_error("read_snapshot: unsupported format");
    }
    const auto& sh = header.at("shape");
    PolicyShape shape{sh.at("vocab").get<int>(), sh.at("embed").get<int>(), sh.at("recurrent").get<int>(),
                      sh.at("hidden").get<int>()};
    Snapshot snap{header.at("step").get<int>(), TinyPolicy(shape)};
    auto& p = snap.policy.params();
    in.read(reinterpret_cast<char*>(p.data()),
            static_cast<std::streamsize>(p.size() * static_cast<Eigen::Index>(sizeof(double))));
    if (in.gcount() != static_cast<std::streamsize>(p.size() * static_cast<Eigen::Index>(sizeof(double)))) {
      throw std::runtime_error("read_snapshot: truncated payload");
    }
    return snap;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("read_snapshot: bad header: ") + e.what());
  }
}

}  // namespace resrl::toy
