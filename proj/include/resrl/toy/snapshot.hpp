// Policy snapshots: one JSON header line (format, step, dtype, tensor
// shapes) followed by the raw little-endian float64 parameters.

#ifndef RESRL_TOY_SNAPSHOT_HPP_
#define RESRL_TOY_SNAPSHOT_HPP_

#include <iosfwd>
#include <string>

#include "resrl/toy/policy.hpp"

namespace resrl::toy {

struct Snapshot {
  int step = 0;
  TinyPolicy policy;
};

void write_snapshot(std::ostream& out, const TinyPolicy& policy, int step);
/// Throws std::runtime_error on a malformed header or truncated payload.
Snapshot read_snapshot(std::istream& in);

}  // namespace resrl::toy

#endif  // RESRL_TOY_SNAPSHOT_HPP_
