// Line-delimited group format.
//
// One JSON object per line. Token records:
//   {"prompt_id":..,"traj":i,"pos":t,"hidden":[..d reals..],"mask":0|1,
//    "tail":0|1,"old_logprob":x}
// and one trailer per trajectory:
//   {"prompt_id":..,"traj":i,"reward":r,"length":T}
// Groups appear in order of first mention. Blank lines are ignored.

#ifndef RESRL_GROUP_IO_HPP_
#define RESRL_GROUP_IO_HPP_

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "resrl/group.hpp"

namespace resrl {

class GroupParseError : public std::runtime_error {
 public:
  GroupParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  /// 1-based; 0 for whole-file problems detected after reading.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::vector<PromptGroup> read_groups(std::istream& in);
void write_groups(std::ostream& out, const std::vector<PromptGroup>& groups);

}  // namespace resrl

#endif  // RESRL_GROUP_IO_HPP_
