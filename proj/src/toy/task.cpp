#include "resrl/toy/task.hpp"

#include <stdexcept>

namespace resrl::toy {

SumChainTask::SumChainTask(int modulus, int depth) : modulus_(modulus), depth_(depth) {
  if (modulus < 2) throw std::invalid_argument("SumChainTask: modulus must be >= 2");
  if (depth < 1) throw std::invalid_argument("SumChainTask: depth must be >= 1");
  std::size_t n = 1;
  for (int i = 0; i < depth; ++i) {
    n *= static_cast<std::size_t>(modulus);
    if (n > (std::size_t{1} << 32)) throw std::invalid_argument("SumChainTask: too many prompts");
  }
}

std::size_t SumChainTask::prompt_count() const {
  std::size_t n = 1;
  for (int i = 0; i < depth_; ++i) n *= static_cast<std::size_t>(modulus_);
  return n;
}

std::vector<int> SumChainTask::prompt_digits(std::size_t index) const {
  if (index >= prompt_count()) throw std::out_of_range("SumChainTask: prompt index");
  std::vector<int> digits(static_cast<std::size_t>(depth_));
  for (int i = depth_ - 1; i >= 0; --i) {
    digits[static_cast<std::size_t>(i)] = static_cast<int>(index % static_cast<std::size_t>(modulus_));
    index /= static_cast<std::size_t>(modulus_);
  }
  return digits;
}

std::vector<int> SumChainTask::prompt_tokens(std::size_t index) const {
  std::vector<int> out{bos()};
  for (int d : prompt_digits(index)) out.push_back(d);
  out.push_back(sep());
  return out;
}

int SumChainTask::answer(std::size_t index) const {
  int s = 0;
  for (int d : prompt_digits(index)) s = (s + d) % modulus_;
  return s;
}

std::vector<int> SumChainTask::canonical_response(std::size_t index) const {
  std::vector<int> out;
  int s = 0;
  for (int d : prompt_digits(index)) {
    s = (s + d) % modulus_;
    out.push_back(s);
  }
  out.push_back(eos());
  return out;
}

double SumChainTask::reward(std::size_t index, const std::vector<int>& response) const {
  if (response.size() < 2 || response.back() != eos()) return 0.0;
  const int last = response[response.size() - 2];
  return last == answer(index) ? 1.0 : 0.0;
}

std::string SumChainTask::prompt_id(std::size_t index) const {
  std::string id = "sum";
  for (int d : prompt_digits(index)) id += "-" + std::to_string(d);
  return id;
}

}  // namespace resrl::toy
