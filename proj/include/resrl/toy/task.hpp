// Modular sum chain: the prompt lists `depth` digits mod p, the response is a
// free digit scratchpad closed by EOS, and the verifier checks the last digit
// before EOS against the sum.

#ifndef RESRL_TOY_TASK_HPP_
#define RESRL_TOY_TASK_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace resrl::toy {

class SumChainTask {
 public:
  SumChainTask(int modulus, int depth);

  int modulus() const { return modulus_; }
  int depth() const { return depth_; }
  /// Digits 0..p-1 followed by BOS, SEP, EOS.
  int vocab_size() const { return modulus_ + 3; }
  int bos() const { return modulus_; }
  int sep() const { return modulus_ + 1; }
  int eos() const { return modulus_ + 2; }
  bool is_digit(int token) const { return token >= 0 && token < modulus_; }

  /// Number of distinct prompts, p^depth.
  std::size_t prompt_count() const;
  /// Digits of prompt `index` in base p, most significant first.
  std::vector<int> prompt_digits(std::size_t index) const;
  /// BOS d1 .. dD SEP.
  std::vector<int> prompt_tokens(std::size_t index) const;
  int answer(std::size_t index) const;
  /// Running sums s1..sD then EOS.
  std::vector<int> canonical_response(std::size_t index) const;

  /// 1 iff the response ends in EOS and the token before it is the answer.
  double reward(std::size_t index, const std::vector<int>& response) const;

  std::string prompt_id(std::size_t index) const;

 private:
  int modulus_;
  int depth_;
};

}  // namespace resrl::toy

#endif  // RESRL_TOY_TASK_HPP_
