// Minimal ordered JSON emitter with fixed 17-significant-digit reals, so
// every numeric output is byte-stable across runs.

#ifndef RESRL_JSON_WRITER_HPP_
#define RESRL_JSON_WRITER_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace resrl {

/// "%.17g"; NaN and infinities become null.
std::string format_real(double v);
std::string quote_json(std::string_view s);

class JsonObject {
 public:
  JsonObject& add(std::string_view key, double v);
  JsonObject& add(std::string_view key, std::int64_t v);
  JsonObject& add(std::string_view key, int v) { return add(key, static_cast<std::int64_t>(v)); }
  JsonObject& add(std::string_view key, std::size_t v) {
    return add(key, static_cast<std::int64_t>(v));
  }
  JsonObject& add(std::string_view key, bool v);
  JsonObject& add(std::string_view key, std::string_view v);
  JsonObject& add(std::string_view key, const char* v) { return add(key, std::string_view(v)); }
  JsonObject& add_null(std::string_view key);
  /// Inserts pre-serialised JSON verbatim.
  JsonObject& add_raw(std::string_view key, std::string_view json);
  JsonObject& add_array(std::string_view key, std::span<const double> values);

  std::string str() const { return "{" + body_ + "}"; }

 private:
  void key(std::string_view k);
  std::string body_;
};

}  // namespace resrl

#endif  // RESRL_JSON_WRITER_HPP_
