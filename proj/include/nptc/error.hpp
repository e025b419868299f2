#pragma once

#include <stdexcept>
#include <string>

namespace nptc {

// Every library failure carries a stable category name so the CLI can print a
// single machine-parsable line.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

#define NPTC_DEFINE_ERROR(Name)                                               \
  class Name : public Error {                                                 \
   public:                                                                    \
    explicit Name(const std::string& message) : Error(#Name, message) {}      \
  }

NPTC_DEFINE_ERROR(ArgumentError);
NPTC_DEFINE_ERROR(ParseError);
NPTC_DEFINE_ERROR(EmptyCloud);
NPTC_DEFINE_ERROR(ShapeError);
NPTC_DEFINE_ERROR(ConfigError);
NPTC_DEFINE_ERROR(CacheMiss);
NPTC_DEFINE_ERROR(DisconnectedBand);
NPTC_DEFINE_ERROR(InternalError);
NPTC_DEFINE_ERROR(IoError);

#undef NPTC_DEFINE_ERROR

}  // namespace nptc
