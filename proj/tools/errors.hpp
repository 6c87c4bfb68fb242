#pragma once

#include "matchdb/error.hpp"

namespace matchdb::cli {

// Invalid configuration or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace matchdb::cli
