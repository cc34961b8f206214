#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace traitgrade {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Raised for essays that contain no sentences after splitting/encoding.
class EmptyEssayError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Collects every offending record of a dataset load so callers can list them all.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out;
    for (const auto& s : issues) {
      if (!out.empty()) out += '\n';
      out += s;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

// Training produced a NaN/Inf loss.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(int epoch, std::size_t batch, double loss)
      : Error("non-finite loss " + std::to_string(loss) + " at epoch " + std::to_string(epoch) +
              ", batch " + std::to_string(batch)),
        epoch_(epoch),
        batch_(batch),
        loss_(loss) {}

  int epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }
  double loss() const noexcept { return loss_; }

 private:
  int epoch_;
  std::size_t batch_;
  double loss_;
};

}  // namespace traitgrade
