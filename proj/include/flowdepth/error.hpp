#pragma once

#include <stdexcept>
#include <string>

namespace flowdepth {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class BehindCameraError : public Error {
 public:
  using Error::Error;
};

class InvalidDepthError : public Error {
 public:
  using Error::Error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

class InvalidSceneError : public Error {
 public:
  using Error::Error;
};

class NoValidPixelsError : public Error {
 public:
  using Error::Error;
};

/// |t_3| too small for the divergence/depth-gradient relation.
class LateralMotionError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind { io, bad_magic, bad_header, truncated, dimension_overflow, non_finite };

class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace flowdepth
