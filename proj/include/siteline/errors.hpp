#pragma once

#include <stdexcept>
#include <string>

namespace siteline {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad parameters, violated preconditions, inconsistent configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FileNotFoundError : public IoError {
 public:
  using IoError::IoError;
};

/// Header could not be parsed, or the payload is shorter than the header says.
class MalformedImageError : public IoError {
 public:
  using IoError::IoError;
};

/// Well-formed file with a bit depth or layout we do not decode.
class UnsupportedFormatError : public IoError {
 public:
  using IoError::IoError;
};

class NetworkError : public Error {
 public:
  using Error::Error;
};

/// The tile server answered 404.
class TileMissingError : public NetworkError {
 public:
  using NetworkError::NetworkError;
};

/// Any other non-200 answer that survived the retry policy.
class HttpStatusError : public NetworkError {
 public:
  HttpStatusError(int status, const std::string& what)
      : NetworkError(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

/// The server answered 200 but the body is not a decodable image.
class BadPayloadError : public NetworkError {
 public:
  using NetworkError::NetworkError;
};

}  // namespace siteline
