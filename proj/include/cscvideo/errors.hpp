#pragma once

#include <stdexcept>
#include <string>

namespace cscvideo {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid operation parameters or dimension mismatches.
struct ParamError : Error {
  using Error::Error;
};

// Unreadable or unwritable paths, OS-level I/O failures.
struct IoError : Error {
  using Error::Error;
};

// Malformed tensor or image files.
struct FormatError : Error {
  using Error::Error;
};

// Frame ingestion problems: missing frames, mixed dimensions.
struct IngestError : Error {
  using Error::Error;
};

// Infeasible training-block selection requests.
struct SelectionError : Error {
  using Error::Error;
};

}  // namespace cscvideo
