#pragma once

#include <stdexcept>
#include <string>

namespace tmra {

/// Invalid user-supplied parameter (bad config value, out-of-range argument).
class parameter_error : public std::invalid_argument {
 public:
  explicit parameter_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Violation of an operation contract (shape mismatch, incompatible masks).
class contract_error : public std::logic_error {
 public:
  explicit contract_error(const std::string& what) : std::logic_error(what) {}
};

/// GRAPPA calibration cannot proceed (ACS too small, no sliding windows).
class calibration_error : public std::runtime_error {
 public:
  explicit calibration_error(const std::string& what) : std::runtime_error(what) {}
};

/// A linear system or other numeric step failed (singular normal matrix, ...).
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// Input degenerate for the requested operation (all-zero image for normalize).
class degenerate_input_error : public std::runtime_error {
 public:
  explicit degenerate_input_error(const std::string& what) : std::runtime_error(what) {}
};

/// Time series has no usable dynamics (constant series in start_to_peak).
class undefined_dynamics_error : public std::runtime_error {
 public:
  explicit undefined_dynamics_error(const std::string& what) : std::runtime_error(what) {}
};

/// Training produced a non-finite loss; carries the offending loss report.
class divergence_error : public std::runtime_error {
 public:
  explicit divergence_error(const std::string& what) : std::runtime_error(what) {}
};

/// I/O failure on dataset / checkpoint files.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tmra
