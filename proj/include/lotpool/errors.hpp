// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lotpool {

/// Two parameter collections (or a collection and a mask) do not share names, order and shapes.
class AlignmentError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// An argument lies outside the domain of an operation.
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// A pruning step would leave no weight alive.
class DegenerateMaskError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed file contents. offset() is the byte position where parsing failed.
class FormatError : public std::runtime_error {
  public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

  private:
    std::uint64_t offset_;
};

/// Checksum mismatch on a stored checkpoint.
class CorruptionError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace lotpool
