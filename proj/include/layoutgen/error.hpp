#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace layoutgen {

// Precondition violations on public entry points.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Graph documents that fail to parse or validate. Line/column are 1-based;
// zero means the position is unknown.
class ParseError : public std::runtime_error {
 public:
  enum class Kind {
    kSyntax,
    kSchema,
    kUnknownRelation,
    kDanglingReference,
    kDuplicateObject,
    kDuplicateEdge,
    kInvalidValue,
  };

  ParseError(Kind kind, std::size_t line, std::size_t column,
             const std::string& message);

  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  Kind kind_;
  std::size_t line_;
  std::size_t column_;
};

// Rejection sampling could not find a layout satisfying all predicates.
class UnsatisfiableGraph : public std::runtime_error {
 public:
  UnsatisfiableGraph(std::vector<std::string> failing_edges,
                     const std::string& message)
      : std::runtime_error(message), failing_edges_(std::move(failing_edges)) {}

  const std::vector<std::string>& failing_edges() const {
    return failing_edges_;
  }

 private:
  std::vector<std::string> failing_edges_;
};

// The checkpoint has no trained denoiser for a relation used by the graph.
class MissingDenoiser : public std::runtime_error {
 public:
  explicit MissingDenoiser(std::string relation)
      : std::runtime_error("no trained denoiser for relation '" + relation +
                           "'"),
        relation_(std::move(relation)) {}

  const std::string& relation() const { return relation_; }

 private:
  std::string relation_;
};

// Training produced a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint or dataset files that cannot be read back.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace layoutgen
