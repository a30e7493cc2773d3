#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace chewsense {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violates a documented precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input data is unusable (non-finite samples, empty segments, single class...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A file or wire frame does not follow its declared format.
class FormatError : public Error {
 public:
  using Error::Error;
};

enum class Channel { Masseter, Submental };

std::string_view to_string(Channel c);

/// Window / row class label.
enum class Label { NA, C, S };

std::string_view to_string(Label l);
Label parse_label(std::string_view s);

/// Closed-open time interval in seconds.
struct Interval {
  double onset = 0.0;
  double termination = 0.0;

  double duration() const { return termination - onset; }
  double overlap(const Interval& o) const;
  double iou(const Interval& o) const;
};

/// A detected chewing event on the session clock.
struct ChewEvent {
  double onset = 0.0;
  double termination = 0.0;

  double duration() const { return termination - onset; }
  bool operator==(const ChewEvent&) const = default;
};

}  // namespace chewsense
