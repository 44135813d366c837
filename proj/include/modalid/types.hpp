#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace modalid {

using Complex = std::complex<double>;
using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

/// Broad failure classes; the CLI maps each to an exit code.
enum class ErrorKind { config, numerical, io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

/// File access, parse, and schema failures.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

/// Column-major vec(): stacks the columns of `m`.
inline VectorXcd vec(const MatrixXcd& m) {
    return Eigen::Map<const VectorXcd>(m.data(), m.size());
}
inline VectorXd vec(const MatrixXd& m) {
    return Eigen::Map<const VectorXd>(m.data(), m.size());
}

inline MatrixXcd unvec(const VectorXcd& v, Index rows, Index cols) {
    return Eigen::Map<const MatrixXcd>(v.data(), rows, cols);
}
inline MatrixXd unvec(const VectorXd& v, Index rows, Index cols) {
    return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

}  // namespace modalid
