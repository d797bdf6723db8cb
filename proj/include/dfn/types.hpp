#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dfn {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vector2 = Eigen::Vector2d;
using SparseMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Raised when a chemistry closure is evaluated outside its physical domain
/// (c1 <= 0 or c2 outside (0, c2max)). Recoverable: the Newton line search
/// reacts by halving the step.
class ChemistryDomainError : public std::domain_error {
public:
  explicit ChemistryDomainError(const std::string& what) : std::domain_error(what) {}
};

/// Configuration or input-validation failure; message names the violated rule.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Nonlinear or linear solve failure with diagnostics in the message.
class SolverError : public std::runtime_error {
public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr const char* kVersion = "0.1.0";

} // namespace dfn
