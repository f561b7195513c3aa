#pragma once
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stratlasso {

using Index = Eigen::Index;

template <class T>
using vec_type = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using rowvec_type = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <class T>
using mat_type = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using colarr_type = Eigen::Array<T, Eigen::Dynamic, 1>;
template <class T>
using matarr_type = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = vec_type<double>;
using Matrix = mat_type<double>;
using IndexVector = vec_type<int>;
using BoolVector = colarr_type<bool>;
using BoolMatrix = matarr_type<bool>;

/// Sentinel used for "no stratum" in reference vectors.
inline constexpr int kNoReference = -1;

/*
 * Error hierarchy. Each class maps to one failure family so the CLI can
 * translate it into a stable exit code.
 */
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, long row)
        : Error(msg + " (row " + std::to_string(row) + ")"), row_(row) {}
    long row() const { return row_; }

private:
    long row_;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class RepresentationError : public Error {
public:
    using Error::Error;
};

class RankError : public Error {
public:
    RankError(const std::string& msg, int stratum = -1)
        : Error(msg), stratum_(stratum) {}
    /// Offending stratum (0-based), or -1 for pooled quantities.
    int stratum() const { return stratum_; }

private:
    int stratum_;
};

class ConditionError : public Error {
public:
    using Error::Error;
};

/// Tolerance-based equality of coefficient values:
/// |a - b| <= 1e-9 * max(1, |a|, |b|).
template <class T>
inline bool value_equal(T a, T b)
{
    const T scale = std::max({T(1), std::abs(a), std::abs(b)});
    return std::abs(a - b) <= T(1e-9) * scale;
}

template <class T>
inline T soft_threshold(T z, T lambda)
{
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return T(0);
}

} // namespace stratlasso
