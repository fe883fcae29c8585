#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace sdobs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent or invalid scenario/configuration data.
class ConfigError : public Error {
   public:
    using Error::Error;
};

/// A state component became non-finite during integration.
class IntegrationDiverged : public Error {
   public:
    IntegrationDiverged(double t, std::string channel)
        : Error("integration diverged at t=" + std::to_string(t) +
                (channel.empty() ? std::string{} : " in channel '" + channel + "'")),
          time_(t),
          channel_(std::move(channel)) {}

    double time() const { return time_; }
    const std::string& channel() const { return channel_; }

   private:
    double time_;
    std::string channel_;
};

/// A history lookup fell outside the retained window.
class WindowUnderflow : public Error {
   public:
    WindowUnderflow(double requested, double lo, double hi)
        : Error("history lookup at t=" + std::to_string(requested) + " outside stored window [" +
                std::to_string(lo) + ", " + std::to_string(hi) + "]"),
          requested_(requested),
          lo_(lo),
          hi_(hi) {}

    double requested() const { return requested_; }
    double lower() const { return lo_; }
    double upper() const { return hi_; }

   private:
    double requested_, lo_, hi_;
};

/// A small-gain / horizon inequality required by the estimator failed.
class GainConditionViolated : public Error {
   public:
    GainConditionViolated(std::string condition, double value, double limit)
        : Error("gain condition violated: " + condition + " = " + std::to_string(value) +
                " (must be < " + std::to_string(limit) + ")"),
          condition_(std::move(condition)),
          value_(value),
          limit_(limit) {}

    const std::string& condition() const { return condition_; }
    double value() const { return value_; }
    double limit() const { return limit_; }

   private:
    std::string condition_;
    double value_, limit_;
};

}  // namespace sdobs
