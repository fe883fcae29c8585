#pragma once

// Fixed-step integration of ordinary and delay differential equations:
// dense history storage, cubic Hermite interpolation, window quadrature and
// event splitting at known reset instants.

#include "sdobs/types.hpp"

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sdobs::dde {

/// Right-hand side of an ODE; delayed terms are read from captured histories.
using Rhs = std::function<Vec(double t, const Vec& y)>;

/// One stored sample of a trajectory. `derivative` is the right derivative;
/// `derivative_left`, when non-empty, is the one-sided slope from the left
/// (for kinks at resets and at the end of the initial history).
/// `value_left`, when non-empty, is the left limit at a jump; `value` is
/// always the right limit.
struct Node {
    double t;
    Vec value;
    Vec derivative;
    Vec derivative_left;
    Vec value_left;

    const Vec& left() const { return derivative_left.size() ? derivative_left : derivative; }
    const Vec& left_value() const { return value_left.size() ? value_left : value; }
};

/// Sliding window of trajectory samples with cubic Hermite dense output.
///
/// Nodes are kept for `window_length` plus `slack` seconds behind the newest
/// node; anything older is discarded by `trim`. Lookups at a stored node time
/// return the stored value bit-for-bit.
class HistoryBuffer {
   public:
    HistoryBuffer() = default;
    HistoryBuffer(int dimension, double window_length, double slack = 0.0);

    int dimension() const { return dimension_; }
    double window_length() const { return window_length_; }
    bool empty() const { return nodes_.empty(); }
    std::size_t size() const { return nodes_.size(); }
    double front_time() const;
    double back_time() const;
    const Node& back() const { return nodes_.back(); }
    const std::deque<Node>& nodes() const { return nodes_; }

    /// Appends a node; `t` must be strictly after the newest node.
    void push(double t, Vec value, Vec derivative, Vec derivative_left = Vec(),
              Vec value_left = Vec());
    /// Overwrites the right derivative of the newest node.
    void set_back_derivative(Vec derivative);

    /// Drops nodes older than newest − window_length − slack (one node at or
    /// before the cut is retained so the window stays covered).
    void trim();

    Vec interpolate(double t) const;
    Vec derivative_at(double t) const;

    /// Index of the node that coincides with `t`, or -1.
    std::ptrdiff_t node_index(double t) const;

   private:
    std::size_t bracket(double t) const;
    double node_tolerance() const;

    int dimension_ = 0;
    double window_length_ = 0.0;
    double slack_ = 0.0;
    std::deque<Node> nodes_;
};

/// Cubic Hermite interpolation on [a.t, b.t].
Vec hermite(const Node& a, const Node& b, double t);
Vec hermite_derivative(const Node& a, const Node& b, double t);

/// Free-function spelling of HistoryBuffer::interpolate.
inline Vec interpolate(const HistoryBuffer& buffer, double t) { return buffer.interpolate(t); }

using WindowIntegrand = std::function<Vec(double s, const Vec& value)>;

/// ∫_{t-delta}^{t} integrand(s, buffer(s)) ds on the stored node grid.
///
/// Pairs of intervals use (possibly non-uniform) Simpson; an odd interval
/// count closes with a cubic-exact four-point rule, or the trapezoid rule
/// when only one interval exists. Window ends that fall between nodes are
/// Hermite-interpolated. The rule restarts at jump nodes, so piecewise
/// smooth integrands keep full order.
Vec integrate_window(const HistoryBuffer& buffer, const WindowIntegrand& integrand, double t,
                     double delta);

/// Same rule applied to the stored values themselves.
Vec integrate_window(const HistoryBuffer& buffer, double t, double delta);

/// Abscissae and stored/interpolated values covering [a, b]: the two ends
/// plus every node strictly inside. An interior node closer than half a
/// spacing to an end that is not itself a node is dropped. `values` hold
/// right limits except at b, which gets the left limit. `jump_left[i]` is
/// non-empty when interior sample i is a jump node.
struct WindowSamples {
    std::vector<double> s;
    std::vector<Vec> values;
    std::vector<Vec> jump_left;
};
WindowSamples gather_window(const HistoryBuffer& buffer, double a, double b);

/// Quadrature weights for the sampled abscissae `s` over [s.front(), s.back()],
/// following the same rule as integrate_window.
std::vector<double> window_weights(std::span<const double> s);

/// Names the offending channel of a non-finite state for diagnostics.
using ChannelNamer = std::function<std::string(const Vec& state)>;

/// Classical fourth-order Runge-Kutta step. Throws IntegrationDiverged when
/// the result has a non-finite component.
Vec rk4_step(const Vec& state, const Rhs& rhs, double t, double h_step);
/// Same, with the slope at (t, state) already evaluated.
Vec rk4_step(const Vec& state, const Rhs& rhs, double t, double h_step, const Vec& k1,
             const ChannelNamer& namer = {});

/// Uniform step grid with known event (reset) instants.
class TimeGrid {
   public:
    TimeGrid(double t0, double dt, std::vector<double> event_times);

    double t0() const { return t0_; }
    double dt() const { return dt_; }
    double grid_point(long k) const { return t0_ + static_cast<double>(k) * dt_; }
    const std::vector<double>& event_times() const { return events_; }

    /// Largest step ≤ dt_requested that divides `span` into a whole number of steps.
    static double aligned_step(double span, double dt_requested);
    /// True when `span` is an integer multiple of dt to relative tolerance 1e-12.
    static bool divides(double dt, double span);

   private:
    double t0_;
    double dt_;
    std::vector<double> events_;
};

/// Advances the integration by h from t (the stepper owns the state).
using StepFn = std::function<void(double t, double h)>;
/// Called once per event time after the state has reached it.
using EventFn = std::function<void(double tau)>;
/// Called after each completed grid point (post-reset state).
using NodeFn = std::function<void(double t)>;

/// Integrates over [grid.t0(), t_end], landing exactly on every event in
/// (t0, t_end]. Event times split a grid step into sub-steps; `on_node` fires
/// only at grid points (and at t_end). Returns the final time.
double advance_with_events(const TimeGrid& grid, const StepFn& stepper, const EventFn& on_event,
                           double t_end, const NodeFn& on_node = {});

}  // namespace sdobs::dde
