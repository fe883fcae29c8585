#include "sdobs/dde.hpp"

#include <algorithm>
#include <cmath>

namespace sdobs::dde {

namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace

HistoryBuffer::HistoryBuffer(int dimension, double window_length, double slack)
    : dimension_(dimension), window_length_(window_length), slack_(slack) {
    if (dimension <= 0) throw ConfigError("history dimension must be positive");
    if (!(window_length >= 0.0)) throw ConfigError("history window length must be nonnegative");
}

double HistoryBuffer::front_time() const {
    if (nodes_.empty()) throw ConfigError("empty history buffer");
    return nodes_.front().t;
}

double HistoryBuffer::back_time() const {
    if (nodes_.empty()) throw ConfigError("empty history buffer");
    return nodes_.back().t;
}

void HistoryBuffer::push(double t, Vec value, Vec derivative, Vec derivative_left,
                         Vec value_left) {
    if (value.size() != dimension_ || derivative.size() != dimension_ ||
        (derivative_left.size() != 0 && derivative_left.size() != dimension_) ||
        (value_left.size() != 0 && value_left.size() != dimension_))
        throw ConfigError("history node dimension mismatch");
    if (!nodes_.empty() && !(t > nodes_.back().t))
        throw ConfigError("history node times must be strictly increasing");
    nodes_.push_back(Node{t, std::move(value), std::move(derivative), std::move(derivative_left),
                          std::move(value_left)});
}

void HistoryBuffer::set_back_derivative(Vec derivative) {
    if (nodes_.empty()) throw ConfigError("empty history buffer");
    if (derivative.size() != dimension_) throw ConfigError("history node dimension mismatch");
    Node& n = nodes_.back();
    if (n.derivative_left.size() == 0) n.derivative_left = n.derivative;
    n.derivative = std::move(derivative);
}

void HistoryBuffer::trim() {
    if (nodes_.size() < 2) return;
    const double cut = nodes_.back().t - window_length_ - slack_;
    while (nodes_.size() > 2 && nodes_[1].t <= cut) nodes_.pop_front();
}

double HistoryBuffer::node_tolerance() const {
    if (nodes_.size() < 2) return 1e-12 * std::max(1.0, std::abs(nodes_.back().t));
    const double spacing = nodes_.back().t - nodes_[nodes_.size() - 2].t;
    return 1e-9 * spacing;
}

std::size_t HistoryBuffer::bracket(double t) const {
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t,
                               [](double v, const Node& n) { return v < n.t; });
    std::size_t i = static_cast<std::size_t>(it - nodes_.begin());
    if (i == 0) return 0;
    i -= 1;
    return std::min(i, nodes_.size() - 2);
}

std::ptrdiff_t HistoryBuffer::node_index(double t) const {
    if (nodes_.empty()) return -1;
    const double tol = node_tolerance();
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t - tol,
                               [](const Node& n, double v) { return n.t < v; });
    if (it != nodes_.end() && std::abs(it->t - t) <= tol) return it - nodes_.begin();
    return -1;
}

Vec HistoryBuffer::interpolate(double t) const {
    if (nodes_.empty()) throw WindowUnderflow(t, NAN, NAN);
    const double tol = node_tolerance();
    if (t < nodes_.front().t - tol || t > nodes_.back().t + tol)
        throw WindowUnderflow(t, nodes_.front().t, nodes_.back().t);
    if (auto idx = node_index(t); idx >= 0) return nodes_[static_cast<std::size_t>(idx)].value;
    const std::size_t i = bracket(t);
    return hermite(nodes_[i], nodes_[i + 1], t);
}

Vec HistoryBuffer::derivative_at(double t) const {
    if (nodes_.empty()) throw WindowUnderflow(t, NAN, NAN);
    const double tol = node_tolerance();
    if (t < nodes_.front().t - tol || t > nodes_.back().t + tol)
        throw WindowUnderflow(t, nodes_.front().t, nodes_.back().t);
    if (auto idx = node_index(t); idx >= 0)
        return nodes_[static_cast<std::size_t>(idx)].derivative;
    const std::size_t i = bracket(t);
    return hermite_derivative(nodes_[i], nodes_[i + 1], t);
}

Vec hermite(const Node& a, const Node& b, double t) {
    const double h = b.t - a.t;
    const double s = (t - a.t) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    const double h10 = s3 - 2.0 * s2 + s;
    const double h01 = -2.0 * s3 + 3.0 * s2;
    const double h11 = s3 - s2;
    return h00 * a.value + (h10 * h) * a.derivative + h01 * b.left_value() + (h11 * h) * b.left();
}

Vec hermite_derivative(const Node& a, const Node& b, double t) {
    const double h = b.t - a.t;
    const double s = (t - a.t) / h;
    const double s2 = s * s;
    const double d00 = (6.0 * s2 - 6.0 * s) / h;
    const double d10 = 3.0 * s2 - 4.0 * s + 1.0;
    const double d01 = (-6.0 * s2 + 6.0 * s) / h;
    const double d11 = 3.0 * s2 - 2.0 * s;
    return d00 * a.value + d10 * a.derivative + d01 * b.left_value() + d11 * b.left();
}

std::vector<double> window_weights(std::span<const double> s) {
    const std::size_t n = s.size();
    std::vector<double> w(n, 0.0);
    if (n < 2) return w;
    const std::size_t intervals = n - 1;
    if (intervals == 1) {
        const double h = s[1] - s[0];
        w[0] = w[1] = 0.5 * h;
        return w;
    }
    const std::size_t paired = (intervals % 2 == 0) ? intervals : intervals - 3;
    for (std::size_t i = 0; i + 2 <= paired; i += 2) {
        const double h0 = s[i + 1] - s[i];
        const double h1 = s[i + 2] - s[i + 1];
        const double span = h0 + h1;
        w[i] += span / 6.0 * (2.0 - h1 / h0);
        w[i + 1] += span * span * span / (6.0 * h0 * h1);
        w[i + 2] += span / 6.0 * (2.0 - h0 / h1);
    }
    if (paired != intervals) {
        // Interpolatory 4-point rule on the last three intervals.
        const std::size_t j = paired;
        const double x0 = s[j];
        const double len = s[j + 3] - x0;
        Eigen::Matrix4d vander;
        Eigen::Vector4d moments;
        for (int row = 0; row < 4; ++row) {
            for (int col = 0; col < 4; ++col)
                vander(row, col) = std::pow((s[j + col] - x0) / len, row);
            moments(row) = 1.0 / (row + 1);
        }
        const Eigen::Vector4d local = vander.colPivHouseholderQr().solve(moments) * len;
        for (int col = 0; col < 4; ++col) w[j + col] += local(col);
    }
    return w;
}

namespace {

// Window samples by reference: interpolated ends are owned, nodes are not.
struct WindowView {
    std::vector<double> s;
    std::vector<const Vec*> values;
    std::vector<const Vec*> jump_left;  // null where continuous
    Vec a_value, b_value;
};

void view_window(const HistoryBuffer& buffer, double a, double b, WindowView& out) {
    if (buffer.empty()) throw WindowUnderflow(a, NAN, NAN);
    const auto& nodes = buffer.nodes();
    const double tol = 1e-9 * (nodes.size() > 1 ? nodes[1].t - nodes[0].t : 1.0);
    if (a < buffer.front_time() - tol)
        throw WindowUnderflow(a, buffer.front_time(), buffer.back_time());
    if (b > buffer.back_time() + tol)
        throw WindowUnderflow(b, buffer.front_time(), buffer.back_time());

    auto first = std::upper_bound(nodes.begin(), nodes.end(), a + tol,
                                  [](double v, const Node& n) { return v < n.t; });
    auto last = std::lower_bound(nodes.begin(), nodes.end(), b - tol,
                                 [](const Node& n, double v) { return n.t < v; });
    const double h_typ = (b - a) / static_cast<double>(std::max<std::ptrdiff_t>(last - first, 0) + 1);
    const std::ptrdiff_t ia = buffer.node_index(a), ib = buffer.node_index(b);
    if (first < last && first->t - a < 0.5 * h_typ && ia < 0) ++first;
    if (first < last && b - (last - 1)->t < 0.5 * h_typ && ib < 0) --last;

    out.a_value = ia >= 0 ? nodes[static_cast<std::size_t>(ia)].value : buffer.interpolate(a);
    out.b_value = ib >= 0 ? nodes[static_cast<std::size_t>(ib)].left_value() : buffer.interpolate(b);
    const auto count = static_cast<std::size_t>(std::max<std::ptrdiff_t>(last - first, 0)) + 2;
    out.s.clear();
    out.values.clear();
    out.jump_left.clear();
    out.s.reserve(count);
    out.values.reserve(count);
    out.jump_left.reserve(count);
    out.s.push_back(a);
    out.values.push_back(&out.a_value);
    out.jump_left.push_back(nullptr);
    for (auto it = first; it < last; ++it) {
        out.s.push_back(it->t);
        out.values.push_back(&it->value);
        out.jump_left.push_back(it->value_left.size() ? &it->value_left : nullptr);
    }
    out.s.push_back(b);
    out.values.push_back(&out.b_value);
    out.jump_left.push_back(nullptr);
}

// Calls visit(s, weight, value) for every sample, restarting the rule at jumps.
template <class Visit>
void for_each_weighted(const WindowView& win, Visit&& visit) {
    std::size_t start = 0;
    for (std::size_t i = 1; i < win.s.size(); ++i) {
        const bool last = i + 1 == win.s.size();
        if (!last && !win.jump_left[i]) continue;
        const std::vector<double> w =
            window_weights(std::span<const double>(win.s.data() + start, i - start + 1));
        for (std::size_t k = 0; k < w.size(); ++k) {
            const std::size_t j = start + k;
            visit(win.s[j], w[k], (j == i && !last) ? *win.jump_left[j] : *win.values[j]);
        }
        start = i;
    }
}

}  // namespace

WindowSamples gather_window(const HistoryBuffer& buffer, double a, double b) {
    WindowView view;
    view_window(buffer, a, b, view);
    WindowSamples out;
    out.s = view.s;
    for (std::size_t i = 0; i < view.s.size(); ++i) {
        out.values.push_back(*view.values[i]);
        out.jump_left.push_back(view.jump_left[i] ? *view.jump_left[i] : Vec());
    }
    return out;
}

Vec integrate_window(const HistoryBuffer& buffer, const WindowIntegrand& integrand, double t,
                     double delta) {
    if (delta <= 0.0) {
        if (buffer.empty()) throw WindowUnderflow(t, NAN, NAN);
        return Vec::Zero(buffer.dimension());
    }
    WindowView view;
    view_window(buffer, t - delta, t, view);
    Vec acc;
    for_each_weighted(view, [&](double s, double w, const Vec& v) {
        const Vec term = integrand(s, v);
        if (acc.size() == 0) acc = Vec::Zero(term.size());
        acc.noalias() += w * term;
    });
    return acc;
}

Vec integrate_window(const HistoryBuffer& buffer, double t, double delta) {
    if (delta <= 0.0) {
        if (buffer.empty()) throw WindowUnderflow(t, NAN, NAN);
        return Vec::Zero(buffer.dimension());
    }
    thread_local WindowView view;
    view_window(buffer, t - delta, t, view);
    Vec acc = Vec::Zero(buffer.dimension());
    for_each_weighted(view, [&](double, double w, const Vec& v) { acc.noalias() += w * v; });
    return acc;
}

Vec rk4_step(const Vec& state, const Rhs& rhs, double t, double h_step) {
    return rk4_step(state, rhs, t, h_step, rhs(t, state));
}

Vec rk4_step(const Vec& state, const Rhs& rhs, double t, double h_step, const Vec& k1,
             const ChannelNamer& namer) {
    if (!(h_step > 0.0)) throw ConfigError("rk4 step size must be positive");
    const double half = 0.5 * h_step;
    const Vec k2 = rhs(t + half, state + half * k1);
    const Vec k3 = rhs(t + half, state + half * k2);
    const Vec k4 = rhs(t + h_step, state + h_step * k3);
    Vec next = state + (h_step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!all_finite(next)) throw IntegrationDiverged(t + h_step, namer ? namer(next) : "");
    return next;
}

TimeGrid::TimeGrid(double t0, double dt, std::vector<double> event_times)
    : t0_(t0), dt_(dt), events_(std::move(event_times)) {
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    std::sort(events_.begin(), events_.end());
    const double snap = 1e-9 * dt;
    for (double& e : events_) {
        const double k = std::round((e - t0) / dt);
        const double g = t0 + k * dt;
        if (std::abs(g - e) <= snap) e = g;
    }
    events_.erase(std::unique(events_.begin(), events_.end()), events_.end());
}

double TimeGrid::aligned_step(double span, double dt_requested) {
    if (!(dt_requested > 0.0)) throw ConfigError("requested time step must be positive");
    if (!(span > 0.0)) return dt_requested;
    const double count = std::ceil(span / dt_requested - 1e-9);
    return span / count;
}

bool TimeGrid::divides(double dt, double span) {
    if (span == 0.0) return true;
    const double k = std::round(span / dt);
    return k >= 1.0 && std::abs(k * dt - span) <= 1e-12 * std::abs(span);
}

double advance_with_events(const TimeGrid& grid, const StepFn& stepper, const EventFn& on_event,
                           double t_end, const NodeFn& on_node) {
    if (t_end < grid.t0()) throw ConfigError("t_end precedes the grid origin");
    const auto& events = grid.event_times();
    auto next_event = std::upper_bound(events.begin(), events.end(), grid.t0());
    const double end_tol = 1e-9 * grid.dt();

    double t = grid.t0();
    for (long k = 1; t < t_end - end_tol; ++k) {
        double t_next = grid.grid_point(k);
        if (t_next > t_end - end_tol) t_next = t_end;
        while (next_event != events.end() && *next_event <= t_next + end_tol) {
            const double tau = std::min(*next_event, t_next);
            if (tau > t) {
                stepper(t, tau - t);
                t = tau;
            }
            if (on_event) on_event(tau);
            ++next_event;
        }
        if (t < t_next) {
            stepper(t, t_next - t);
            t = t_next;
        }
        if (on_node) on_node(t);
    }
    return t;
}

}  // namespace sdobs::dde
