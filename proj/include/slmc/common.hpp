#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace slmc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline std::string format_point(const VectorXd& theta) {
    std::ostringstream os;
    os << "[";
    for (int i = 0; i < theta.size(); ++i) os << (i ? ", " : "") << theta[i];
    os << "]";
    return os.str();
}

// Non-finite potential/gradient value at some theta.
class EvaluationError : public std::runtime_error {
public:
    EvaluationError(const std::string& what, VectorXd theta)
        : std::runtime_error(what + " at theta=" + format_point(theta)),
          theta(std::move(theta)) {}
    VectorXd theta;
};

// A structural hypothesis fails (e.g. the potential is not positive), as
// opposed to a check that ran and reported a negative margin.
class HypothesisViolation : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Trajectory left the admissible region (stepsize blow-up guard).
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(double t, VectorXd theta_, double h)
        : std::runtime_error("trajectory diverged at t=" + std::to_string(t) +
                             ", h=" + std::to_string(h) +
                             ", theta=" + format_point(theta_)),
          t(t), theta(std::move(theta_)), h(h) {}
    double t;
    VectorXd theta;
    double h;
};

// Iteration cap reached; carries the best iterate seen.
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, VectorXd best_, double value, double grad_norm)
        : std::runtime_error(what), best(std::move(best_)), value(value), grad_norm(grad_norm) {}
    VectorXd best;
    double value;
    double grad_norm;
};

class ValidationError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class DegenerateInput : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class DomainTooSmall : public std::runtime_error {
public:
    DomainTooSmall(const std::string& what, double suggested_half_width)
        : std::runtime_error(what), suggested_half_width(suggested_half_width) {}
    double suggested_half_width;
};

// ---------------------------------------------------------------------------
// Seeded random streams. One independent stream per replica, derived from
// (seed, stream-id) so that ensembles are reproducible and order-independent.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1));
    const std::uint64_t a = splitmix64(s);
    const std::uint64_t b = splitmix64(s);
    const std::uint64_t c = splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    return Rng(seq);
}

inline VectorXd standard_normal(int dim, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
    return v;
}

}  // namespace slmc
