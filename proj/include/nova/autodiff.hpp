#pragma once

// Scalar reverse-mode differentiation on a Wengert tape.
//
// Every Var records its value and at most two (parent, local partial) edges.
// adjoints() sweeps the tape once in reverse. Rendering and field training use
// hand-structured backward passes instead (renderer.hpp, fields.hpp); the tape
// serves generic objectives and acts as an independent route when checking
// those passes.

#include "nova/common.hpp"

#include <algorithm>
#include <array>

namespace nova {

class Tape;

class Var {
public:
    Var() = default;
    Var(double constant) : value_(constant) {}  // NOLINT: implicit lift of constants

    double value() const { return value_; }
    Tape* tape() const { return tape_; }
    std::size_t index() const { return index_; }
    bool is_constant() const { return tape_ == nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t index, double value) : tape_(tape), index_(index), value_(value) {}

    Tape* tape_ = nullptr;
    std::size_t index_ = 0;
    double value_ = 0.0;
};

class Tape {
public:
    Var variable(double value) { return push(value, {}, {}); }

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // d(output)/d(node) for every node on the tape.
    std::vector<double> adjoints(const Var& output) const {
        std::vector<double> adj(nodes_.size(), 0.0);
        if (output.tape() != this) {
            return adj;
        }
        adj[output.index()] = 1.0;
        for (std::size_t i = output.index() + 1; i-- > 0;) {
            const double a = adj[i];
            if (a == 0.0) continue;
            const Node& node = nodes_[i];
            for (int e = 0; e < node.edges; ++e) {
                adj[node.parent[e]] += a * node.partial[e];
            }
        }
        return adj;
    }

    // Records an operation with value `value` and up to two differentiable inputs.
    Var record(double value, const Var& x, double dx) { return push(value, {x}, {dx}); }
    Var record(double value, const Var& x, double dx, const Var& y, double dy) { return push(value, {x, y}, {dx, dy}); }

private:
    struct Node {
        std::array<std::size_t, 2> parent{};
        std::array<double, 2> partial{};
        int edges = 0;
    };

    Var push(double value, std::initializer_list<Var> inputs, std::initializer_list<double> partials) {
        Node node;
        auto p = partials.begin();
        for (const Var& in : inputs) {
            const double d = *p++;
            if (in.is_constant()) continue;
            if (in.tape() != this) throw std::logic_error("Var belongs to another tape");
            node.parent[node.edges] = in.index();
            node.partial[node.edges] = d;
            ++node.edges;
        }
        nodes_.push_back(node);
        return {this, nodes_.size() - 1, value};
    }

    std::vector<Node> nodes_;
};

namespace detail {
inline Tape* tape_of(const Var& a, const Var& b) { return a.tape() != nullptr ? a.tape() : b.tape(); }
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
    Tape* t = detail::tape_of(a, b);
    if (t == nullptr) return a.value() + b.value();
    return t->record(a.value() + b.value(), a, 1.0, b, 1.0);
}
inline Var operator-(const Var& a, const Var& b) {
    Tape* t = detail::tape_of(a, b);
    if (t == nullptr) return a.value() - b.value();
    return t->record(a.value() - b.value(), a, 1.0, b, -1.0);
}
inline Var operator*(const Var& a, const Var& b) {
    Tape* t = detail::tape_of(a, b);
    if (t == nullptr) return a.value() * b.value();
    return t->record(a.value() * b.value(), a, b.value(), b, a.value());
}
inline Var operator/(const Var& a, const Var& b) {
    Tape* t = detail::tape_of(a, b);
    if (t == nullptr) return a.value() / b.value();
    const double q = a.value() / b.value();
    return t->record(q, a, 1.0 / b.value(), b, -q / b.value());
}
inline Var operator-(const Var& a) { return Var(0.0) - a; }
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

namespace detail {
template <class F, class D>
Var unary(const Var& x, F f, D df) {
    if (x.is_constant()) return f(x.value());
    return x.tape()->record(f(x.value()), x, df(x.value()));
}
}  // namespace detail

inline Var exp(const Var& x) {
    return detail::unary(x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}
inline Var log(const Var& x) {
    return detail::unary(x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}
inline Var sin(const Var& x) {
    return detail::unary(x, [](double v) { return std::sin(v); }, [](double v) { return std::cos(v); });
}
inline Var cos(const Var& x) {
    return detail::unary(x, [](double v) { return std::cos(v); }, [](double v) { return -std::sin(v); });
}
inline Var sqrt(const Var& x) {
    return detail::unary(x, [](double v) { return std::sqrt(v); }, [](double v) { return 0.5 / std::sqrt(v); });
}
// Subgradient 0 at the kink.
inline Var abs(const Var& x) {
    return detail::unary(x, [](double v) { return std::abs(v); },
                         [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}
inline Var relu(const Var& x) {
    return detail::unary(x, [](double v) { return std::max(v, 0.0); }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}
inline Var softplus(const Var& x) {
    return detail::unary(x, [](double v) { return nova::softplus(v); }, [](double v) { return nova::sigmoid(v); });
}
inline Var sigmoid(const Var& x) {
    return detail::unary(x, [](double v) { return nova::sigmoid(v); },
                         [](double v) { const double s = nova::sigmoid(v); return s * (1.0 - s); });
}
// Derivative passes through on [lo, hi] and is 0 outside.
inline Var clamp(const Var& x, double lo, double hi) {
    return detail::unary(x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
                         [lo, hi](double v) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

// Gradient of `loss` with respect to `parameters`; unconnected parameters get 0.
inline std::vector<double> backward(const Var& loss, std::span<const Var> parameters) {
    std::vector<double> grad(parameters.size(), 0.0);
    if (loss.tape() == nullptr) {
        return grad;
    }
    const auto adj = loss.tape()->adjoints(loss);
    for (std::size_t i = 0; i < parameters.size(); ++i) {
        if (parameters[i].tape() == loss.tape()) {
            grad[i] = adj[parameters[i].index()];
        }
    }
    return grad;
}

}  // namespace nova
