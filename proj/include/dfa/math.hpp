#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfa {

/// Logistic function, stable for large |z| in either direction.
inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(sigmoid(z)) without overflow/underflow.
inline double log_sigmoid(double z) {
    if (z >= 0.0) {
        return -std::log1p(std::exp(-z));
    }
    return z - std::log1p(std::exp(z));
}

/// Max-subtracted log-sum-exp.
inline double logsumexp(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("logsumexp: empty input");
    const double m = *std::max_element(xs.begin(), xs.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

inline std::vector<double> softmax(std::span<const double> xs) {
    const double m = *std::max_element(xs.begin(), xs.end());
    std::vector<double> out(xs.size());
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out[i] = std::exp(xs[i] - m);
        s += out[i];
    }
    for (double& p : out) p /= s;
    return out;
}

/// Shannon entropy of a probability vector (natural log; 0·log 0 = 0).
inline double entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

enum class OptimizerKind { GradientDescent, Adam };

inline OptimizerKind optimizer_from_name(const std::string& name) {
    if (name == "gd" || name == "gradient-descent") return OptimizerKind::GradientDescent;
    if (name == "adam" || name == "adaptive-moment") return OptimizerKind::Adam;
    throw std::invalid_argument("unknown optimizer: " + name);
}

/// First-order parameter updater covering both optimizer choices.
/// Adam uses the usual bias-corrected moment estimates.
class Optimizer {
  public:
    Optimizer(OptimizerKind kind, double lr, double adam_eps = 1e-8)
        : kind_(kind), lr_(lr), eps_(adam_eps) {}

    void step(std::vector<double>& params, std::span<const double> grad) {
        if (params.size() != grad.size())
            throw std::invalid_argument("Optimizer::step: size mismatch");
        if (kind_ == OptimizerKind::GradientDescent) {
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grad[i];
            return;
        }
        if (m_.empty()) {
            m_.assign(params.size(), 0.0);
            v_.assign(params.size(), 0.0);
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }

    double learning_rate() const { return lr_; }

  private:
    OptimizerKind kind_;
    double lr_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

/// Thrown when an iterative solver exhausts its budget; carries the last residual.
class ConvergenceError : public std::runtime_error {
  public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + format_residual(residual) + ")"),
          residual_(residual) {}
    double residual() const { return residual_; }

  private:
    static std::string format_residual(double r) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", r);
        return buf;
    }
    double residual_;
};

}  // namespace dfa
