#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "graphloc/gnn.hpp"

namespace graphloc {

namespace detail {

// Visits (param, grad) pairs for every weight and bias in a fixed order.
template <class S, class F>
void zip_params(ModelParams<S>& params, const Gradients<S>& grads, F&& f)
{
    auto each = [&](Branch<S>& p, const Branch<S>& g) {
        for (std::size_t k = 0; k < p.size(); ++k) {
            f(p[k].weights, g[k].weights);
            f(p[k].bias, g[k].bias);
        }
    };
    each(params.street, grads.street);
    each(params.sat, grads.sat);
}

} // namespace detail

/// Adam with decoupled weight decay.
template <class S>
class AdamW {
public:
    struct Options {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.01;
    };

    explicit AdamW(const ModelParams<S>& shape, Options opt = {}) : opt_(opt)
    {
        auto add = [&](const Branch<S>& b) {
            for (const auto& l : b) {
                m_.push_back(Matrix<S>::Zero(l.weights.rows(), l.weights.cols()));
                v_.push_back(Matrix<S>::Zero(l.weights.rows(), l.weights.cols()));
                m_.push_back(Matrix<S>::Zero(l.bias.size(), 1));
                v_.push_back(Matrix<S>::Zero(l.bias.size(), 1));
            }
        };
        add(shape.street);
        add(shape.sat);
    }

    void step(ModelParams<S>& params, const Gradients<S>& grads, double lr)
    {
        ++t_;
        const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
        const S b1 = static_cast<S>(opt_.beta1), b2 = static_cast<S>(opt_.beta2);
        const S step = static_cast<S>(lr / bc1);
        const S decay = static_cast<S>(1.0 - lr * opt_.weight_decay);
        const S root_bc2 = static_cast<S>(std::sqrt(bc2));
        const S eps = static_cast<S>(opt_.eps);
        std::size_t slot = 0;
        detail::zip_params(params, grads, [&](auto& p, const auto& g) {
            auto& m = m_[slot];
            auto& v = v_[slot];
            ++slot;
            m.array() = b1 * m.array() + (S(1) - b1) * g.array();
            v.array() = b2 * v.array() + (S(1) - b2) * g.array().square();
            p.array() *= decay;
            p.array() -= step * m.array() / (v.array().sqrt() / root_bc2 + eps);
        });
    }

    long steps() const { return t_; }

private:
    Options opt_;
    std::vector<Matrix<S>> m_, v_;
    long t_ = 0;
};

/// Reduce-on-plateau for a metric that should increase (validation Top-1).
/// After more than `patience` epochs without improvement the rate is scaled
/// by `factor`.
class PlateauScheduler {
public:
    PlateauScheduler(double lr, int patience, double factor) : lr_(lr), patience_(patience), factor_(factor) {}

    /// Returns true if `metric` is a new best.
    bool observe(double metric)
    {
        if (!seen_ || metric > best_) {
            best_ = metric;
            seen_ = true;
            bad_ = 0;
            return true;
        }
        if (++bad_ > patience_) {
            lr_ *= factor_;
            bad_ = 0;
        }
        return false;
    }

    double lr() const { return lr_; }
    double best() const { return best_; }

private:
    double lr_;
    int patience_;
    double factor_;
    double best_ = 0.0;
    bool seen_ = false;
    int bad_ = 0;
};

} // namespace graphloc
